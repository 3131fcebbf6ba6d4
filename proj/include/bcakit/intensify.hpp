#pragma once

// Intensification: promote one transcendental variable of the coefficient
// field to a new innermost Laurent variable, k(s) -> k((s)), expanding every
// rational coefficient as a series at the origin.  The promotion carries the
// whole stack along: elements, forms, algebras, sections, finite length
// modules, morphisms and dual functionals.  Expansion windows are tracked;
// exact data stays exact (terminating expansions), everything else is
// certified on a box.
//
// The check_* routines evaluate both composites of the covariance squares on
// randomized inputs and return printable reports; they never throw on a
// mismatch, the report carries it.

#include "bca.hpp"

namespace bca {

struct Intensification {
    TlfDescriptor source;  // coefficient field must be rational functions
    TlfDescriptor target;  // same tower, var appended as innermost Laurent variable
    std::string var;       // the promoted variable
    std::int32_t hi = 0;   // series certified through var^hi when not exact

    // validates that var is a transcendental function variable of K
    static Intensification make(const TlfDescriptor& K, const std::string& var,
                                std::int32_t window);
};

// termwise expansion of the coefficients; the promoted exponent is spliced in
// as the last coordinate
LaurentElement intensify_element(const Intensification& u, const LaurentElement& x);

// componentwise, with direction keys re-indexed (the promoted direction moves
// from the function block into the Laurent block; the wedge reordering sign
// is absorbed into the coefficient)
Form intensify_form(const Intensification& u, const Form& a);

// same monomial basis and defining ideal over the promoted tower
ArtinianBca intensify_bca(const Intensification& u, const ArtinianBca& A);
BcaElement intensify_bca_element(const Intensification& u, const BcaElement& a);
CoeffField intensify_section(const Intensification& u, const CoeffField& sigma);

// action entries must not involve the promoted variable (they drop to the
// smaller coefficient field); the adapted basis is preserved
FinLenModule intensify_module(const Intensification& u, const FinLenModule& M);

// promotes every tower step and expands the variable images; Laurent and
// ramified steps only, and ramification unit series must not involve the
// promoted variable
BcaMorphism intensify_morphism(const Intensification& u, const BcaMorphism& f);

// covariant transport of a dual element: the transported functional sends
// each promoted basis vector to the expansion of the original value
DualElement q_dual(const Intensification& u, const DualElement& phi);

// one evaluated instance of a commuting-square case
struct CheckCase {
    std::string input;   // printable description of the randomized input
    std::string lhs;     // left composite, rendered
    std::string rhs;     // right composite, rendered
    std::string window;  // comparison window the verdict holds on
    bool ok = false;
};

struct CheckReport {
    std::string name;
    std::vector<CheckCase> cases;
    bool ok = true;

    void push(CheckCase c);
};

// transport to another section commutes with intensification:
// psi then q against q then psi, on randomized functionals.  inject_failure
// flips one sign on the left composite so the harness can watch itself fail.
CheckReport check_square_psi(const Intensification& u, const CoeffField& sigma,
                             const CoeffField& sigma2, const FinLenModule& M,
                             std::uint64_t seed, int cases, bool inject_failure = false);

// the trace along f commutes with intensification: q after trace against
// trace after q, on randomized functionals on the regular target module
CheckReport check_square_trace(const BcaMorphism& f, const Intensification& u,
                               const CoeffField& sigma, std::uint64_t seed, int cases);

// promoting two variables in either order gives the same algebra (up to the
// coordinate permutation), the same expanded section, and quotienting by
// extra monomial generators commutes with promotion
CheckReport check_associativity(const ArtinianBca& A, const CoeffField& sigma,
                                const std::string& var1, const std::string& var2,
                                std::int32_t window,
                                const std::vector<Expvec>& extra_gens);

} // namespace bca
