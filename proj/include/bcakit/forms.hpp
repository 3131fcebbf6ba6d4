#pragma once

// Separated differential forms over a tower K = F((t_1,...,t_n)) together
// with the Cartan calculus (exterior derivative, contraction, Lie derivative)
// and the residue maps along single tower steps and whole towers.
//
// Differential directions are indexed globally: Laurent variables
// outermost-first, then the transcendental function variables of the
// coefficient field.  A q-form stores components on sorted q-subsets of that
// index set; the empty form doubles as a degree-agnostic zero.

#include "series.hpp"

#include <map>
#include <vector>

namespace bca {

using DirKey = std::vector<int>;

class Form {
public:
    Form() = default;

    static Form zero(const TlfDescriptor& K, int degree);
    static Form of_element(LaurentElement x); // 0-form
    static Form d_basis(const TlfDescriptor& K, const std::string& dir);
    static Form from_components(const TlfDescriptor& K, int degree,
                                std::map<DirKey, LaurentElement> comps);

    const TlfDescriptor& tlf() const { return K_; }
    int degree() const { return q_; }
    int top_degree() const { return static_cast<int>(K_.all_dirs().size()); }
    const std::map<DirKey, LaurentElement>& components() const { return c_; }
    LaurentElement component(const DirKey& k) const;
    bool is_zero() const; // no components with terms, all EXACT

    Form operator+(const Form& o) const;
    Form operator-(const Form& o) const;
    Form operator-() const;
    Form scale(const LaurentElement& x) const;
    Form scale_scalar(const Scalar& c) const;

    bool operator==(const Form& o) const;
    bool operator!=(const Form& o) const { return !(*this == o); }
    std::string to_string() const;

private:
    friend Form wedge(const Form&, const Form&);
    friend Form exterior_d(const Form&);
    friend Form contract(const class Derivation&, const Form&);
    void put(DirKey k, LaurentElement x); // accumulate

    TlfDescriptor K_;
    int q_ = 0;
    std::map<DirKey, LaurentElement> c_;
};

// a continuous k-linear derivation sum a_v d/dv over the directions of K
class Derivation {
public:
    static Derivation zero(const TlfDescriptor& K);
    static Derivation along(const TlfDescriptor& K, const std::string& dir);
    static Derivation along(const TlfDescriptor& K, const std::string& dir, LaurentElement coeff);

    const TlfDescriptor& tlf() const { return K_; }
    const std::map<std::string, LaurentElement>& coeffs() const { return a_; }
    LaurentElement coeff(const std::string& dir) const;
    void set_coeff(const std::string& dir, LaurentElement x);

    Derivation scale(const LaurentElement& x) const;
    Derivation operator+(const Derivation& o) const;
    LaurentElement apply(const LaurentElement& x) const;
    Derivation commutator(const Derivation& o) const; // [this, o]

private:
    TlfDescriptor K_;
    std::map<std::string, LaurentElement> a_;
};

Form wedge(const Form& a, const Form& b);
Form exterior_d(const Form& a); // of a top form: the zero form
Form contract(const Derivation& d, const Form& a);
Form lie_derivative(const Derivation& d, const Form& a); // Cartan formula

// field trace of a monogenic extension element, down to the base field
Scalar field_trace(const Scalar& c);

// residue of a top form along one tower step (image side -> source side):
//  - outer Laurent variable: extract the u^{-1} du coefficient;
//  - ramified step t = u^e g(u): convert du to dt through the Jacobian,
//    reduce to the basis 1..u^{e-1} and take the multiplication trace;
//  - constant field step: coefficientwise field trace.
Form res_step_form(const Form& top, const MorphismStep& s);
// innermost step last, applied first
Form res_tower_form(const Form& top, const std::vector<MorphismStep>& tower);

} // namespace bca
