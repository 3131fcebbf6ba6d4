#pragma once

// Truncated iterated Laurent series over an exact coefficient field:
// K = F((t_1,...,t_n)) with t_1 the outermost variable, realized as sparse
// exponent-tuple -> Scalar maps.  Precision is a per-variable box window:
// inside the box the stored coefficients are the true ones; a coordinate may
// additionally carry a support bound (no true terms below its lower edge),
// which is what makes windowed multiplication certifiable.  Elements marked
// EXACT are globally finite and fully known.

#include "errors.hpp"
#include "expvec.hpp"
#include "scalar.hpp"

#include <map>
#include <string>
#include <vector>

namespace bca {

struct TlfDescriptor {
    FieldPtr scalars;               // coefficient field F
    std::vector<std::string> vars;  // Laurent variables, outermost first

    int dim() const { return static_cast<int>(vars.size()); }
    int var_index(const std::string& v) const;
    bool has_var(const std::string& v) const { return var_index(v) >= 0; }
    // directions carrying differentials: Laurent variables, then the
    // transcendental function variables of the coefficient field
    std::vector<std::string> all_dirs() const;
    bool equals(const TlfDescriptor& o) const;
    std::string to_string() const; // e.g. "Q(s)((t1,t2))"

    static TlfDescriptor make(FieldPtr scalars, std::vector<std::string> vars);
};

inline bool operator==(const TlfDescriptor& a, const TlfDescriptor& b) { return a.equals(b); }
inline bool operator!=(const TlfDescriptor& a, const TlfDescriptor& b) { return !a.equals(b); }

struct Window {
    static constexpr std::int32_t INF = 1 << 28;

    bool exact = true;
    Expvec lo, hi;          // box edges, per Laurent variable
    std::vector<char> supp; // supp[i]: lo[i] is also a support bound

    static Window exact_marker() { return Window{}; }
    static Window box(Expvec lo, Expvec hi, bool supp_bound = false);
    // the everything-below-hi window with support bounds at lo
    static Window supported(Expvec lo, Expvec hi);

    bool operator==(const Window& o) const {
        return exact == o.exact && lo == o.lo && hi == o.hi && supp == o.supp;
    }
    std::string to_string(const std::vector<std::string>& vars) const;
};

class LaurentElement {
public:
    LaurentElement() = default;

    static LaurentElement zero(const TlfDescriptor& K);
    static LaurentElement one(const TlfDescriptor& K);
    static LaurentElement constant(const TlfDescriptor& K, Scalar c);
    static LaurentElement monomial(const TlfDescriptor& K, Scalar c, Expvec e);
    static LaurentElement variable(const TlfDescriptor& K, const std::string& v);
    static LaurentElement from_terms(const TlfDescriptor& K,
                                     std::map<Expvec, Scalar, LexLess> terms, Window w);

    const TlfDescriptor& tlf() const { return K_; }
    const std::map<Expvec, Scalar, LexLess>& terms() const { return t_; }
    const Window& window() const { return w_; }
    bool is_exact() const { return w_.exact; }
    // no stored terms; for windowed elements this only means zero on the box
    bool is_term_free() const { return t_.empty(); }
    bool is_zero() const { return w_.exact && t_.empty(); }

    LaurentElement operator+(const LaurentElement& o) const;
    LaurentElement operator-(const LaurentElement& o) const;
    LaurentElement operator-() const;
    LaurentElement operator*(const LaurentElement& o) const;
    LaurentElement scale(const Scalar& c) const;
    LaurentElement mul_monomial(const Scalar& c, const Expvec& e) const;
    LaurentElement pow_int(long long k, const Window& target) const;

    // x^{-1} certified on the target window.  EXACT monomials invert exactly;
    // otherwise the lex-lowest term must be determinable (EXACT input, or a
    // windowed input with support bounds whose lowest term sits at the box
    // corner when dim > 1).
    LaurentElement invert(const Window& target) const;

    LaurentElement derive(const std::string& var) const;
    Scalar coeff_at(const Expvec& e) const; // throws PrecisionError outside certification
    bool is_certified_at(const Expvec& e) const;
    LaurentElement truncate(const Window& w) const;

    std::pair<Expvec, Scalar> lowest_term() const; // lex-lowest, certified

    bool operator==(const LaurentElement& o) const {
        return K_ == o.K_ && w_ == o.w_ && t_ == o.t_;
    }
    bool operator!=(const LaurentElement& o) const { return !(*this == o); }

    std::string to_string() const;

private:
    void insert_term(Expvec e, Scalar c); // accumulate, dropping zeros
    void drop_outside_box();

    TlfDescriptor K_;
    std::map<Expvec, Scalar, LexLess> t_;
    Window w_;
};

// true coefficients agree on every cell of w (both must certify w)
bool agree_on_window(const LaurentElement& x, const LaurentElement& y, const Window& w);

// Single tower-extension steps K -> L.
struct MorphismStep {
    enum class Kind { Laurent, Kummer, ConstField };

    Kind kind;
    TlfDescriptor source, target;
    std::string var;        // Laurent: added outermost var; Kummer: replaced source var t
    std::string target_var; // Kummer: the new variable u
    int e = 1;              // Kummer: ramification exponent, t = u^e g(u)
    LaurentElement g;       // Kummer: unit series in u over the target (g(0) invertible)

    static MorphismStep laurent(const TlfDescriptor& src, const std::string& u);
    static MorphismStep kummer(const TlfDescriptor& src, const std::string& t,
                               const std::string& u, int e, LaurentElement g);
    static MorphismStep constfield(const TlfDescriptor& src, const std::string& gen,
                                   std::vector<Scalar> minpoly);
};

// image of x under the step, certified on `target` where relevant
LaurentElement apply_step(const LaurentElement& x, const MorphismStep& s, const Window& target);
LaurentElement apply_tower(const LaurentElement& x, const std::vector<MorphismStep>& steps,
                           const Window& target);

// Laurent expansion of a rational function at var = 0: the embedding of
// k(...,var,...) into k(...)((var)).  Result lives over a one-variable tower
// whose coefficient field is the input field with `var` removed.
LaurentElement expand_rational(const Scalar& a, const std::string& var, std::int32_t hi);

// the descriptor expand_rational produces, and its scalar projection helpers
TlfDescriptor expansion_target(const FieldPtr& f, const std::string& var);

} // namespace bca
