#pragma once

// Exact scalar arithmetic for the coefficient fields at the bottom of a
// tower: Q, prime fields F_p (p < 2^31), multivariate rational function
// fields over those, and simple monogenic extensions of any of the former
// (needed when a tower extends the constant field).  Values are kept in a
// canonical form so equality is structural: fractions are gcd-reduced with a
// monic denominator under graded lex, F_p residues live in [0, p).

#include "errors.hpp"
#include "expvec.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace bca {

using Int = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

class ScalarField;
using FieldPtr = std::shared_ptr<const ScalarField>;
class Scalar;

// Sparse multivariate polynomial over the bottom ring (Q, or F_p with
// residues stored as small nonnegative integers).  Terms carry no zeros.
struct Poly {
    int nvars = 0;
    std::map<Expvec, Rational, GrlexLess> t;

    bool is_zero() const { return t.empty(); }
    bool is_constant() const {
        return t.empty() || (t.size() == 1 && expvec_is_zero(t.begin()->first));
    }
};

struct RatFunc {
    Poly num, den; // canonical: reduced, den monic under grlex, den != 0
};

struct ExtElt {
    std::vector<Scalar> c; // coordinates in 1, x, ..., x^{d-1} over the base field
};

class Scalar {
public:
    Scalar(); // zero of Q

    static Scalar zero(const FieldPtr& f);
    static Scalar one(const FieldPtr& f);
    static Scalar of_int(const FieldPtr& f, long long n);
    static Scalar of_rational(const FieldPtr& f, const Rational& q);
    // a named function variable, or the generator of an extension field
    static Scalar var(const FieldPtr& f, const std::string& name);
    static Scalar of_ratfunc(const FieldPtr& f, Poly num, Poly den);
    // embed a base-field value into an extension of that base
    static Scalar lift(const FieldPtr& f, const Scalar& base_value);

    const FieldPtr& field() const { return field_; }

    bool is_zero() const;
    bool is_one() const;

    Scalar operator+(const Scalar& o) const;
    Scalar operator-(const Scalar& o) const;
    Scalar operator*(const Scalar& o) const;
    Scalar operator/(const Scalar& o) const;
    Scalar operator-() const;
    Scalar inv() const;
    Scalar pow(long long e) const;
    bool operator==(const Scalar& o) const;
    bool operator!=(const Scalar& o) const { return !(*this == o); }

    // partial derivative w.r.t. a named transcendental variable; zero when the
    // variable does not occur in the field.  For extension fields the
    // generator is differentiated implicitly through its minimal polynomial.
    Scalar derive(const std::string& v) const;

    std::string to_string() const;
    std::string num_string() const; // numerator as a polynomial string
    std::string den_string() const;

    // raw access for the layers above
    const Rational& rat() const { return std::get<Rational>(v_); }
    const RatFunc& rf() const { return std::get<RatFunc>(v_); }
    const ExtElt& ext() const { return std::get<ExtElt>(v_); }

private:
    Scalar(FieldPtr f, std::variant<Rational, RatFunc, ExtElt> v);
    void check_same_field(const Scalar& o) const;

    FieldPtr field_;
    std::variant<Rational, RatFunc, ExtElt> v_;
};

class ScalarField : public std::enable_shared_from_this<ScalarField> {
public:
    enum class Kind { Rationals, PrimeField, RationalFunctions, Extension };

    static FieldPtr rationals();
    static FieldPtr prime_field(std::int64_t p);
    // base must be Q or F_p; vars transcendental and pairwise distinct
    static FieldPtr rational_functions(FieldPtr base, std::vector<std::string> vars);
    // minpoly: coefficients over base, ascending degree, monic, separable,
    // degree >= 1; base must not itself be an extension
    static FieldPtr extension(FieldPtr base, std::string gen, std::vector<Scalar> minpoly);

    Kind kind() const { return kind_; }
    std::int64_t p() const { return p_; }
    const FieldPtr& base() const { return base_; }
    const std::vector<std::string>& vars() const { return vars_; }
    const std::string& gen() const { return gen_; }
    const std::vector<Scalar>& minpoly() const { return minpoly_; }
    int ext_degree() const { return static_cast<int>(minpoly_.size()) - 1; }

    std::int64_t characteristic() const;
    // transcendental variables carrying differentials (du per variable)
    std::vector<std::string> function_vars() const;
    bool has_function_var(const std::string& v) const;

    bool equals(const ScalarField& o) const;
    std::string to_string() const;

private:
    ScalarField() = default;

    Kind kind_ = Kind::Rationals;
    std::int64_t p_ = 0;
    FieldPtr base_;
    std::vector<std::string> vars_;
    std::string gen_;
    std::vector<Scalar> minpoly_;
};

inline bool operator==(const ScalarField& a, const ScalarField& b) { return a.equals(b); }
inline bool operator!=(const ScalarField& a, const ScalarField& b) { return !a.equals(b); }

// --- polynomial layer, shared with the series expansion code ---

// ring helpers parameterised by the characteristic (p == 0 means Q)
Rational base_canon(const Rational& x, std::int64_t p);
Rational base_add(const Rational& a, const Rational& b, std::int64_t p);
Rational base_mul(const Rational& a, const Rational& b, std::int64_t p);
Rational base_inv(const Rational& a, std::int64_t p);

Poly poly_zero(int nvars);
Poly poly_const(int nvars, const Rational& c, std::int64_t p);
Poly poly_var(int nvars, int i);
Poly poly_add(const Poly& a, const Poly& b, std::int64_t p);
Poly poly_sub(const Poly& a, const Poly& b, std::int64_t p);
Poly poly_neg(const Poly& a, std::int64_t p);
Poly poly_mul(const Poly& a, const Poly& b, std::int64_t p);
Poly poly_scale(const Poly& a, const Rational& c, std::int64_t p);
Poly poly_derive(const Poly& a, int i, std::int64_t p);
Poly poly_monic(const Poly& a, std::int64_t p); // divide by grlex-leading coefficient
std::optional<Poly> poly_divide_exact(const Poly& a, const Poly& b, std::int64_t p);
Poly poly_gcd(const Poly& a, const Poly& b, std::int64_t p); // monic
std::string poly_to_string(const Poly& a, const std::vector<std::string>& names);

// decompose by the exponent of variable v: exponent -> coefficient poly
// (coefficient polys keep nvars, with zero exponent at v)
std::map<std::int32_t, Poly> poly_split_by_var(const Poly& a, int v);

} // namespace bca
