#include "bcakit/scalar.hpp"

#include <sstream>

namespace bca {

// ---------------------------------------------------------------- base ring

static std::int64_t mod_pos(std::int64_t a, std::int64_t p) {
    a %= p;
    return a < 0 ? a + p : a;
}

static std::int64_t mod_inv(std::int64_t a, std::int64_t p) {
    a = mod_pos(a, p);
    if (a == 0) throw DomainError("division by zero in F_" + std::to_string(p));
    std::int64_t t = 0, nt = 1, r = p, nr = a;
    while (nr != 0) {
        std::int64_t q = r / nr;
        t -= q * nt; std::swap(t, nt);
        r -= q * nr; std::swap(r, nr);
    }
    return mod_pos(t, p);
}

Rational base_canon(const Rational& x, std::int64_t p) {
    if (p == 0) return x;
    Int n = numerator(x) % p, d = denominator(x) % p;
    std::int64_t ni = n.convert_to<std::int64_t>(), di = d.convert_to<std::int64_t>();
    std::int64_t v = mod_pos(ni, p) * mod_inv(di, p) % p;
    return Rational(v);
}

Rational base_add(const Rational& a, const Rational& b, std::int64_t p) {
    return p ? base_canon(a + b, p) : a + b;
}

Rational base_mul(const Rational& a, const Rational& b, std::int64_t p) {
    return p ? base_canon(a * b, p) : a * b;
}

Rational base_inv(const Rational& a, std::int64_t p) {
    if (a == 0) throw DomainError("division by zero");
    if (p == 0) return Rational(1) / a;
    return Rational(mod_inv(numerator(a).convert_to<std::int64_t>(), p));
}

// -------------------------------------------------------------- polynomials

Poly poly_zero(int nvars) { return Poly{nvars, {}}; }

Poly poly_const(int nvars, const Rational& c, std::int64_t p) {
    Poly r{nvars, {}};
    Rational cc = base_canon(c, p);
    if (cc != 0) r.t.emplace(Expvec(nvars, 0), cc);
    return r;
}

Poly poly_var(int nvars, int i) {
    Poly r{nvars, {}};
    Expvec e(nvars, 0);
    e[i] = 1;
    r.t.emplace(std::move(e), Rational(1));
    return r;
}

Poly poly_add(const Poly& a, const Poly& b, std::int64_t p) {
    Poly r = a;
    for (const auto& [e, c] : b.t) {
        auto it = r.t.find(e);
        if (it == r.t.end()) {
            r.t.emplace(e, c);
        } else {
            it->second = base_add(it->second, c, p);
            if (it->second == 0) r.t.erase(it);
        }
    }
    return r;
}

Poly poly_neg(const Poly& a, std::int64_t p) {
    Poly r = a;
    for (auto& [e, c] : r.t) c = base_canon(-c, p);
    return r;
}

Poly poly_sub(const Poly& a, const Poly& b, std::int64_t p) {
    return poly_add(a, poly_neg(b, p), p);
}

Poly poly_mul(const Poly& a, const Poly& b, std::int64_t p) {
    Poly r{a.nvars, {}};
    for (const auto& [ea, ca] : a.t)
        for (const auto& [eb, cb] : b.t) {
            Expvec e = expvec_add(ea, eb);
            Rational c = base_mul(ca, cb, p);
            auto it = r.t.find(e);
            if (it == r.t.end()) {
                if (c != 0) r.t.emplace(std::move(e), std::move(c));
            } else {
                it->second = base_add(it->second, c, p);
                if (it->second == 0) r.t.erase(it);
            }
        }
    return r;
}

Poly poly_scale(const Poly& a, const Rational& c, std::int64_t p) {
    Poly r{a.nvars, {}};
    Rational cc = base_canon(c, p);
    if (cc == 0) return r;
    for (const auto& [e, v] : a.t) {
        Rational w = base_mul(v, cc, p);
        if (w != 0) r.t.emplace(e, std::move(w));
    }
    return r;
}

Poly poly_derive(const Poly& a, int i, std::int64_t p) {
    Poly r{a.nvars, {}};
    for (const auto& [e, c] : a.t) {
        if (e[i] == 0) continue;
        Rational w = base_mul(c, Rational(e[i]), p);
        if (w == 0) continue;
        Expvec ne = e;
        ne[i] -= 1;
        r.t.emplace(std::move(ne), std::move(w));
    }
    return r;
}

Poly poly_monic(const Poly& a, std::int64_t p) {
    if (a.is_zero()) return a;
    const Rational& lc = a.t.rbegin()->second;
    if (lc == 1) return a;
    return poly_scale(a, base_inv(lc, p), p);
}

std::optional<Poly> poly_divide_exact(const Poly& a, const Poly& b, std::int64_t p) {
    if (b.is_zero()) return std::nullopt;
    Poly q = poly_zero(a.nvars), r = a;
    const auto& [mb, cb] = *b.t.rbegin();
    while (!r.is_zero()) {
        const auto& [mr, cr] = *r.t.rbegin();
        if (!expvec_leq(mb, mr)) return std::nullopt;
        Poly term{a.nvars, {}};
        term.t.emplace(expvec_sub(mr, mb), base_mul(cr, base_inv(cb, p), p));
        q = poly_add(q, term, p);
        r = poly_sub(r, poly_mul(term, b, p), p);
    }
    return q;
}

std::map<std::int32_t, Poly> poly_split_by_var(const Poly& a, int v) {
    std::map<std::int32_t, Poly> r;
    for (const auto& [e, c] : a.t) {
        Expvec ne = e;
        std::int32_t k = ne[v];
        ne[v] = 0;
        auto [it, inserted] = r.try_emplace(k, Poly{a.nvars, {}});
        it->second.t.emplace(std::move(ne), c);
    }
    return r;
}

static std::int32_t poly_degree_in(const Poly& a, int v) {
    std::int32_t d = 0;
    for (const auto& [e, c] : a.t) d = std::max(d, e[v]);
    return d;
}

// leading coefficient of a viewed as a polynomial in variable v (v-slot zeroed)
static Poly poly_lc_in(const Poly& a, int v, std::int32_t d) {
    Poly r{a.nvars, {}};
    for (const auto& [e, c] : a.t)
        if (e[v] == d) {
            Expvec ne = e;
            ne[v] = 0;
            r.t.emplace(std::move(ne), c);
        }
    return r;
}

// pseudo-remainder of a by b w.r.t. variable v (fraction-free)
static Poly poly_prem(Poly a, const Poly& b, int v, std::int64_t p) {
    std::int32_t db = poly_degree_in(b, v);
    Poly lcb = poly_lc_in(b, v, db);
    while (!a.is_zero()) {
        std::int32_t da = poly_degree_in(a, v);
        if (da < db) break;
        Poly lca = poly_lc_in(a, v, da);
        Poly shift = poly_var(a.nvars, v);
        Poly mult = lca;
        for (std::int32_t k = 0; k < da - db; ++k) mult = poly_mul(mult, shift, p);
        a = poly_sub(poly_mul(lcb, a, p), poly_mul(mult, b, p), p);
    }
    return a;
}

static Poly poly_content_in(const Poly& a, int v, std::int64_t p) {
    Poly c = poly_zero(a.nvars);
    for (auto& [k, coef] : poly_split_by_var(a, v)) {
        c = poly_gcd(c, coef, p);
        if (c.is_constant() && !c.is_zero()) break;
    }
    return c;
}

Poly poly_gcd(const Poly& a, const Poly& b, std::int64_t p) {
    if (a.is_zero()) return poly_monic(b, p);
    if (b.is_zero()) return poly_monic(a, p);
    if (a.is_constant() || b.is_constant())
        return poly_const(a.nvars, Rational(1), p);
    int v = 0;
    while (poly_degree_in(a, v) == 0 && poly_degree_in(b, v) == 0) ++v;
    Poly ca = poly_content_in(a, v, p), cb = poly_content_in(b, v, p);
    Poly c = poly_gcd(ca, cb, p);
    Poly A = *poly_divide_exact(a, ca, p), B = *poly_divide_exact(b, cb, p);
    if (poly_degree_in(A, v) < poly_degree_in(B, v)) std::swap(A, B);
    while (!B.is_zero()) {
        Poly r = poly_prem(A, B, v, p);
        A = std::move(B);
        if (r.is_zero()) {
            B = poly_zero(a.nvars);
        } else {
            B = *poly_divide_exact(r, poly_content_in(r, v, p), p);
        }
    }
    Poly prim = *poly_divide_exact(A, poly_content_in(A, v, p), p);
    return poly_monic(poly_mul(c, prim, p), p);
}

static std::string rat_str(const Rational& q) {
    std::ostringstream os;
    os << q;
    return os.str();
}

std::string poly_to_string(const Poly& a, const std::vector<std::string>& names) {
    if (a.is_zero()) return "0";
    std::ostringstream os;
    bool first = true;
    for (auto it = a.t.rbegin(); it != a.t.rend(); ++it) {
        Rational c = it->second;
        bool neg = c < 0;
        if (first) {
            if (neg) os << "-";
        } else {
            os << (neg ? " - " : " + ");
        }
        first = false;
        Rational ac = neg ? Rational(-c) : c;
        std::string mono;
        for (std::size_t i = 0; i < it->first.size(); ++i) {
            if (it->first[i] == 0) continue;
            if (!mono.empty()) mono += "*";
            mono += names[i];
            if (it->first[i] != 1) mono += "^" + std::to_string(it->first[i]);
        }
        if (mono.empty()) {
            os << rat_str(ac);
        } else {
            if (ac != 1) {
                if (denominator(ac) != 1)
                    os << "(" << rat_str(ac) << ")*";
                else
                    os << rat_str(ac) << "*";
            }
            os << mono;
        }
    }
    return os.str();
}

// ------------------------------------------------------------- scalar field

static bool is_prime_u32(std::int64_t p) {
    if (p < 2) return false;
    for (std::int64_t d = 2; d * d <= p; ++d)
        if (p % d == 0) return false;
    return true;
}

FieldPtr ScalarField::rationals() {
    static FieldPtr q = [] {
        auto f = std::shared_ptr<ScalarField>(new ScalarField());
        f->kind_ = Kind::Rationals;
        return FieldPtr(f);
    }();
    return q;
}

FieldPtr ScalarField::prime_field(std::int64_t p) {
    if (p < 2 || p >= (std::int64_t(1) << 31) || !is_prime_u32(p))
        throw DomainError("prime_field: p must be a prime < 2^31");
    auto f = std::shared_ptr<ScalarField>(new ScalarField());
    f->kind_ = Kind::PrimeField;
    f->p_ = p;
    return f;
}

FieldPtr ScalarField::rational_functions(FieldPtr base, std::vector<std::string> vars) {
    if (!base || (base->kind_ != Kind::Rationals && base->kind_ != Kind::PrimeField))
        throw ShapeError("rational_functions: base must be Q or a prime field");
    if (vars.empty()) throw ShapeError("rational_functions: need at least one variable");
    for (std::size_t i = 0; i < vars.size(); ++i) {
        if (vars[i].empty()) throw ShapeError("rational_functions: empty variable name");
        for (std::size_t j = i + 1; j < vars.size(); ++j)
            if (vars[i] == vars[j]) throw ShapeError("rational_functions: duplicate variable " + vars[i]);
    }
    auto f = std::shared_ptr<ScalarField>(new ScalarField());
    f->kind_ = Kind::RationalFunctions;
    f->p_ = base->p_;
    f->base_ = std::move(base);
    f->vars_ = std::move(vars);
    return f;
}

// forward decl of the univariate helpers used for the separability check
namespace {
std::vector<Scalar> up_trim(std::vector<Scalar> a);
std::vector<Scalar> up_gcd(std::vector<Scalar> a, std::vector<Scalar> b);
} // namespace

FieldPtr ScalarField::extension(FieldPtr base, std::string gen, std::vector<Scalar> minpoly) {
    if (!base) throw ShapeError("extension: null base");
    if (base->kind_ == Kind::Extension)
        throw ShapeError("extension: nested extensions are not representable");
    if (gen.empty() || base->has_function_var(gen))
        throw ShapeError("extension: generator name invalid or collides with a variable");
    if (minpoly.size() < 2) throw ShapeError("extension: minimal polynomial must be nonconstant");
    for (const auto& c : minpoly)
        if (!c.field()->equals(*base)) throw FieldMismatch("extension: minpoly coefficient not over base");
    if (!(minpoly.back() == Scalar::one(base))) throw ShapeError("extension: minimal polynomial must be monic");
    // separable <=> gcd(f, f') is a unit
    std::vector<Scalar> fp;
    for (std::size_t i = 1; i < minpoly.size(); ++i)
        fp.push_back(minpoly[i] * Scalar::of_int(base, static_cast<long long>(i)));
    auto g = up_gcd(minpoly, up_trim(std::move(fp)));
    if (g.size() != 1) throw DomainError("extension: minimal polynomial is not separable");
    auto f = std::shared_ptr<ScalarField>(new ScalarField());
    f->kind_ = Kind::Extension;
    f->p_ = base->p_;
    f->base_ = std::move(base);
    f->gen_ = std::move(gen);
    f->minpoly_ = std::move(minpoly);
    return f;
}

std::int64_t ScalarField::characteristic() const { return p_; }

std::vector<std::string> ScalarField::function_vars() const {
    switch (kind_) {
    case Kind::RationalFunctions: return vars_;
    case Kind::Extension: return base_->function_vars();
    default: return {};
    }
}

bool ScalarField::has_function_var(const std::string& v) const {
    auto fv = function_vars();
    return std::find(fv.begin(), fv.end(), v) != fv.end();
}

bool ScalarField::equals(const ScalarField& o) const {
    if (kind_ != o.kind_ || p_ != o.p_) return false;
    switch (kind_) {
    case Kind::Rationals:
    case Kind::PrimeField: return true;
    case Kind::RationalFunctions: return vars_ == o.vars_ && base_->equals(*o.base_);
    case Kind::Extension: {
        if (gen_ != o.gen_ || !base_->equals(*o.base_)) return false;
        if (minpoly_.size() != o.minpoly_.size()) return false;
        for (std::size_t i = 0; i < minpoly_.size(); ++i)
            if (!(minpoly_[i] == o.minpoly_[i])) return false;
        return true;
    }
    }
    return false;
}

std::string ScalarField::to_string() const {
    switch (kind_) {
    case Kind::Rationals: return "Q";
    case Kind::PrimeField: return "F_" + std::to_string(p_);
    case Kind::RationalFunctions: {
        std::string s = base_->to_string() + "(";
        for (std::size_t i = 0; i < vars_.size(); ++i) {
            if (i) s += ",";
            s += vars_[i];
        }
        return s + ")";
    }
    case Kind::Extension: {
        std::string s = base_->to_string() + "[" + gen_ + "]/(";
        bool first = true;
        for (std::size_t i = minpoly_.size(); i-- > 0;) {
            if (minpoly_[i].is_zero()) continue;
            if (!first) s += " + ";
            first = false;
            if (i == 0 || !minpoly_[i].is_one()) s += "(" + minpoly_[i].to_string() + ")";
            if (i > 0) {
                if (!minpoly_[i].is_one()) s += "*";
                s += gen_;
                if (i > 1) s += "^" + std::to_string(i);
            }
        }
        return s + ")";
    }
    }
    return "?";
}

// ---------------------------------------------- univariate polys over a field
// (used for extension-element arithmetic; coefficients are base-field Scalars)

namespace {

std::vector<Scalar> up_trim(std::vector<Scalar> a) {
    while (!a.empty() && a.back().is_zero()) a.pop_back();
    return a;
}

std::vector<Scalar> up_mul(const std::vector<Scalar>& a, const std::vector<Scalar>& b) {
    if (a.empty() || b.empty()) return {};
    const FieldPtr& F = a[0].field();
    std::vector<Scalar> r(a.size() + b.size() - 1, Scalar::zero(F));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
            r[i + j] = r[i + j] + a[i] * b[j];
    return up_trim(std::move(r));
}

std::vector<Scalar> up_sub(std::vector<Scalar> a, const std::vector<Scalar>& b) {
    if (a.size() < b.size()) {
        const FieldPtr& F = b[0].field();
        a.resize(b.size(), Scalar::zero(F));
    }
    for (std::size_t i = 0; i < b.size(); ++i) a[i] = a[i] - b[i];
    return up_trim(std::move(a));
}

// divmod over a field; b must be nonzero
std::pair<std::vector<Scalar>, std::vector<Scalar>> up_divmod(std::vector<Scalar> a,
                                                              const std::vector<Scalar>& b) {
    const FieldPtr& F = b.back().field();
    std::vector<Scalar> q;
    if (a.size() >= b.size()) q.assign(a.size() - b.size() + 1, Scalar::zero(F));
    Scalar ilc = b.back().inv();
    while (a.size() >= b.size()) {
        Scalar c = a.back() * ilc;
        std::size_t shift = a.size() - b.size();
        q[shift] = c;
        std::vector<Scalar> t(shift, Scalar::zero(F));
        t.push_back(c);
        a = up_sub(std::move(a), up_mul(t, b));
    }
    return {up_trim(std::move(q)), std::move(a)};
}

std::vector<Scalar> up_gcd(std::vector<Scalar> a, std::vector<Scalar> b) {
    a = up_trim(std::move(a));
    b = up_trim(std::move(b));
    while (!b.empty()) {
        auto [q, r] = up_divmod(a, b);
        a = std::move(b);
        b = std::move(r);
    }
    if (!a.empty() && !a.back().is_one()) {
        Scalar il = a.back().inv();
        for (auto& c : a) c = c * il;
    }
    return a;
}

// inverse of a modulo monic f via extended Euclid
std::vector<Scalar> up_invmod(std::vector<Scalar> a, const std::vector<Scalar>& f) {
    const FieldPtr& F = f.back().field();
    std::vector<Scalar> r0 = f, r1 = up_trim(std::move(a));
    if (r1.empty()) throw DomainError("division by zero in extension field");
    std::vector<Scalar> s0, s1{Scalar::one(F)}; // s coefficients track a-multipliers
    while (!r1.empty()) {
        auto [q, r] = up_divmod(r0, r1);
        auto s2 = up_sub(s0, up_mul(q, s1));
        r0 = std::move(r1);
        r1 = std::move(r);
        s0 = std::move(s1);
        s1 = std::move(s2);
    }
    if (r0.size() != 1) throw DomainError("non-invertible element in extension field");
    Scalar il = r0[0].inv();
    for (auto& c : s0) c = c * il;
    return s0;
}

} // namespace

// -------------------------------------------------------------------- scalar

Scalar::Scalar() : field_(ScalarField::rationals()), v_(Rational(0)) {}

Scalar::Scalar(FieldPtr f, std::variant<Rational, RatFunc, ExtElt> v)
    : field_(std::move(f)), v_(std::move(v)) {}

void Scalar::check_same_field(const Scalar& o) const {
    if (!field_->equals(*o.field_))
        throw FieldMismatch("scalar fields differ: " + field_->to_string() + " vs " +
                            o.field_->to_string());
}

Scalar Scalar::zero(const FieldPtr& f) { return of_rational(f, Rational(0)); }
Scalar Scalar::one(const FieldPtr& f) { return of_rational(f, Rational(1)); }

Scalar Scalar::of_int(const FieldPtr& f, long long n) { return of_rational(f, Rational(n)); }

Scalar Scalar::of_rational(const FieldPtr& f, const Rational& q) {
    switch (f->kind()) {
    case ScalarField::Kind::Rationals: return Scalar(f, q);
    case ScalarField::Kind::PrimeField: return Scalar(f, base_canon(q, f->p()));
    case ScalarField::Kind::RationalFunctions: {
        int n = static_cast<int>(f->vars().size());
        RatFunc rf{poly_const(n, q, f->p()), poly_const(n, Rational(1), f->p())};
        return Scalar(f, std::move(rf));
    }
    case ScalarField::Kind::Extension: {
        ExtElt e;
        e.c.assign(static_cast<std::size_t>(f->ext_degree()), Scalar::zero(f->base()));
        e.c[0] = of_rational(f->base(), q);
        return Scalar(f, std::move(e));
    }
    }
    throw Error("unreachable");
}

Scalar Scalar::var(const FieldPtr& f, const std::string& name) {
    if (f->kind() == ScalarField::Kind::RationalFunctions) {
        const auto& vs = f->vars();
        for (std::size_t i = 0; i < vs.size(); ++i)
            if (vs[i] == name) {
                RatFunc rf{poly_var(static_cast<int>(vs.size()), static_cast<int>(i)),
                           poly_const(static_cast<int>(vs.size()), Rational(1), f->p())};
                return Scalar(f, std::move(rf));
            }
        throw DomainError("unknown variable " + name + " in " + f->to_string());
    }
    if (f->kind() == ScalarField::Kind::Extension) {
        if (name == f->gen()) {
            ExtElt e;
            e.c.assign(static_cast<std::size_t>(f->ext_degree()), Scalar::zero(f->base()));
            if (e.c.size() < 2) {
                // degree-1 extension: generator equals -constant term
                return Scalar(f, ExtElt{{-f->minpoly()[0]}});
            }
            e.c[1] = Scalar::one(f->base());
            return Scalar(f, std::move(e));
        }
        ExtElt e;
        e.c.assign(static_cast<std::size_t>(f->ext_degree()), Scalar::zero(f->base()));
        e.c[0] = var(f->base(), name);
        return Scalar(f, std::move(e));
    }
    throw DomainError("field " + f->to_string() + " has no variables");
}

static RatFunc rf_canon(Poly num, Poly den, std::int64_t p) {
    if (den.is_zero()) throw DomainError("division by zero");
    if (num.is_zero()) return RatFunc{num, poly_const(num.nvars, Rational(1), p)};
    Poly g = poly_gcd(num, den, p);
    if (!(g.is_constant() && !g.is_zero() && g.t.begin()->second == 1)) {
        num = *poly_divide_exact(num, g, p);
        den = *poly_divide_exact(den, g, p);
    }
    const Rational& lc = den.t.rbegin()->second;
    if (lc != 1) {
        Rational il = base_inv(lc, p);
        num = poly_scale(num, il, p);
        den = poly_scale(den, il, p);
    }
    return RatFunc{std::move(num), std::move(den)};
}

Scalar Scalar::of_ratfunc(const FieldPtr& f, Poly num, Poly den) {
    if (f->kind() != ScalarField::Kind::RationalFunctions)
        throw ShapeError("of_ratfunc: field is not a rational function field");
    return Scalar(f, rf_canon(std::move(num), std::move(den), f->p()));
}

Scalar Scalar::lift(const FieldPtr& f, const Scalar& base_value) {
    if (f->kind() != ScalarField::Kind::Extension)
        throw ShapeError("lift: target is not an extension field");
    if (!f->base()->equals(*base_value.field()))
        throw FieldMismatch("lift: value does not live in the base of " + f->to_string());
    ExtElt e;
    e.c.assign(static_cast<std::size_t>(f->ext_degree()), Scalar::zero(f->base()));
    e.c[0] = base_value;
    return Scalar(f, std::move(e));
}

bool Scalar::is_zero() const {
    switch (field_->kind()) {
    case ScalarField::Kind::Rationals:
    case ScalarField::Kind::PrimeField: return rat() == 0;
    case ScalarField::Kind::RationalFunctions: return rf().num.is_zero();
    case ScalarField::Kind::Extension:
        for (const auto& c : ext().c)
            if (!c.is_zero()) return false;
        return true;
    }
    return false;
}

bool Scalar::is_one() const { return *this == one(field_); }

Scalar Scalar::operator+(const Scalar& o) const {
    check_same_field(o);
    switch (field_->kind()) {
    case ScalarField::Kind::Rationals:
    case ScalarField::Kind::PrimeField:
        return Scalar(field_, base_add(rat(), o.rat(), field_->p()));
    case ScalarField::Kind::RationalFunctions: {
        std::int64_t p = field_->p();
        const RatFunc &a = rf(), &b = o.rf();
        Poly num = poly_add(poly_mul(a.num, b.den, p), poly_mul(b.num, a.den, p), p);
        Poly den = poly_mul(a.den, b.den, p);
        return Scalar(field_, rf_canon(std::move(num), std::move(den), p));
    }
    case ScalarField::Kind::Extension: {
        ExtElt r = ext();
        for (std::size_t i = 0; i < r.c.size(); ++i) r.c[i] = r.c[i] + o.ext().c[i];
        return Scalar(field_, std::move(r));
    }
    }
    throw Error("unreachable");
}

Scalar Scalar::operator-() const {
    switch (field_->kind()) {
    case ScalarField::Kind::Rationals:
    case ScalarField::Kind::PrimeField:
        return Scalar(field_, base_canon(-rat(), field_->p()));
    case ScalarField::Kind::RationalFunctions: {
        RatFunc r = rf();
        r.num = poly_neg(r.num, field_->p());
        return Scalar(field_, std::move(r));
    }
    case ScalarField::Kind::Extension: {
        ExtElt r = ext();
        for (auto& c : r.c) c = -c;
        return Scalar(field_, std::move(r));
    }
    }
    throw Error("unreachable");
}

Scalar Scalar::operator-(const Scalar& o) const { return *this + (-o); }

Scalar Scalar::operator*(const Scalar& o) const {
    check_same_field(o);
    switch (field_->kind()) {
    case ScalarField::Kind::Rationals:
    case ScalarField::Kind::PrimeField:
        return Scalar(field_, base_mul(rat(), o.rat(), field_->p()));
    case ScalarField::Kind::RationalFunctions: {
        std::int64_t p = field_->p();
        const RatFunc &a = rf(), &b = o.rf();
        return Scalar(field_, rf_canon(poly_mul(a.num, b.num, p), poly_mul(a.den, b.den, p), p));
    }
    case ScalarField::Kind::Extension: {
        auto r = up_mul(ext().c, o.ext().c);
        if (r.size() >= field_->minpoly().size())
            r = up_divmod(std::move(r), field_->minpoly()).second;
        ExtElt res;
        res.c.assign(static_cast<std::size_t>(field_->ext_degree()), Scalar::zero(field_->base()));
        for (std::size_t i = 0; i < r.size(); ++i) res.c[i] = r[i];
        return Scalar(field_, std::move(res));
    }
    }
    throw Error("unreachable");
}

Scalar Scalar::inv() const {
    if (is_zero()) throw DomainError("division by zero");
    switch (field_->kind()) {
    case ScalarField::Kind::Rationals:
    case ScalarField::Kind::PrimeField:
        return Scalar(field_, base_inv(rat(), field_->p()));
    case ScalarField::Kind::RationalFunctions: {
        const RatFunc& a = rf();
        return Scalar(field_, rf_canon(a.den, a.num, field_->p()));
    }
    case ScalarField::Kind::Extension: {
        auto iv = up_invmod(ext().c, field_->minpoly());
        ExtElt res;
        res.c.assign(static_cast<std::size_t>(field_->ext_degree()), Scalar::zero(field_->base()));
        for (std::size_t i = 0; i < iv.size(); ++i) res.c[i] = iv[i];
        return Scalar(field_, std::move(res));
    }
    }
    throw Error("unreachable");
}

Scalar Scalar::operator/(const Scalar& o) const { return *this * o.inv(); }

Scalar Scalar::pow(long long e) const {
    if (e < 0) return inv().pow(-e);
    Scalar r = one(field_), b = *this;
    while (e) {
        if (e & 1) r = r * b;
        b = b * b;
        e >>= 1;
    }
    return r;
}

bool Scalar::operator==(const Scalar& o) const {
    if (!field_->equals(*o.field_)) return false;
    switch (field_->kind()) {
    case ScalarField::Kind::Rationals:
    case ScalarField::Kind::PrimeField: return rat() == o.rat();
    case ScalarField::Kind::RationalFunctions:
        return rf().num.t == o.rf().num.t && rf().den.t == o.rf().den.t;
    case ScalarField::Kind::Extension:
        for (std::size_t i = 0; i < ext().c.size(); ++i)
            if (!(ext().c[i] == o.ext().c[i])) return false;
        return true;
    }
    return false;
}

Scalar Scalar::derive(const std::string& v) const {
    switch (field_->kind()) {
    case ScalarField::Kind::Rationals:
    case ScalarField::Kind::PrimeField: return zero(field_);
    case ScalarField::Kind::RationalFunctions: {
        const auto& vs = field_->vars();
        auto it = std::find(vs.begin(), vs.end(), v);
        if (it == vs.end()) return zero(field_);
        int i = static_cast<int>(it - vs.begin());
        std::int64_t p = field_->p();
        const RatFunc& a = rf();
        // (n'd - nd') / d^2
        Poly num = poly_sub(poly_mul(poly_derive(a.num, i, p), a.den, p),
                            poly_mul(a.num, poly_derive(a.den, i, p), p), p);
        Poly den = poly_mul(a.den, a.den, p);
        return Scalar(field_, rf_canon(std::move(num), std::move(den), p));
    }
    case ScalarField::Kind::Extension: {
        const FieldPtr& F = field_;
        const auto& f = F->minpoly();
        auto lift = [&](std::vector<Scalar> cs) {
            ExtElt e;
            e.c.assign(static_cast<std::size_t>(F->ext_degree()), Scalar::zero(F->base()));
            for (std::size_t i = 0; i < cs.size() && i < e.c.size(); ++i) e.c[i] = cs[i];
            return Scalar(F, std::move(e));
        };
        Scalar x = F->ext_degree() >= 2 ? var(F, F->gen()) : lift({-f[0]});
        // coefficientwise part
        Scalar d = zero(F);
        Scalar xi = one(F);
        for (std::size_t i = 0; i < ext().c.size(); ++i) {
            d = d + lift({ext().c[i].derive(v)}) * xi;
            xi = xi * x;
        }
        // implicit part: dx/dv = -f^(v)(x) / f'(x)
        Scalar fv = zero(F), fx = zero(F);
        xi = one(F);
        for (std::size_t j = 0; j < f.size(); ++j) {
            fv = fv + lift({f[j].derive(v)}) * xi;
            if (j + 1 < f.size())
                fx = fx + lift({f[j + 1] * Scalar::of_int(F->base(), static_cast<long long>(j + 1))}) * xi;
            xi = xi * x;
        }
        if (!fv.is_zero()) {
            Scalar dxdv = -(fv / fx);
            Scalar cx = zero(F);
            xi = one(F);
            for (std::size_t i = 1; i < ext().c.size(); ++i) {
                cx = cx + lift({ext().c[i] * Scalar::of_int(F->base(), static_cast<long long>(i))}) * xi;
                xi = xi * x;
            }
            d = d + cx * dxdv;
        }
        return d;
    }
    }
    throw Error("unreachable");
}

std::string Scalar::to_string() const {
    switch (field_->kind()) {
    case ScalarField::Kind::Rationals:
    case ScalarField::Kind::PrimeField: return rat_str(rat());
    case ScalarField::Kind::RationalFunctions: {
        const RatFunc& a = rf();
        std::string n = poly_to_string(a.num, field_->vars());
        if (a.den.is_constant()) return n;
        return "(" + n + ")/(" + poly_to_string(a.den, field_->vars()) + ")";
    }
    case ScalarField::Kind::Extension: {
        std::string s;
        bool first = true;
        for (std::size_t i = ext().c.size(); i-- > 0;) {
            if (ext().c[i].is_zero()) continue;
            if (!first) s += " + ";
            first = false;
            if (i == 0) {
                s += ext().c[i].to_string();
            } else {
                if (!ext().c[i].is_one()) s += "(" + ext().c[i].to_string() + ")*";
                s += field_->gen();
                if (i > 1) s += "^" + std::to_string(i);
            }
        }
        return first ? "0" : s;
    }
    }
    return "?";
}

std::string Scalar::num_string() const {
    switch (field_->kind()) {
    case ScalarField::Kind::Rationals: {
        std::ostringstream os;
        os << numerator(rat());
        return os.str();
    }
    case ScalarField::Kind::PrimeField: return rat_str(rat());
    case ScalarField::Kind::RationalFunctions: return poly_to_string(rf().num, field_->vars());
    case ScalarField::Kind::Extension: return to_string();
    }
    return "?";
}

std::string Scalar::den_string() const {
    switch (field_->kind()) {
    case ScalarField::Kind::Rationals: {
        std::ostringstream os;
        os << denominator(rat());
        return os.str();
    }
    case ScalarField::Kind::PrimeField: return "1";
    case ScalarField::Kind::RationalFunctions: return poly_to_string(rf().den, field_->vars());
    case ScalarField::Kind::Extension: return "1";
    }
    return "?";
}

} // namespace bca
