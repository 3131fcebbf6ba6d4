#include "bcakit/series.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <sstream>

namespace bca {

namespace {

// internal window arithmetic runs in int64 with wide sentinels
constexpr std::int64_t PINF = std::int64_t(1) << 40;
constexpr std::int64_t MINF = -PINF;

std::int64_t hi_up(std::int32_t w) { return w >= Window::INF ? PINF : w; }

std::int32_t clamp_edge(std::int64_t v) {
    if (v >= Window::INF) return Window::INF;
    if (v <= -Window::INF) return -Window::INF;
    return static_cast<std::int32_t>(v);
}

std::int64_t sat_add(std::int64_t a, std::int64_t b) {
    if (a >= PINF || b >= PINF) return PINF;
    if (a <= MINF || b <= MINF) return MINF;
    return a + b;
}

// per-coordinate knowledge summary of one multiplication operand:
//  - cells e with certLow <= e <= hi are certified in this coordinate
//  - hasSB: no true terms below sB
//  - hasMaxS: no true terms above maxS (finite elements only)
struct OpInfo {
    std::int64_t certLow, hi, sB, maxS;
    bool hasSB, hasMaxS;
};

std::vector<OpInfo> op_info(const LaurentElement& x) {
    int n = x.tlf().dim();
    std::vector<OpInfo> v(static_cast<std::size_t>(n));
    if (x.is_exact()) {
        for (int i = 0; i < n; ++i)
            v[i] = OpInfo{MINF, PINF, PINF, MINF, true, true};
        for (const auto& [e, c] : x.terms())
            for (int i = 0; i < n; ++i) {
                v[i].sB = std::min<std::int64_t>(v[i].sB, e[i]);
                v[i].maxS = std::max<std::int64_t>(v[i].maxS, e[i]);
            }
        return v;
    }
    const Window& w = x.window();
    for (int i = 0; i < n; ++i) {
        bool s = w.supp[static_cast<std::size_t>(i)] != 0;
        v[i] = OpInfo{s ? MINF : w.lo[i], hi_up(w.hi[i]), w.lo[i], MINF, s, false};
    }
    return v;
}

bool window_is_empty_claim(std::int64_t certLow, std::int64_t hi, bool hasSB) {
    // with a support bound, everything below hi is still certified (as zero)
    if (hasSB) return hi <= MINF;
    return certLow > hi;
}

} // namespace

// --------------------------------------------------------------- descriptor

TlfDescriptor TlfDescriptor::make(FieldPtr scalars, std::vector<std::string> vars) {
    if (!scalars) throw DomainError("tower descriptor needs a coefficient field");
    for (std::size_t i = 0; i < vars.size(); ++i) {
        if (vars[i].empty()) throw DomainError("empty variable name");
        for (std::size_t j = i + 1; j < vars.size(); ++j)
            if (vars[i] == vars[j]) throw DomainError("duplicate Laurent variable " + vars[i]);
        if (scalars->has_function_var(vars[i]))
            throw DomainError("variable " + vars[i] + " already lives in the coefficient field");
    }
    TlfDescriptor d;
    d.scalars = std::move(scalars);
    d.vars = std::move(vars);
    return d;
}

int TlfDescriptor::var_index(const std::string& v) const {
    for (std::size_t i = 0; i < vars.size(); ++i)
        if (vars[i] == v) return static_cast<int>(i);
    return -1;
}

std::vector<std::string> TlfDescriptor::all_dirs() const {
    std::vector<std::string> d = vars;
    for (const auto& f : scalars->function_vars()) d.push_back(f);
    return d;
}

bool TlfDescriptor::equals(const TlfDescriptor& o) const {
    return vars == o.vars && scalars->equals(*o.scalars);
}

std::string TlfDescriptor::to_string() const {
    std::string s = scalars->to_string();
    if (vars.empty()) return s;
    s += "((";
    for (std::size_t i = 0; i < vars.size(); ++i) {
        if (i) s += ",";
        s += vars[i];
    }
    s += "))";
    return s;
}

// ------------------------------------------------------------------- window

Window Window::box(Expvec lo, Expvec hi, bool supp_bound) {
    if (lo.size() != hi.size()) throw DomainError("window edges disagree in length");
    Window w;
    w.exact = false;
    w.lo = std::move(lo);
    w.hi = std::move(hi);
    w.supp.assign(w.lo.size(), supp_bound ? 1 : 0);
    return w;
}

Window Window::supported(Expvec lo, Expvec hi) { return box(std::move(lo), std::move(hi), true); }

std::string Window::to_string(const std::vector<std::string>& vars) const {
    if (exact) return "EXACT";
    std::string s = "O(";
    bool first = true;
    for (std::size_t i = 0; i < hi.size(); ++i) {
        if (hi[i] >= INF) continue;
        if (!first) s += ", ";
        first = false;
        std::int32_t e = hi[i] + 1;
        s += vars[i];
        if (e != 1) s += "^" + std::to_string(e);
    }
    if (first) s += "?";
    s += ")";
    return s;
}

// ------------------------------------------------------------------ element

LaurentElement LaurentElement::zero(const TlfDescriptor& K) {
    LaurentElement x;
    x.K_ = K;
    return x;
}

LaurentElement LaurentElement::one(const TlfDescriptor& K) {
    return constant(K, Scalar::one(K.scalars));
}

LaurentElement LaurentElement::constant(const TlfDescriptor& K, Scalar c) {
    return monomial(K, std::move(c), Expvec(static_cast<std::size_t>(K.dim()), 0));
}

LaurentElement LaurentElement::monomial(const TlfDescriptor& K, Scalar c, Expvec e) {
    if (static_cast<int>(e.size()) != K.dim())
        throw DomainError("exponent length does not match the tower dimension");
    if (!c.field()->equals(*K.scalars))
        throw FieldMismatch("coefficient lives in " + c.field()->to_string() + ", tower wants " +
                            K.scalars->to_string());
    LaurentElement x;
    x.K_ = K;
    if (!c.is_zero()) x.t_.emplace(std::move(e), std::move(c));
    return x;
}

LaurentElement LaurentElement::variable(const TlfDescriptor& K, const std::string& v) {
    int i = K.var_index(v);
    if (i < 0) throw DomainError("unknown Laurent variable " + v);
    Expvec e(static_cast<std::size_t>(K.dim()), 0);
    e[static_cast<std::size_t>(i)] = 1;
    return monomial(K, Scalar::one(K.scalars), std::move(e));
}

LaurentElement LaurentElement::from_terms(const TlfDescriptor& K,
                                          std::map<Expvec, Scalar, LexLess> terms, Window w) {
    LaurentElement x;
    x.K_ = K;
    if (!w.exact && (static_cast<int>(w.lo.size()) != K.dim() ||
                     static_cast<int>(w.hi.size()) != K.dim() ||
                     static_cast<int>(w.supp.size()) != K.dim()))
        throw DomainError("window shape does not match the tower dimension");
    for (auto& [e, c] : terms) {
        if (static_cast<int>(e.size()) != K.dim())
            throw DomainError("exponent length does not match the tower dimension");
        if (!c.field()->equals(*K.scalars)) throw FieldMismatch("coefficient field mismatch");
        if (!c.is_zero()) x.t_.emplace(e, c);
    }
    x.w_ = std::move(w);
    x.drop_outside_box();
    return x;
}

void LaurentElement::insert_term(Expvec e, Scalar c) {
    auto it = t_.find(e);
    if (it == t_.end()) {
        if (!c.is_zero()) t_.emplace(std::move(e), std::move(c));
        return;
    }
    it->second = it->second + c;
    if (it->second.is_zero()) t_.erase(it);
}

void LaurentElement::drop_outside_box() {
    if (w_.exact) return;
    for (auto it = t_.begin(); it != t_.end();) {
        bool inside = true;
        for (std::size_t i = 0; i < it->first.size(); ++i)
            if (it->first[i] < w_.lo[i] || it->first[i] > w_.hi[i]) {
                inside = false;
                break;
            }
        it = inside ? std::next(it) : t_.erase(it);
    }
}

LaurentElement LaurentElement::operator+(const LaurentElement& o) const {
    if (K_ != o.K_)
        throw FieldMismatch("towers differ: " + K_.to_string() + " vs " + o.K_.to_string());
    LaurentElement r;
    r.K_ = K_;
    if (w_.exact && o.w_.exact) {
        r.t_ = t_;
        for (const auto& [e, c] : o.t_) r.insert_term(e, c);
        return r;
    }
    int n = K_.dim();
    auto a = op_info(*this), b = op_info(o);
    Window w;
    w.exact = false;
    w.lo.resize(static_cast<std::size_t>(n));
    w.hi.resize(static_cast<std::size_t>(n));
    w.supp.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        std::int64_t hi = std::min(a[i].hi, b[i].hi);
        std::int64_t certLow = std::max(a[i].certLow, b[i].certLow);
        bool hasSB = a[i].hasSB && b[i].hasSB;
        std::int64_t sB = std::min(a[i].sB, b[i].sB);
        if (window_is_empty_claim(certLow, hi, hasSB))
            throw PrecisionError("sum has no certified window on " + K_.vars[static_cast<std::size_t>(i)]);
        w.supp[static_cast<std::size_t>(i)] = hasSB ? 1 : 0;
        w.lo[i] = clamp_edge(hasSB ? sB : certLow);
        w.hi[i] = clamp_edge(hi);
    }
    r.w_ = std::move(w);
    r.t_ = t_;
    for (const auto& [e, c] : o.t_) r.insert_term(e, c);
    r.drop_outside_box();
    return r;
}

LaurentElement LaurentElement::operator-() const {
    LaurentElement r = *this;
    for (auto& [e, c] : r.t_) c = -c;
    return r;
}

LaurentElement LaurentElement::operator-(const LaurentElement& o) const { return *this + (-o); }

LaurentElement LaurentElement::scale(const Scalar& c) const {
    if (!c.field()->equals(*K_.scalars)) throw FieldMismatch("scale coefficient field mismatch");
    if (c.is_zero()) return zero(K_);
    LaurentElement r = *this;
    for (auto& [e, v] : r.t_) v = v * c;
    return r;
}

LaurentElement LaurentElement::mul_monomial(const Scalar& c, const Expvec& e) const {
    if (static_cast<int>(e.size()) != K_.dim()) throw DomainError("exponent length mismatch");
    if (c.is_zero()) return zero(K_);
    LaurentElement r;
    r.K_ = K_;
    for (const auto& [f, v] : t_) r.t_.emplace(expvec_add(f, e), v * c);
    r.w_ = w_;
    if (!w_.exact)
        for (int i = 0; i < K_.dim(); ++i) {
            r.w_.lo[i] = clamp_edge(sat_add(w_.lo[i], e[i]));
            r.w_.hi[i] = clamp_edge(sat_add(hi_up(w_.hi[i]), e[i]));
        }
    return r;
}

LaurentElement LaurentElement::operator*(const LaurentElement& o) const {
    if (K_ != o.K_)
        throw FieldMismatch("towers differ: " + K_.to_string() + " vs " + o.K_.to_string());
    if (is_zero() || o.is_zero()) return zero(K_);
    LaurentElement r;
    r.K_ = K_;
    bool ex = w_.exact && o.w_.exact;
    int n = K_.dim();
    if (!ex) {
        auto a = op_info(*this), b = op_info(o);
        Window w;
        w.exact = false;
        w.lo.resize(static_cast<std::size_t>(n));
        w.hi.resize(static_cast<std::size_t>(n));
        w.supp.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            // contamination from the unknown-above region of one factor is
            // blocked by the other factor's support bound
            std::int64_t capA = a[i].hi >= PINF ? PINF : (b[i].hasSB ? sat_add(a[i].hi, b[i].sB) : MINF);
            std::int64_t capB = b[i].hi >= PINF ? PINF : (a[i].hasSB ? sat_add(b[i].hi, a[i].sB) : MINF);
            std::int64_t hi = std::min(capA, capB);
            // contamination from the unknown-below region needs the other
            // factor's support to be bounded above (finite elements)
            std::int64_t lowA =
                a[i].certLow <= MINF ? MINF : (b[i].hasMaxS ? sat_add(a[i].certLow, b[i].maxS) : PINF);
            std::int64_t lowB =
                b[i].certLow <= MINF ? MINF : (a[i].hasMaxS ? sat_add(b[i].certLow, a[i].maxS) : PINF);
            std::int64_t certLow = std::max(lowA, lowB);
            bool hasSB = a[i].hasSB && b[i].hasSB;
            std::int64_t sB = sat_add(a[i].sB, b[i].sB);
            if (window_is_empty_claim(certLow, hi, hasSB))
                throw PrecisionError("product has no certified window on " +
                                     K_.vars[static_cast<std::size_t>(i)] +
                                     " (missing support bound)");
            w.supp[static_cast<std::size_t>(i)] = hasSB ? 1 : 0;
            w.lo[i] = clamp_edge(hasSB ? sB : certLow);
            w.hi[i] = clamp_edge(hi);
        }
        r.w_ = std::move(w);
    }
    for (const auto& [e1, c1] : t_)
        for (const auto& [e2, c2] : o.t_) {
            Expvec e = expvec_add(e1, e2);
            if (!r.w_.exact) {
                bool inside = true;
                for (std::size_t i = 0; i < e.size(); ++i)
                    if (e[i] > r.w_.hi[i]) {
                        inside = false;
                        break;
                    }
                if (!inside) continue;
            }
            r.insert_term(std::move(e), c1 * c2);
        }
    r.drop_outside_box();
    return r;
}

LaurentElement LaurentElement::pow_int(long long k, const Window& target) const {
    if (k < 0) return invert(target).pow_int(-k, target);
    LaurentElement acc = one(K_);
    for (long long i = 0; i < k; ++i) {
        acc = acc * *this;
        if (!acc.is_exact() && !target.exact) acc = acc.truncate(target);
    }
    return acc;
}

LaurentElement LaurentElement::invert(const Window& target) const {
    if (t_.empty()) {
        if (w_.exact) throw DomainError("division by zero");
        throw PrecisionError("cannot invert: no terms inside the certified window");
    }
    int n = K_.dim();
    const Expvec& m = t_.begin()->first; // lex-lowest stored term
    Scalar cm = t_.begin()->second;

    // exact monomial: exact inverse, target irrelevant
    if (w_.exact && t_.size() == 1)
        return monomial(K_, cm.inv(), expvec_neg(m));

    // componentwise minimum of the stored support
    Expvec minv = m;
    for (const auto& [e, c] : t_)
        for (int i = 0; i < n; ++i) minv[i] = std::min(minv[i], e[i]);

    if (!w_.exact) {
        for (int i = 0; i < n; ++i)
            if (!w_.supp[static_cast<std::size_t>(i)])
                throw PrecisionError("cannot certify the lowest term: no support bound on " +
                                     K_.vars[static_cast<std::size_t>(i)]);
        // in one variable the cells below the lowest stored term are certified
        // zeros; beyond that the lowest term must sit at the support corner,
        // else an uncertified cell could be lex-below it
        if (n > 1 && m != minv)
            throw PrecisionError("window too small to certify the lowest term");
    }

    if (target.exact) throw DomainError("inversion of a non-monomial needs a finite target window");

    // x = cm * t^m * (1 + r); accumulate sum of (-r)^j
    std::map<Expvec, Scalar, LexLess> rneg;
    Scalar icm = cm.inv();
    for (auto it = std::next(t_.begin()); it != t_.end(); ++it)
        rneg.emplace(expvec_sub(it->first, m), -(it->second * icm));

    // coordinates where some term of r has its leading (first nonzero) entry;
    // only these demand a finite height from the target
    std::vector<char> has_level(static_cast<std::size_t>(n), 0);
    for (const auto& kv : rneg)
        for (int i = 0; i < n; ++i)
            if (kv.first[i] != 0) {
                has_level[static_cast<std::size_t>(i)] = 1;
                break;
            }
    for (int i = 0; i < n; ++i)
        if (has_level[static_cast<std::size_t>(i)] && w_.exact && target.hi[i] >= Window::INF)
            throw DomainError("inversion target window must be finite on " +
                              K_.vars[static_cast<std::size_t>(i)]);

    // needed height of the sum, in shifted coordinates
    std::vector<std::int64_t> H(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        std::int64_t h = sat_add(hi_up(target.hi[i]), m[i]);
        if (!w_.exact) h = std::min(h, sat_add(hi_up(w_.hi[i]), -m[i]));
        H[static_cast<std::size_t>(i)] = h;
    }

    // iteration bound: every term of r is lex-positive, so coordinates before
    // its first positive entry vanish; c bounds how far one factor can push a
    // later coordinate down
    std::int64_t c = 0;
    std::vector<char> cone(static_cast<std::size_t>(n), 1);
    for (const auto& kv : rneg) {
        const Expvec& v = kv.first;
        for (int i = 0; i < n; ++i)
            if (v[i] < 0) {
                c = std::max<std::int64_t>(c, -v[i]);
                cone[static_cast<std::size_t>(i)] = 0;
            }
    }
    std::int64_t jstar = 0;
    for (int i = 0; i < n; ++i) {
        if (!has_level[static_cast<std::size_t>(i)]) continue;
        std::int64_t ki = std::max<std::int64_t>(0, sat_add(H[static_cast<std::size_t>(i)], c * jstar));
        if (ki >= PINF) throw PrecisionError("inversion does not terminate within the window");
        jstar += ki;
        if (jstar > 200000) throw PrecisionError("inversion iteration bound is impractically large");
    }

    auto mul_capped = [n](const std::map<Expvec, Scalar, LexLess>& A,
                          const std::map<Expvec, Scalar, LexLess>& B,
                          const std::vector<std::int64_t>& cap) {
        std::map<Expvec, Scalar, LexLess> out;
        for (const auto& [e1, c1] : A)
            for (const auto& [e2, c2] : B) {
                Expvec e = expvec_add(e1, e2);
                bool ok = true;
                for (int i = 0; i < n; ++i)
                    if (e[i] > cap[static_cast<std::size_t>(i)]) {
                        ok = false;
                        break;
                    }
                if (!ok) continue;
                Scalar v = c1 * c2;
                auto it = out.find(e);
                if (it == out.end()) {
                    if (!v.is_zero()) out.emplace(std::move(e), std::move(v));
                } else {
                    it->second = it->second + v;
                    if (it->second.is_zero()) out.erase(it);
                }
            }
        return out;
    };

    std::map<Expvec, Scalar, LexLess> acc, p;
    Expvec zerov(static_cast<std::size_t>(n), 0);
    acc.emplace(zerov, Scalar::one(K_.scalars));
    p = acc;
    std::vector<std::int64_t> cap(static_cast<std::size_t>(n));
    for (std::int64_t j = 1; j <= jstar; ++j) {
        // terms above H_i + c*(jstar - j) can never fall back under H_i
        for (int i = 0; i < n; ++i)
            cap[static_cast<std::size_t>(i)] = sat_add(H[static_cast<std::size_t>(i)], c * (jstar - j));
        p = mul_capped(p, rneg, cap);
        if (p.empty()) break;
        for (const auto& [e, v] : p) {
            bool keep = true;
            for (int i = 0; i < n; ++i)
                if (e[i] > H[static_cast<std::size_t>(i)]) {
                    keep = false;
                    break;
                }
            if (!keep) continue;
            auto it = acc.find(e);
            if (it == acc.end())
                acc.emplace(e, v);
            else {
                it->second = it->second + v;
                if (it->second.is_zero()) acc.erase(it);
            }
        }
    }

    LaurentElement r;
    r.K_ = K_;
    Window w;
    w.exact = false;
    w.lo.resize(static_cast<std::size_t>(n));
    w.hi.resize(static_cast<std::size_t>(n));
    w.supp.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        std::int64_t hi = target.hi[i];
        if (!w_.exact) hi = std::min<std::int64_t>(hi, sat_add(hi_up(w_.hi[i]), -2 * m[i]));
        w.hi[i] = clamp_edge(hi);
        bool s = !w_.exact || cone[static_cast<std::size_t>(i)];
        w.supp[static_cast<std::size_t>(i)] = s ? 1 : 0;
        w.lo[i] = s ? clamp_edge(-static_cast<std::int64_t>(m[i]))
                    : clamp_edge(std::min<std::int64_t>(target.lo[i], -m[i] - c * jstar));
    }
    r.w_ = std::move(w);
    for (const auto& [e, v] : acc) r.t_.emplace(expvec_sub(e, m), v * icm);
    r.drop_outside_box();
    return r;
}

LaurentElement LaurentElement::derive(const std::string& var) const {
    int i = K_.var_index(var);
    if (i < 0) {
        if (!K_.scalars->has_function_var(var) && !(K_.scalars->kind() == ScalarField::Kind::Extension &&
                                                    K_.scalars->base()->has_function_var(var)))
            throw DomainError("unknown variable " + var + " in " + K_.to_string());
        LaurentElement r;
        r.K_ = K_;
        r.w_ = w_;
        for (const auto& [e, c] : t_) {
            Scalar d = c.derive(var);
            if (!d.is_zero()) r.t_.emplace(e, std::move(d));
        }
        return r;
    }
    LaurentElement r;
    r.K_ = K_;
    r.w_ = w_;
    if (!w_.exact) {
        r.w_.lo[i] = clamp_edge(sat_add(w_.lo[i], -1));
        r.w_.hi[i] = clamp_edge(sat_add(hi_up(w_.hi[i]), -1));
    }
    for (const auto& [e, c] : t_) {
        if (e[i] == 0) continue;
        Scalar d = c * Scalar::of_int(K_.scalars, e[i]); // vanishes when char divides e_i
        if (d.is_zero()) continue;
        Expvec f = e;
        f[static_cast<std::size_t>(i)] -= 1;
        r.t_.emplace(std::move(f), std::move(d));
    }
    return r;
}

bool LaurentElement::is_certified_at(const Expvec& e) const {
    if (w_.exact) return true;
    for (std::size_t i = 0; i < e.size(); ++i) {
        if (e[i] > w_.hi[i]) return false;
        if (e[i] < w_.lo[i] && !w_.supp[i]) return false;
    }
    return true;
}

Scalar LaurentElement::coeff_at(const Expvec& e) const {
    if (static_cast<int>(e.size()) != K_.dim()) throw DomainError("exponent length mismatch");
    if (!is_certified_at(e))
        throw PrecisionError("coefficient at an uncertified exponent; widen the window");
    auto it = t_.find(e);
    return it == t_.end() ? Scalar::zero(K_.scalars) : it->second;
}

LaurentElement LaurentElement::truncate(const Window& w) const {
    if (w.exact) return *this;
    if (static_cast<int>(w.hi.size()) != K_.dim()) throw DomainError("window shape mismatch");
    LaurentElement r = *this;
    if (w_.exact) {
        Window nw;
        nw.exact = false;
        nw.lo = w.lo;
        nw.hi = w.hi;
        nw.supp.assign(static_cast<std::size_t>(K_.dim()), 1);
        for (const auto& [e, c] : t_)
            for (int i = 0; i < K_.dim(); ++i) nw.lo[i] = std::min(nw.lo[i], e[i]);
        r.w_ = std::move(nw);
    } else {
        for (int i = 0; i < K_.dim(); ++i) {
            r.w_.hi[i] = std::min(r.w_.hi[i], w.hi[i]);
            if (!r.w_.supp[static_cast<std::size_t>(i)]) r.w_.lo[i] = std::max(r.w_.lo[i], w.lo[i]);
        }
    }
    r.drop_outside_box();
    return r;
}

std::pair<Expvec, Scalar> LaurentElement::lowest_term() const {
    if (t_.empty()) {
        if (w_.exact) throw DomainError("zero has no lowest term");
        throw PrecisionError("no terms inside the certified window");
    }
    const Expvec& m = t_.begin()->first;
    if (!w_.exact) {
        int n = K_.dim();
        for (int i = 0; i < n; ++i)
            if (!w_.supp[static_cast<std::size_t>(i)])
                throw PrecisionError("cannot certify the lowest term: no support bound on " +
                                     K_.vars[static_cast<std::size_t>(i)]);
        if (n > 1) {
            Expvec minv = m;
            for (const auto& [e, c] : t_)
                for (int i = 0; i < n; ++i) minv[i] = std::min(minv[i], e[i]);
            if (m != minv) throw PrecisionError("window too small to certify the lowest term");
        }
    }
    return {m, t_.begin()->second};
}

std::string LaurentElement::to_string() const {
    std::ostringstream os;
    bool first = true;
    for (const auto& [e, c] : t_) {
        std::string mono;
        for (std::size_t i = 0; i < e.size(); ++i) {
            if (e[i] == 0) continue;
            if (!mono.empty()) mono += "*";
            mono += K_.vars[i];
            if (e[i] != 1) mono += "^" + std::to_string(e[i]);
        }
        std::string cs = c.to_string();
        bool composite = false;
        for (std::size_t i = 0; i < cs.size(); ++i)
            if (cs[i] == '+' || cs[i] == '*' || cs[i] == '/' || cs[i] == ' ' ||
                (cs[i] == '-' && i > 0)) {
                composite = true;
                break;
            }
        if (!first) os << " + ";
        first = false;
        if (mono.empty())
            os << (composite ? "(" + cs + ")" : cs);
        else if (cs == "1")
            os << mono;
        else if (cs == "-1")
            os << "-" << mono;
        else
            os << (composite ? "(" + cs + ")" : cs) << "*" << mono;
    }
    if (!w_.exact) {
        if (!first) os << " + ";
        os << w_.to_string(K_.vars);
        first = false;
    }
    if (first) os << "0";
    return os.str();
}

bool agree_on_window(const LaurentElement& x, const LaurentElement& y, const Window& w) {
    if (x.tlf() != y.tlf()) throw FieldMismatch("towers differ");
    if (w.exact) {
        if (!x.is_exact() || !y.is_exact())
            throw PrecisionError("EXACT comparison of windowed elements");
        return x.terms() == y.terms();
    }
    auto covered = [&w](const LaurentElement& z) {
        if (z.is_exact()) return true;
        const Window& v = z.window();
        for (std::size_t i = 0; i < w.hi.size(); ++i) {
            if (w.hi[i] > v.hi[i]) return false;
            if (w.lo[i] < v.lo[i] && !v.supp[i]) return false;
        }
        return true;
    };
    if (!covered(x) || !covered(y))
        throw PrecisionError("comparison window exceeds certified precision");
    auto inside = [&w](const Expvec& e) {
        for (std::size_t i = 0; i < e.size(); ++i)
            if (e[i] < w.lo[i] || e[i] > w.hi[i]) return false;
        return true;
    };
    for (const auto& [e, c] : x.terms()) {
        if (!inside(e)) continue;
        auto it = y.terms().find(e);
        if (it == y.terms().end() || !(it->second == c)) return false;
    }
    for (const auto& [e, c] : y.terms()) {
        if (!inside(e)) continue;
        if (x.terms().find(e) == x.terms().end()) return false;
    }
    return true;
}

// -------------------------------------------------------------------- steps

MorphismStep MorphismStep::laurent(const TlfDescriptor& src, const std::string& u) {
    MorphismStep s;
    s.kind = Kind::Laurent;
    s.source = src;
    s.var = u;
    std::vector<std::string> vars;
    vars.push_back(u);
    for (const auto& v : src.vars) vars.push_back(v);
    s.target = TlfDescriptor::make(src.scalars, std::move(vars)); // validates freshness
    return s;
}

MorphismStep MorphismStep::kummer(const TlfDescriptor& src, const std::string& t,
                                  const std::string& u, int e, LaurentElement g) {
    if (e < 1) throw DomainError("ramification exponent must be >= 1");
    int pos = src.var_index(t);
    if (pos < 0) throw DomainError("unknown Laurent variable " + t);
    if (u != t && (src.has_var(u) || src.scalars->has_function_var(u)))
        throw DomainError("target variable " + u + " is not fresh");
    std::vector<std::string> vars = src.vars;
    vars[static_cast<std::size_t>(pos)] = u;
    TlfDescriptor tgt = TlfDescriptor::make(src.scalars, std::move(vars));
    if (g.tlf() != tgt)
        throw FieldMismatch("unit series must live over " + tgt.to_string());
    // g must be a unit series in u alone: exponents >= 0, g(0) invertible
    for (const auto& [ev, c] : g.terms())
        for (int i = 0; i < tgt.dim(); ++i) {
            if (i == pos ? ev[i] < 0 : ev[i] != 0)
                throw DomainError("unit series must be supported in nonnegative powers of " + u);
        }
    if (!g.is_exact()) {
        const Window& w = g.window();
        for (int i = 0; i < tgt.dim(); ++i)
            if (!w.supp[static_cast<std::size_t>(i)])
                throw PrecisionError("unit series needs support bounds to be raised to powers");
    }
    Expvec zero(static_cast<std::size_t>(tgt.dim()), 0);
    if (g.coeff_at(zero).is_zero()) throw DomainError("unit series vanishes at the origin");
    MorphismStep s;
    s.kind = Kind::Kummer;
    s.source = src;
    s.target = std::move(tgt);
    s.var = t;
    s.target_var = u;
    s.e = e;
    s.g = std::move(g);
    return s;
}

MorphismStep MorphismStep::constfield(const TlfDescriptor& src, const std::string& gen,
                                      std::vector<Scalar> minpoly) {
    for (const auto& v : src.vars)
        if (v == gen) throw DomainError("generator name collides with Laurent variable " + v);
    FieldPtr ext = ScalarField::extension(src.scalars, gen, std::move(minpoly));
    MorphismStep s;
    s.kind = Kind::ConstField;
    s.source = src;
    s.target = TlfDescriptor::make(ext, src.vars);
    s.var = gen;
    return s;
}

LaurentElement apply_step(const LaurentElement& x, const MorphismStep& s, const Window& target) {
    if (x.tlf() != s.source)
        throw FieldMismatch("element lives over " + x.tlf().to_string() + ", step starts at " +
                            s.source.to_string());
    switch (s.kind) {
    case MorphismStep::Kind::Laurent: {
        std::map<Expvec, Scalar, LexLess> terms;
        for (const auto& [e, c] : x.terms()) {
            Expvec f;
            f.reserve(e.size() + 1);
            f.push_back(0);
            f.insert(f.end(), e.begin(), e.end());
            terms.emplace(std::move(f), c);
        }
        Window w = x.window();
        if (!w.exact) {
            w.lo.insert(w.lo.begin(), 0);
            w.hi.insert(w.hi.begin(), Window::INF);
            w.supp.insert(w.supp.begin(), 1);
        }
        return LaurentElement::from_terms(s.target, std::move(terms), std::move(w));
    }
    case MorphismStep::Kind::ConstField: {
        std::map<Expvec, Scalar, LexLess> terms;
        for (const auto& [e, c] : x.terms())
            terms.emplace(e, Scalar::lift(s.target.scalars, c));
        return LaurentElement::from_terms(s.target, std::move(terms), x.window());
    }
    case MorphismStep::Kind::Kummer: {
        int pos = s.source.var_index(s.var);
        int n = s.source.dim();
        // slice x by the exponent of t, map t^a -> u^{e a} g^a
        std::map<std::int32_t, std::map<Expvec, Scalar, LexLess>> smaps;
        for (const auto& [ev, c] : x.terms()) {
            Expvec f = ev;
            std::int32_t a = f[static_cast<std::size_t>(pos)];
            f[static_cast<std::size_t>(pos)] = 0;
            smaps[a].emplace(std::move(f), c);
        }
        Window slice_w = x.window();
        if (!slice_w.exact) {
            slice_w.lo[pos] = 0;
            slice_w.hi[pos] = Window::INF;
            slice_w.supp[static_cast<std::size_t>(pos)] = 1;
        }
        LaurentElement out = LaurentElement::zero(s.target);
        bool first = true;
        for (auto& [a, smap] : smaps) {
            LaurentElement part = LaurentElement::from_terms(s.target, std::move(smap), slice_w);
            // window for the needed power of g in this slice
            Window wa = target;
            if (!wa.exact) {
                wa.hi[pos] = clamp_edge(sat_add(hi_up(target.hi[pos]),
                                                -static_cast<std::int64_t>(s.e) * a));
                wa.lo[pos] = std::min(wa.lo[pos], 0);
            } else if (a < 0 && !(s.g.is_exact() && s.g.terms().size() == 1)) {
                throw DomainError("negative ramified exponent needs a finite target window");
            }
            LaurentElement ga = s.g.pow_int(a, wa);
            Expvec sh(static_cast<std::size_t>(n), 0);
            sh[static_cast<std::size_t>(pos)] = s.e * a;
            LaurentElement piece = part * ga.mul_monomial(Scalar::one(s.target.scalars), sh);
            out = first ? piece : out + piece;
            first = false;
        }
        if (first) {
            // no stored terms: the image is zero on the mapped window
            Window w = x.window();
            if (!w.exact) {
                Window wt = w;
                wt.lo[pos] = clamp_edge(static_cast<std::int64_t>(s.e) * w.lo[pos]);
                wt.hi[pos] = clamp_edge(w.hi[pos] >= Window::INF
                                            ? PINF
                                            : static_cast<std::int64_t>(s.e) * hi_up(w.hi[pos]) + s.e - 1);
                return LaurentElement::from_terms(s.target, {}, std::move(wt));
            }
            return LaurentElement::zero(s.target);
        }
        // slices above the source window are unknown; they only reach
        // u-exponents >= e*(hi_t + 1), so cap the image there
        if (!x.is_exact()) {
            std::int64_t cap = static_cast<std::int64_t>(s.e) * hi_up(x.window().hi[pos]) + s.e - 1;
            if (out.is_exact() || hi_up(out.window().hi[pos]) > cap) {
                Window w = out.is_exact()
                               ? Window::box(Expvec(static_cast<std::size_t>(n), -Window::INF),
                                             Expvec(static_cast<std::size_t>(n), Window::INF))
                               : out.window();
                if (out.is_exact())
                    for (int i = 0; i < n; ++i) w.supp[static_cast<std::size_t>(i)] = 1;
                w.hi[pos] = clamp_edge(cap);
                out = out.truncate(w);
            }
        }
        return out;
    }
    }
    throw Error("unreachable");
}

LaurentElement apply_tower(const LaurentElement& x, const std::vector<MorphismStep>& steps,
                           const Window& target) {
    LaurentElement cur = x;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (i + 1 == steps.size()) {
            cur = apply_step(cur, steps[i], target);
            break;
        }
        // generous interior request; the final step narrows to the target
        std::int32_t budget = 8;
        if (!target.exact)
            for (std::size_t k = 0; k < target.hi.size(); ++k)
                if (target.hi[k] < Window::INF)
                    budget = std::max(budget, static_cast<std::int32_t>(std::abs(target.hi[k]) + 8));
        int dn = steps[i].target.dim();
        Window wi = Window::box(Expvec(static_cast<std::size_t>(dn), -budget),
                                Expvec(static_cast<std::size_t>(dn), budget));
        cur = apply_step(cur, steps[i], wi);
    }
    return cur;
}

// ---------------------------------------------------------------- expansion

namespace {

Poly poly_drop_coord(const Poly& a, int v) {
    Poly r;
    r.nvars = a.nvars - 1;
    for (const auto& [e, c] : a.t) {
        Expvec f;
        f.reserve(e.size() - 1);
        for (std::size_t i = 0; i < e.size(); ++i)
            if (static_cast<int>(i) != v) f.push_back(e[i]);
        r.t.emplace(std::move(f), c);
    }
    return r;
}

Scalar scalar_over(const FieldPtr& f, const Poly& num) {
    if (f->kind() == ScalarField::Kind::RationalFunctions) {
        int n = static_cast<int>(f->vars().size());
        return Scalar::of_ratfunc(f, num, poly_const(n, Rational(1), f->p()));
    }
    Rational c = num.is_zero() ? Rational(0) : num.t.begin()->second;
    return Scalar::of_rational(f, c);
}

} // namespace

TlfDescriptor expansion_target(const FieldPtr& f, const std::string& var) {
    if (f->kind() != ScalarField::Kind::RationalFunctions || !f->has_function_var(var))
        throw DomainError(var + " is not a function variable of " + f->to_string());
    std::vector<std::string> rest;
    for (const auto& v : f->vars())
        if (v != var) rest.push_back(v);
    FieldPtr coeff = rest.empty() ? f->base() : ScalarField::rational_functions(f->base(), rest);
    return TlfDescriptor::make(coeff, {var});
}

LaurentElement expand_rational(const Scalar& a, const std::string& var, std::int32_t hi) {
    const FieldPtr& f = a.field();
    TlfDescriptor T = expansion_target(f, var);
    int v = -1;
    for (std::size_t i = 0; i < f->vars().size(); ++i)
        if (f->vars()[i] == var) v = static_cast<int>(i);
    if (a.is_zero()) return LaurentElement::zero(T);

    auto build = [&](const Poly& poly) {
        std::map<Expvec, Scalar, LexLess> terms;
        for (const auto& [k, coeff] : poly_split_by_var(poly, v)) {
            Scalar c = scalar_over(T.scalars, poly_drop_coord(coeff, v));
            if (!c.is_zero()) terms.emplace(Expvec{k}, std::move(c));
        }
        return LaurentElement::from_terms(T, std::move(terms), Window::exact_marker());
    };
    LaurentElement num = build(a.rf().num);
    LaurentElement den = build(a.rf().den);

    if (den.terms().size() == 1) {
        // pole or unit monomial denominator: the expansion terminates
        return num * den.invert(Window::exact_marker());
    }
    std::int32_t a0 = num.terms().begin()->first[0];
    std::int32_t d0 = den.terms().begin()->first[0];
    std::int32_t need = hi - a0;
    Window wi = Window::box({static_cast<std::int32_t>(-std::abs(d0) - 1)}, {need});
    LaurentElement r = num * den.invert(wi);
    return r.truncate(Window::box({-Window::INF}, {hi}));
}

} // namespace bca
