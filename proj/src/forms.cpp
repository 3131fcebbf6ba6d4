#include "bcakit/forms.hpp"

#include <algorithm>
#include <sstream>

namespace bca {

namespace {

constexpr std::int32_t kResBudget = 12; // default height when a residue of an
                                        // exact form needs an infinite series
constexpr std::int64_t kPinf = std::int64_t(1) << 40;

std::int64_t floor_div(std::int64_t a, std::int64_t b) { // b > 0
    return a >= 0 ? a / b : -((-a + b - 1) / b);
}

std::vector<std::string> dirs_of(const TlfDescriptor& K) { return K.all_dirs(); }

int dir_index(const TlfDescriptor& K, const std::string& name) {
    auto d = dirs_of(K);
    for (std::size_t i = 0; i < d.size(); ++i)
        if (d[i] == name) return static_cast<int>(i);
    return -1;
}

bool key_valid(const DirKey& k, int ndirs) {
    for (std::size_t i = 0; i < k.size(); ++i) {
        if (k[i] < 0 || k[i] >= ndirs) return false;
        if (i && k[i - 1] >= k[i]) return false;
    }
    return true;
}

// sign of merging two disjoint sorted keys: (-1)^{inversions}
int merge_sign(const DirKey& a, const DirKey& b, DirKey& out) {
    out.clear();
    out.reserve(a.size() + b.size());
    int inv = 0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j]) {
            out.push_back(a[i++]);
        } else {
            // every remaining member of a jumps over b[j]
            inv += static_cast<int>(a.size() - i);
            out.push_back(b[j++]);
        }
    }
    while (i < a.size()) out.push_back(a[i++]);
    while (j < b.size()) out.push_back(b[j++]);
    return (inv % 2) ? -1 : 1;
}

} // namespace

// --------------------------------------------------------------------- form

Form Form::zero(const TlfDescriptor& K, int degree) {
    int top = static_cast<int>(K.all_dirs().size());
    if (degree < 0 || degree > top)
        throw DomainError("form degree outside [0, " + std::to_string(top) + "]");
    Form f;
    f.K_ = K;
    f.q_ = degree;
    return f;
}

Form Form::of_element(LaurentElement x) {
    Form f;
    f.K_ = x.tlf();
    f.q_ = 0;
    if (!x.is_zero()) f.c_.emplace(DirKey{}, std::move(x));
    return f;
}

Form Form::d_basis(const TlfDescriptor& K, const std::string& dir) {
    int i = dir_index(K, dir);
    if (i < 0) throw DomainError("unknown direction " + dir + " in " + K.to_string());
    Form f;
    f.K_ = K;
    f.q_ = 1;
    f.c_.emplace(DirKey{i}, LaurentElement::one(K));
    return f;
}

Form Form::from_components(const TlfDescriptor& K, int degree,
                           std::map<DirKey, LaurentElement> comps) {
    Form f = zero(K, degree);
    int nd = static_cast<int>(K.all_dirs().size());
    for (auto& [k, x] : comps) {
        if (static_cast<int>(k.size()) != degree || !key_valid(k, nd))
            throw DomainError("component key is not a sorted degree-" + std::to_string(degree) +
                              " direction subset");
        if (x.tlf() != K) throw FieldMismatch("component lives over a different tower");
        if (!x.is_zero()) f.c_.emplace(k, std::move(x));
    }
    return f;
}

LaurentElement Form::component(const DirKey& k) const {
    auto it = c_.find(k);
    return it == c_.end() ? LaurentElement::zero(K_) : it->second;
}

bool Form::is_zero() const {
    for (const auto& [k, x] : c_)
        if (!x.is_zero()) return false;
    return true;
}

void Form::put(DirKey k, LaurentElement x) {
    auto it = c_.find(k);
    if (it == c_.end()) {
        if (!x.is_zero()) c_.emplace(std::move(k), std::move(x));
        return;
    }
    it->second = it->second + x;
    if (it->second.is_zero()) c_.erase(it);
}

Form Form::operator+(const Form& o) const {
    if (K_ != o.K_) throw FieldMismatch("forms live over different towers");
    if (c_.empty()) return o;
    if (o.c_.empty()) return *this;
    if (q_ != o.q_) throw DomainError("cannot add forms of different degree");
    Form r = *this;
    for (const auto& [k, x] : o.c_) r.put(k, x);
    return r;
}

Form Form::operator-() const {
    Form r = *this;
    for (auto& [k, x] : r.c_) x = -x;
    return r;
}

Form Form::operator-(const Form& o) const { return *this + (-o); }

Form Form::scale(const LaurentElement& x) const {
    Form r = zero(K_, q_);
    for (const auto& [k, y] : c_) r.put(k, y * x);
    return r;
}

Form Form::scale_scalar(const Scalar& c) const {
    Form r = zero(K_, q_);
    for (const auto& [k, y] : c_) r.put(k, y.scale(c));
    return r;
}

bool Form::operator==(const Form& o) const {
    if (K_ != o.K_) return false;
    if (c_.empty() && o.c_.empty()) return true; // degree-agnostic zeros
    return q_ == o.q_ && c_ == o.c_;
}

std::string Form::to_string() const {
    if (c_.empty()) return "0";
    auto dirs = dirs_of(K_);
    std::ostringstream os;
    bool first = true;
    for (const auto& [k, x] : c_) {
        if (!first) os << " + ";
        first = false;
        if (k.empty()) {
            os << x.to_string();
            continue;
        }
        os << "(" << x.to_string() << ")*";
        for (std::size_t i = 0; i < k.size(); ++i) {
            if (i) os << "^";
            os << "d" << dirs[static_cast<std::size_t>(k[i])];
        }
    }
    return os.str();
}

// --------------------------------------------------------------- derivation

Derivation Derivation::zero(const TlfDescriptor& K) {
    Derivation d;
    d.K_ = K;
    return d;
}

Derivation Derivation::along(const TlfDescriptor& K, const std::string& dir) {
    return along(K, dir, LaurentElement::one(K));
}

Derivation Derivation::along(const TlfDescriptor& K, const std::string& dir, LaurentElement coeff) {
    if (dir_index(K, dir) < 0) throw DomainError("unknown direction " + dir);
    if (coeff.tlf() != K) throw FieldMismatch("derivation coefficient over a different tower");
    Derivation d;
    d.K_ = K;
    if (!coeff.is_zero()) d.a_.emplace(dir, std::move(coeff));
    return d;
}

LaurentElement Derivation::coeff(const std::string& dir) const {
    auto it = a_.find(dir);
    return it == a_.end() ? LaurentElement::zero(K_) : it->second;
}

void Derivation::set_coeff(const std::string& dir, LaurentElement x) {
    if (dir_index(K_, dir) < 0) throw DomainError("unknown direction " + dir);
    if (x.is_zero())
        a_.erase(dir);
    else
        a_.insert_or_assign(dir, std::move(x));
}

Derivation Derivation::scale(const LaurentElement& x) const {
    Derivation d = zero(K_);
    for (const auto& [v, a] : a_) {
        auto p = a * x;
        if (!p.is_zero()) d.a_.emplace(v, std::move(p));
    }
    return d;
}

Derivation Derivation::operator+(const Derivation& o) const {
    if (K_ != o.K_) throw FieldMismatch("derivations over different towers");
    Derivation d = *this;
    for (const auto& [v, a] : o.a_) {
        auto it = d.a_.find(v);
        if (it == d.a_.end()) {
            d.a_.emplace(v, a);
        } else {
            it->second = it->second + a;
            if (it->second.is_zero()) d.a_.erase(it);
        }
    }
    return d;
}

LaurentElement Derivation::apply(const LaurentElement& x) const {
    LaurentElement r = LaurentElement::zero(K_);
    bool first = true;
    for (const auto& [v, a] : a_) {
        auto piece = a * x.derive(v);
        r = first ? piece : r + piece;
        first = false;
    }
    return r;
}

Derivation Derivation::commutator(const Derivation& o) const {
    if (K_ != o.K_) throw FieldMismatch("derivations over different towers");
    Derivation d = zero(K_);
    for (const auto& dir : dirs_of(K_)) {
        auto c = apply(o.coeff(dir)) - o.apply(coeff(dir));
        if (!c.is_zero()) d.a_.emplace(dir, std::move(c));
    }
    return d;
}

// ------------------------------------------------------------------ calculus

Form wedge(const Form& a, const Form& b) {
    if (a.tlf() != b.tlf()) throw FieldMismatch("forms live over different towers");
    int top = a.top_degree();
    int q = std::min(a.degree() + b.degree(), top);
    Form r = Form::zero(a.tlf(), q);
    DirKey merged;
    for (const auto& [ka, xa] : a.components())
        for (const auto& [kb, xb] : b.components()) {
            // skip overlapping keys
            bool overlap = false;
            std::size_t i = 0, j = 0;
            while (i < ka.size() && j < kb.size()) {
                if (ka[i] == kb[j]) {
                    overlap = true;
                    break;
                }
                (ka[i] < kb[j]) ? ++i : ++j;
            }
            if (overlap) continue;
            int sign = merge_sign(ka, kb, merged);
            auto prod = xa * xb;
            if (sign < 0) prod = -prod;
            r.put(merged, std::move(prod));
        }
    return r;
}

Form exterior_d(const Form& a) {
    int top = a.top_degree();
    int q = std::min(a.degree() + 1, top);
    Form r = Form::zero(a.tlf(), q);
    if (a.degree() >= top) return r;
    auto dirs = dirs_of(a.tlf());
    for (const auto& [k, x] : a.components()) {
        for (int v = 0; v < static_cast<int>(dirs.size()); ++v) {
            if (std::binary_search(k.begin(), k.end(), v)) continue;
            auto dx = x.derive(dirs[static_cast<std::size_t>(v)]);
            if (dx.is_zero()) continue;
            // insert dv in front of the members it precedes
            DirKey nk;
            nk.reserve(k.size() + 1);
            int pos = 0;
            for (int m : k)
                if (m < v) ++pos;
            nk.assign(k.begin(), k.end());
            nk.insert(nk.begin() + pos, v);
            if (pos % 2) dx = -dx;
            r.put(std::move(nk), std::move(dx));
        }
    }
    return r;
}

Form contract(const Derivation& d, const Form& a) {
    if (d.tlf() != a.tlf()) throw FieldMismatch("derivation and form over different towers");
    int q = std::max(a.degree() - 1, 0);
    Form r = Form::zero(a.tlf(), q);
    if (a.degree() == 0) return r;
    auto dirs = dirs_of(a.tlf());
    for (const auto& [k, x] : a.components()) {
        for (std::size_t p = 0; p < k.size(); ++p) {
            auto av = d.coeff(dirs[static_cast<std::size_t>(k[p])]);
            if (av.is_zero()) continue;
            auto piece = av * x;
            if (p % 2) piece = -piece;
            DirKey nk;
            nk.reserve(k.size() - 1);
            for (std::size_t m = 0; m < k.size(); ++m)
                if (m != p) nk.push_back(k[m]);
            r.put(std::move(nk), std::move(piece));
        }
    }
    return r;
}

Form lie_derivative(const Derivation& d, const Form& a) {
    // Cartan formula; both corner degrees degenerate to empty zero forms
    return contract(d, exterior_d(a)) + exterior_d(contract(d, a));
}

// ------------------------------------------------------------------ residues

Scalar field_trace(const Scalar& c) {
    const FieldPtr& E = c.field();
    if (E->kind() != ScalarField::Kind::Extension)
        throw ShapeError("field trace needs a monogenic extension");
    int d = E->ext_degree();
    Scalar tr = Scalar::zero(E->base());
    Scalar pw = c;
    for (int i = 0; i < d; ++i) {
        tr = tr + pw.ext().c[static_cast<std::size_t>(i)];
        if (i + 1 < d) pw = pw * Scalar::var(E, E->gen());
    }
    return tr;
}

namespace {

// coefficient of u^{at} in x, as an element over the descriptor without the
// outermost variable
LaurentElement slice_outer_at(const LaurentElement& x, std::int32_t at, const TlfDescriptor& K) {
    if (!x.is_exact()) {
        const Window& w = x.window();
        if (at > w.hi[0] || (at < w.lo[0] && !w.supp[0]))
            throw PrecisionError("residue coefficient is not certified; widen the window");
    }
    std::map<Expvec, Scalar, LexLess> terms;
    for (const auto& [e, c] : x.terms()) {
        if (e[0] != at) continue;
        terms.emplace(Expvec(e.begin() + 1, e.end()), c);
    }
    Window w = x.window();
    if (!w.exact) {
        w.lo.erase(w.lo.begin());
        w.hi.erase(w.hi.begin());
        w.supp.erase(w.supp.begin());
    }
    return LaurentElement::from_terms(K, std::move(terms), std::move(w));
}

// rewrite y over L = F((..u..)) as sum_{j<e} c_j u^j with u^e = t g(u)^{-1};
// the u-slot of each exponent vector becomes the t-exponent of c_j
std::vector<LaurentElement> kummer_reduce(const LaurentElement& y, const MorphismStep& s, int pos,
                                          const TlfDescriptor& Ksrc) {
    const std::int64_t e = s.e;
    const int n = y.tlf().dim();
    bool gmono = s.g.is_exact() && s.g.terms().size() == 1;
    bool exact_out = y.is_exact() && gmono;

    Window w = Window::exact_marker();
    std::int64_t V = kPinf;
    if (!exact_out) {
        if (y.is_exact()) {
            w = Window::supported(Expvec(static_cast<std::size_t>(n), 0),
                                  Expvec(static_cast<std::size_t>(n), Window::INF));
            for (int i = 0; i < n; ++i) {
                std::int32_t lo = Window::INF;
                for (const auto& [ev, c] : y.terms()) lo = std::min(lo, ev[i]);
                w.lo[i] = y.terms().empty() ? 0 : lo;
            }
        } else {
            w = y.window();
        }
        std::int64_t hipos = w.hi[pos] >= Window::INF ? kPinf : w.hi[pos];
        std::int64_t hi_t = hipos >= kPinf ? kResBudget : floor_div(hipos - e + 1, e);
        std::int64_t lo_t = w.supp[static_cast<std::size_t>(pos)]
                                ? floor_div(w.lo[pos], e)
                                : floor_div(w.lo[pos] + e - 1, e);
        V = e * hi_t + e - 1;
        w.lo[pos] = static_cast<std::int32_t>(lo_t);
        w.hi[pos] = static_cast<std::int32_t>(hi_t);
    }

    std::vector<LaurentElement> out;
    if (y.terms().empty()) {
        for (std::int64_t j = 0; j < e; ++j)
            out.push_back(LaurentElement::from_terms(Ksrc, {}, w));
        return out;
    }

    std::int64_t min_a = Window::INF;
    for (const auto& [ev, c] : y.terms()) min_a = std::min<std::int64_t>(min_a, ev[pos]);
    std::int64_t need_i = std::max<std::int64_t>(0, V - min_a);

    // u-exponent -> coefficient tables for g and g^{-1}
    auto table = [pos](const LaurentElement& z) {
        std::map<std::int32_t, Scalar> m;
        for (const auto& [ev, c] : z.terms()) m.emplace(ev[pos], c);
        return m;
    };
    if (!s.g.is_exact() && s.g.window().hi[pos] < need_i)
        throw PrecisionError("unit series precision too small for basis reduction");
    std::map<std::int32_t, Scalar> gmap = table(s.g);
    std::map<std::int32_t, Scalar> igmap;
    if (gmono) {
        igmap.emplace(0, s.g.terms().begin()->second.inv());
    } else if (need_i >= 0) {
        Expvec ilo(static_cast<std::size_t>(n), -Window::INF);
        Expvec ihi(static_cast<std::size_t>(n), Window::INF);
        ihi[static_cast<std::size_t>(pos)] = static_cast<std::int32_t>(need_i + 1);
        ilo[static_cast<std::size_t>(pos)] = 0;
        igmap = table(s.g.invert(Window::box(std::move(ilo), std::move(ihi))));
    }

    std::vector<std::map<Expvec, Scalar, LexLess>> slots(static_cast<std::size_t>(e));
    // Accumulate coefficients per state (exponent vector, t-power) and process
    // states in ascending v = a + e*tq; rewrites keep v fixed only while
    // strictly approaching the terminal band 0 <= a < e, so ordering by
    // (v, band distance desc) sees every contribution before its state pops.
    using StateKey = std::tuple<std::int64_t, std::int64_t, std::int64_t, Expvec>;
    std::map<StateKey, Scalar> pending;
    auto push = [&](Expvec ev, std::int64_t tq, const Scalar& c) {
        std::int64_t a = ev[static_cast<std::size_t>(pos)];
        std::int64_t v = a + e * tq;
        if (v > V || c.is_zero()) return;
        std::int64_t rank = a >= e ? a : (a < 0 ? -a : 0);
        StateKey k{v, -rank, tq, std::move(ev)};
        auto f = pending.find(k);
        if (f == pending.end())
            pending.emplace(std::move(k), c);
        else
            f->second = f->second + c;
    };
    for (const auto& [ev, c] : y.terms()) push(ev, 0, c);
    while (!pending.empty()) {
        auto node = pending.extract(pending.begin());
        const auto& [v, negrank, tq, ev] = node.key();
        Scalar c = std::move(node.mapped());
        if (c.is_zero()) continue;
        std::int64_t a = ev[static_cast<std::size_t>(pos)];
        if (a >= 0 && a < e) {
            Expvec key = ev;
            key[static_cast<std::size_t>(pos)] = static_cast<std::int32_t>(tq);
            auto& slot = slots[static_cast<std::size_t>(a)];
            auto f = slot.find(key);
            if (f == slot.end()) {
                slot.emplace(std::move(key), std::move(c));
            } else {
                f->second = f->second + c;
                if (f->second.is_zero()) slot.erase(f);
            }
            continue;
        }
        // u^a = t g^{-1} u^{a-e}  (a >= e)   |   u^a = t^{-1} g u^{a+e}  (a < 0)
        const auto& tab = a >= e ? igmap : gmap;
        std::int64_t shift = a >= e ? -e : e;
        std::int64_t dq = a >= e ? 1 : -1;
        for (const auto& [i, gc] : tab) {
            Expvec ev2 = ev;
            ev2[static_cast<std::size_t>(pos)] = static_cast<std::int32_t>(a + shift + i);
            push(std::move(ev2), tq + dq, c * gc);
        }
    }
    for (std::int64_t j = 0; j < e; ++j)
        out.push_back(LaurentElement::from_terms(Ksrc, std::move(slots[static_cast<std::size_t>(j)]), w));
    return out;
}

} // namespace

Form res_step_form(const Form& top, const MorphismStep& s) {
    if (top.tlf() != s.target)
        throw FieldMismatch("form lives over " + top.tlf().to_string() + ", step maps into " +
                            s.target.to_string());
    int D = top.top_degree();
    if (!top.components().empty() && top.degree() != D)
        throw DomainError("residue needs a top-degree form");
    DirKey full;
    for (int i = 0; i < D; ++i) full.push_back(i);
    LaurentElement x = top.component(full);

    switch (s.kind) {
    case MorphismStep::Kind::Laurent: {
        LaurentElement a = slice_outer_at(x, -1, s.source);
        DirKey kfull;
        for (int i = 0; i + 1 < D; ++i) kfull.push_back(i);
        std::map<DirKey, LaurentElement> comps;
        if (!a.is_zero()) comps.emplace(std::move(kfull), std::move(a));
        return Form::from_components(s.source, D - 1, std::move(comps));
    }
    case MorphismStep::Kind::ConstField: {
        std::map<Expvec, Scalar, LexLess> terms;
        for (const auto& [e, c] : x.terms()) {
            Scalar tr = field_trace(c);
            if (!tr.is_zero()) terms.emplace(e, std::move(tr));
        }
        LaurentElement a = LaurentElement::from_terms(s.source, std::move(terms), x.window());
        std::map<DirKey, LaurentElement> comps;
        if (!a.is_zero()) comps.emplace(full, std::move(a));
        return Form::from_components(s.source, D, std::move(comps));
    }
    case MorphismStep::Kind::Kummer: {
        int pos = s.target.var_index(s.target_var);
        Scalar e_sc = Scalar::of_int(s.target.scalars, s.e);
        if (e_sc.is_zero())
            throw DomainError("ramification index divisible by the field characteristic");
        // dt = (e u^{e-1} g + u^e g') du
        int n = s.target.dim();
        Expvec em1(static_cast<std::size_t>(n), 0), em(static_cast<std::size_t>(n), 0);
        em1[static_cast<std::size_t>(pos)] = s.e - 1;
        em[static_cast<std::size_t>(pos)] = s.e;
        Scalar one = Scalar::one(s.target.scalars);
        LaurentElement J = s.g.scale(e_sc).mul_monomial(one, em1) +
                           s.g.derive(s.target_var).mul_monomial(one, em);
        Window jw = Window::exact_marker();
        if (!(x.is_exact() && s.g.is_exact() && J.terms().size() == 1)) {
            Expvec jlo(static_cast<std::size_t>(n), -Window::INF);
            Expvec jhi(static_cast<std::size_t>(n), Window::INF);
            std::int64_t xh =
                x.is_exact() || x.window().hi[pos] >= Window::INF
                    ? static_cast<std::int64_t>(s.e) * (kResBudget + 2)
                    : x.window().hi[pos];
            jhi[static_cast<std::size_t>(pos)] = static_cast<std::int32_t>(xh + 2 * s.e + 2);
            jlo[static_cast<std::size_t>(pos)] = -static_cast<std::int32_t>(2 * s.e + 2);
            jw = Window::box(std::move(jlo), std::move(jhi));
        }
        LaurentElement y = x * J.invert(jw);
        LaurentElement tr = LaurentElement::zero(s.source);
        for (int i = 0; i < s.e; ++i) {
            LaurentElement yi = y;
            if (i > 0) {
                Expvec sh(static_cast<std::size_t>(n), 0);
                sh[static_cast<std::size_t>(pos)] = i;
                yi = y.mul_monomial(one, sh);
            }
            auto red = kummer_reduce(yi, s, pos, s.source);
            tr = i == 0 ? red[static_cast<std::size_t>(i)] : tr + red[static_cast<std::size_t>(i)];
        }
        std::map<DirKey, LaurentElement> comps;
        if (!tr.is_zero()) comps.emplace(full, std::move(tr));
        return Form::from_components(s.source, D, std::move(comps));
    }
    }
    throw Error("unreachable");
}

Form res_tower_form(const Form& top, const std::vector<MorphismStep>& tower) {
    Form cur = top;
    for (auto it = tower.rbegin(); it != tower.rend(); ++it) cur = res_step_form(cur, *it);
    return cur;
}

} // namespace bca
