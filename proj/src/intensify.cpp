#include "bcakit/intensify.hpp"
#include "bcakit/rng.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace bca {

namespace {

std::int32_t clamp32(std::int64_t v) {
    if (v >= Window::INF) return Window::INF;
    if (v <= -Window::INF) return -Window::INF;
    return static_cast<std::int32_t>(v);
}

} // namespace

Intensification Intensification::make(const TlfDescriptor& K, const std::string& var,
                                      std::int32_t window) {
    TlfDescriptor one = expansion_target(K.scalars, var); // validates var
    std::vector<std::string> vars = K.vars;
    vars.push_back(var);
    Intensification u;
    u.source = K;
    u.target = TlfDescriptor::make(one.scalars, std::move(vars));
    u.var = var;
    u.hi = window;
    return u;
}

LaurentElement intensify_element(const Intensification& u, const LaurentElement& x) {
    if (x.tlf() != u.source)
        throw FieldMismatch("element lives over " + x.tlf().to_string() +
                            ", the intensification starts at " + u.source.to_string());
    const int n = u.source.dim();
    std::map<Expvec, Scalar, LexLess> terms;
    bool all_exact = true, all_supp = true;
    std::int64_t slo = Window::INF;  // min support seen on the promoted slot
    std::int64_t shi = Window::INF;  // min certified top among windowed expansions
    std::int64_t nlo = -static_cast<std::int64_t>(Window::INF); // certified bottom if a support bound is missing
    for (const auto& [e, c] : x.terms()) {
        LaurentElement ex = expand_rational(c, u.var, u.hi);
        if (ex.is_exact()) {
            for (const auto& [j, d] : ex.terms()) slo = std::min<std::int64_t>(slo, j[0]);
        } else {
            all_exact = false;
            const Window& w = ex.window();
            shi = std::min<std::int64_t>(shi, w.hi[0]);
            if (w.supp[0])
                slo = std::min<std::int64_t>(slo, w.lo[0]);
            else {
                all_supp = false;
                nlo = std::max<std::int64_t>(nlo, w.lo[0]);
            }
        }
        for (const auto& [j, d] : ex.terms()) {
            Expvec fe = e;
            fe.push_back(j[0]);
            terms.emplace(std::move(fe), d);
        }
    }
    if (x.is_exact() && all_exact)
        return LaurentElement::from_terms(u.target, std::move(terms), Window::exact_marker());

    Window w;
    w.exact = false;
    w.lo.assign(static_cast<std::size_t>(n) + 1, 0);
    w.hi.assign(static_cast<std::size_t>(n) + 1, 0);
    w.supp.assign(static_cast<std::size_t>(n) + 1, 0);
    for (int i = 0; i < n; ++i) {
        if (x.is_exact()) {
            std::int32_t lo = Window::INF;
            for (const auto& [e, c] : x.terms()) lo = std::min(lo, e[i]);
            if (lo == Window::INF) lo = 0;
            w.lo[static_cast<std::size_t>(i)] = lo;
            w.hi[static_cast<std::size_t>(i)] = Window::INF;
            w.supp[static_cast<std::size_t>(i)] = 1;
        } else {
            w.lo[static_cast<std::size_t>(i)] = x.window().lo[static_cast<std::size_t>(i)];
            w.hi[static_cast<std::size_t>(i)] = x.window().hi[static_cast<std::size_t>(i)];
            w.supp[static_cast<std::size_t>(i)] = x.window().supp[static_cast<std::size_t>(i)];
        }
    }
    w.hi[static_cast<std::size_t>(n)] = all_exact ? Window::INF : clamp32(shi);
    if (all_supp) {
        w.supp[static_cast<std::size_t>(n)] = 1;
        w.lo[static_cast<std::size_t>(n)] = slo == Window::INF ? 0 : clamp32(slo);
    } else {
        w.lo[static_cast<std::size_t>(n)] = clamp32(nlo);
    }
    return LaurentElement::from_terms(u.target, std::move(terms), std::move(w));
}

Form intensify_form(const Intensification& u, const Form& a) {
    if (a.tlf() != u.source)
        throw FieldMismatch("form lives over " + a.tlf().to_string() +
                            ", the intensification starts at " + u.source.to_string());
    auto sd = u.source.all_dirs();
    auto td = u.target.all_dirs();
    std::map<std::string, int> pos;
    for (std::size_t i = 0; i < td.size(); ++i) pos[td[i]] = static_cast<int>(i);
    std::map<DirKey, LaurentElement> comps;
    for (const auto& [k, x] : a.components()) {
        DirKey nk;
        nk.reserve(k.size());
        for (int i : k) nk.push_back(pos.at(sd[static_cast<std::size_t>(i)]));
        // insertion sort, counting transpositions for the wedge sign
        int sign = 1;
        for (std::size_t i = 1; i < nk.size(); ++i)
            for (std::size_t j = i; j > 0 && nk[j - 1] > nk[j]; --j) {
                std::swap(nk[j - 1], nk[j]);
                sign = -sign;
            }
        LaurentElement y = intensify_element(u, x);
        if (sign < 0) y = -y;
        comps.emplace(std::move(nk), std::move(y));
    }
    return Form::from_components(u.target, a.degree(), std::move(comps));
}

ArtinianBca intensify_bca(const Intensification& u, const ArtinianBca& A) {
    if (A.tlf() != u.source)
        throw FieldMismatch("algebra lives over " + A.tlf().to_string() +
                            ", the intensification starts at " + u.source.to_string());
    return ArtinianBca::make(u.target, A.nilp_vars(), A.ideal_gens());
}

BcaElement intensify_bca_element(const Intensification& u, const BcaElement& a) {
    ArtinianBca Ahat = intensify_bca(u, a.algebra());
    std::vector<LaurentElement> c;
    c.reserve(a.coords().size());
    for (const auto& x : a.coords()) c.push_back(intensify_element(u, x));
    return BcaElement::from_coords(Ahat, std::move(c));
}

CoeffField intensify_section(const Intensification& u, const CoeffField& sigma) {
    ArtinianBca Ahat = intensify_bca(u, sigma.algebra());
    std::map<std::string, BcaElement> eps;
    for (const auto& [dir, e] : sigma.eps_all()) eps.emplace(dir, intensify_bca_element(u, e));
    return CoeffField::make(std::move(Ahat), std::move(eps));
}

namespace {

// drops a scalar free of the promoted variable into the smaller field
Scalar lower_scalar(const Intensification& u, const Scalar& c) {
    LaurentElement ex = expand_rational(c, u.var, 0);
    if (!ex.is_exact()) throw DomainError("entry involves the promoted variable " + u.var);
    Expvec z{0};
    for (const auto& [e, d] : ex.terms())
        if (e[0] != 0) throw DomainError("entry involves the promoted variable " + u.var);
    return ex.coeff_at(z);
}

} // namespace

FinLenModule intensify_module(const Intensification& u, const FinLenModule& M) {
    ArtinianBca Ahat = intensify_bca(u, M.algebra());
    std::size_t r = M.algebra().nilp_vars().size();
    int n = M.length();
    std::vector<std::vector<std::vector<Scalar>>> act(r);
    for (std::size_t v = 0; v < r; ++v) {
        act[v].resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                act[v][static_cast<std::size_t>(i)].push_back(
                    lower_scalar(u, M.action(static_cast<int>(v))[static_cast<std::size_t>(i)]
                                                                [static_cast<std::size_t>(j)]));
    }
    return FinLenModule::from_action(std::move(Ahat), std::move(act), M.labels());
}

BcaMorphism intensify_morphism(const Intensification& u, const BcaMorphism& f) {
    if (f.source.tlf() != u.source)
        throw FieldMismatch("morphism source lives over " + f.source.tlf().to_string() +
                            ", the intensification starts at " + u.source.to_string());
    Intensification v = Intensification::make(f.target.tlf(), u.var, u.hi);
    ArtinianBca Ahat = intensify_bca(u, f.source);
    ArtinianBca Bhat = intensify_bca(v, f.target);
    std::vector<MorphismStep> tower;
    TlfDescriptor cur = Ahat.tlf();
    for (const auto& s : f.tower) {
        switch (s.kind) {
        case MorphismStep::Kind::Laurent:
            tower.push_back(MorphismStep::laurent(cur, s.var));
            break;
        case MorphismStep::Kind::Kummer: {
            Intensification w = Intensification::make(s.target, u.var, u.hi);
            LaurentElement gh = intensify_element(w, s.g);
            if (!gh.is_exact())
                throw DomainError("ramification unit series involves the promoted variable");
            for (const auto& [e, c] : gh.terms())
                if (e.back() != 0)
                    throw DomainError("ramification unit series involves the promoted variable");
            tower.push_back(MorphismStep::kummer(cur, s.var, s.target_var, s.e, std::move(gh)));
            break;
        }
        case MorphismStep::Kind::ConstField:
            throw DomainError("constant field steps do not intensify");
        }
        cur = tower.back().target;
    }
    std::vector<BcaElement> ims;
    ims.reserve(f.images.size());
    for (const auto& im : f.images) ims.push_back(intensify_bca_element(v, im));
    return BcaMorphism::make(std::move(Ahat), std::move(Bhat), std::move(tower), std::move(ims));
}

DualElement q_dual(const Intensification& u, const DualElement& phi) {
    FinLenModule Mhat = intensify_module(u, phi.M);
    CoeffField sighat = intensify_section(u, phi.sigma);
    int top = static_cast<int>(u.target.all_dirs().size());
    std::vector<Form> expanded;
    expanded.reserve(phi.values.size());
    for (const auto& f : phi.values) expanded.push_back(intensify_form(u, f));
    // the adapted basis of the promoted module, over the promoted input basis
    const auto& pres = Mhat.basis_in_parent();
    std::vector<Form> vals;
    vals.reserve(static_cast<std::size_t>(Mhat.length()));
    for (int j = 0; j < Mhat.length(); ++j) {
        Form acc = Form::zero(u.target, top);
        for (int i = 0; i < phi.M.length(); ++i) {
            const Scalar& c = pres[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
            if (c.is_zero()) continue;
            acc = acc + expanded[static_cast<std::size_t>(i)].scale_scalar(c);
        }
        vals.push_back(std::move(acc));
    }
    return DualElement::make(std::move(Mhat), std::move(sighat), std::move(vals));
}

// ------------------------------------------------------------------- checks

void CheckReport::push(CheckCase c) {
    ok = ok && c.ok;
    cases.push_back(std::move(c));
}

namespace {

// common comparison box across every windowed ingredient; EXACT if none
struct CmpWindow {
    bool exact = true;
    std::vector<std::int32_t> lo, hi;

    void absorb(const LaurentElement& x, int dim) {
        if (x.is_exact()) return;
        if (exact) {
            exact = false;
            lo.assign(static_cast<std::size_t>(dim), -Window::INF);
            hi.assign(static_cast<std::size_t>(dim), Window::INF);
        }
        const Window& v = x.window();
        for (std::size_t i = 0; i < lo.size(); ++i) {
            hi[i] = std::min(hi[i], v.hi[i]);
            if (!v.supp[i]) lo[i] = std::max(lo[i], v.lo[i]);
        }
    }
    void absorb(const Form& f, int dim) {
        for (const auto& [k, x] : f.components()) absorb(x, dim);
    }
    Window window() const { return exact ? Window::exact_marker() : Window::box(lo, hi); }
    std::string to_string(const std::vector<std::string>& vars) const {
        return window().to_string(vars);
    }
};

bool forms_agree(const Form& a, const Form& b, const Window& w) {
    std::vector<DirKey> keys;
    for (const auto& [k, x] : a.components()) keys.push_back(k);
    for (const auto& [k, x] : b.components())
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
    for (const auto& k : keys)
        if (!agree_on_window(a.component(k), b.component(k), w)) return false;
    return true;
}

std::string render_forms(const std::vector<Form>& vs) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < vs.size(); ++i) {
        if (i) os << "; ";
        os << vs[i].to_string();
    }
    os << "]";
    return os.str();
}

// a random rational coefficient: a small polynomial over the function
// variables, over a denominator chosen to exercise exact and windowed
// expansions of the promoted variable
Scalar rand_scalar(Rng& rng, const FieldPtr& f, const std::string& var) {
    auto fv = f->function_vars();
    Scalar num = Scalar::zero(f);
    int terms = 1 + static_cast<int>(rng.uniform(0, 2));
    for (int t = 0; t < terms; ++t) {
        Scalar m = Scalar::of_int(f, rng.uniform(-4, 4));
        for (const auto& v : fv) {
            long long d = rng.uniform(0, 2);
            for (long long k = 0; k < d; ++k) m = m * Scalar::var(f, v);
        }
        num = num + m;
    }
    if (num.is_zero()) num = Scalar::one(f);
    switch (rng.uniform(0, 3)) {
    case 0: return num / Scalar::var(f, var);                       // pole: exact expansion
    case 1: return num / (Scalar::one(f) + Scalar::var(f, var));    // windowed expansion
    default: return num;                                            // polynomial: exact
    }
}

LaurentElement rand_element(Rng& rng, const TlfDescriptor& K, const std::string& var) {
    std::map<Expvec, Scalar, LexLess> terms;
    int n = 1 + static_cast<int>(rng.uniform(0, 2));
    for (int t = 0; t < n; ++t) {
        Expvec e;
        for (int i = 0; i < K.dim(); ++i) e.push_back(static_cast<std::int32_t>(rng.uniform(-2, 2)));
        terms[e] = rand_scalar(rng, K.scalars, var);
    }
    return LaurentElement::from_terms(K, std::move(terms), Window::exact_marker());
}

DualElement rand_dual(Rng& rng, const FinLenModule& M, const CoeffField& sigma,
                      const std::string& var) {
    const TlfDescriptor& K = M.algebra().tlf();
    Form vol = volume_form(K);
    std::vector<Form> vals;
    for (int i = 0; i < M.length(); ++i) vals.push_back(vol.scale(rand_element(rng, K, var)));
    return DualElement::make(M, sigma, std::move(vals));
}

CheckCase compare_duals(std::string input, const DualElement& lhs, const DualElement& rhs,
                        const TlfDescriptor& Khat) {
    CheckCase c;
    c.input = std::move(input);
    c.lhs = render_forms(lhs.values);
    c.rhs = render_forms(rhs.values);
    CmpWindow cw;
    for (const auto& f : lhs.values) cw.absorb(f, Khat.dim());
    for (const auto& f : rhs.values) cw.absorb(f, Khat.dim());
    c.window = cw.to_string(Khat.vars);
    Window w = cw.window();
    bool ok = lhs.values.size() == rhs.values.size();
    for (std::size_t i = 0; ok && i < lhs.values.size(); ++i)
        ok = forms_agree(lhs.values[i], rhs.values[i], w);
    c.ok = ok;
    return c;
}

} // namespace

CheckReport check_square_psi(const Intensification& u, const CoeffField& sigma,
                             const CoeffField& sigma2, const FinLenModule& M,
                             std::uint64_t seed, int cases, bool inject_failure) {
    CheckReport r;
    r.name = "transport-square";
    CoeffField sig2hat = intensify_section(u, sigma2);
    Rng rng(seed);
    for (int c = 0; c < cases; ++c) {
        DualElement phi = rand_dual(rng, M, sigma, u.var);
        DualElement lhs = psi(sig2hat, q_dual(u, phi));
        DualElement rhs = q_dual(u, psi(sigma2, phi));
        if (inject_failure && !lhs.values.empty()) lhs.values[0] = -lhs.values[0];
        r.push(compare_duals("phi = " + render_forms(phi.values), lhs, rhs, u.target));
    }
    return r;
}

CheckReport check_square_trace(const BcaMorphism& f, const Intensification& u,
                               const CoeffField& sigma, std::uint64_t seed, int cases) {
    CheckReport r;
    r.name = "trace-square";
    Intensification v = Intensification::make(f.target.tlf(), u.var, u.hi);
    BcaMorphism fhat = intensify_morphism(u, f);
    CoeffField sighat = intensify_section(u, sigma);
    FinLenModule regB = FinLenModule::regular(f.target);
    CoeffField canB = CoeffField::canonical(f.target);
    Rng rng(seed);
    for (int c = 0; c < cases; ++c) {
        DualElement phi = rand_dual(rng, regB, canB, u.var);
        DualElement lhs = q_dual(u, trace_map(f, sigma, phi));
        DualElement rhs = trace_map(fhat, sighat, q_dual(v, phi));
        r.push(compare_duals("phi = " + render_forms(phi.values), lhs, rhs, u.target));
    }
    return r;
}

namespace {

// the same element with the exponent slots permuted to another ordering of
// the same Laurent variables
LaurentElement reorder_element(const LaurentElement& x, const TlfDescriptor& to) {
    const TlfDescriptor& from = x.tlf();
    std::vector<int> perm(static_cast<std::size_t>(from.dim()));
    for (int i = 0; i < from.dim(); ++i) {
        int j = to.var_index(from.vars[static_cast<std::size_t>(i)]);
        if (j < 0) throw FieldMismatch("towers do not share their variables");
        perm[static_cast<std::size_t>(i)] = j;
    }
    std::map<Expvec, Scalar, LexLess> terms;
    for (const auto& [e, c] : x.terms()) {
        Expvec ne(e.size());
        for (std::size_t i = 0; i < e.size(); ++i) ne[static_cast<std::size_t>(perm[i])] = e[i];
        terms.emplace(std::move(ne), c);
    }
    Window w = x.window();
    if (!w.exact) {
        Window nw = w;
        for (std::size_t i = 0; i < w.lo.size(); ++i) {
            nw.lo[static_cast<std::size_t>(perm[i])] = w.lo[i];
            nw.hi[static_cast<std::size_t>(perm[i])] = w.hi[i];
            nw.supp[static_cast<std::size_t>(perm[i])] = w.supp[i];
        }
        w = std::move(nw);
    }
    return LaurentElement::from_terms(to, std::move(terms), std::move(w));
}

std::string render_coords(const std::vector<LaurentElement>& c) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (i) os << ", ";
        os << c[i].to_string();
    }
    os << ")";
    return os.str();
}

std::string render_gens(const ArtinianBca& A) {
    std::ostringstream os;
    os << A.to_string() << " basis";
    for (const auto& m : A.basis()) os << " " << A.mono_string(m);
    return os.str();
}

} // namespace

CheckReport check_associativity(const ArtinianBca& A, const CoeffField& sigma,
                                const std::string& var1, const std::string& var2,
                                std::int32_t window, const std::vector<Expvec>& extra_gens) {
    CheckReport r;
    r.name = "promotion-order";

    Intensification u1 = Intensification::make(A.tlf(), var1, window);
    ArtinianBca A1 = intensify_bca(u1, A);
    Intensification u12 = Intensification::make(A1.tlf(), var2, window);
    ArtinianBca A12 = intensify_bca(u12, A1);

    Intensification u2 = Intensification::make(A.tlf(), var2, window);
    ArtinianBca A2 = intensify_bca(u2, A);
    Intensification u21 = Intensification::make(A2.tlf(), var1, window);
    ArtinianBca A21 = intensify_bca(u21, A2);

    {
        CheckCase c;
        c.input = "rebuilt promotion of " + A.to_string();
        ArtinianBca again = intensify_bca(u12, intensify_bca(u1, A));
        c.lhs = render_gens(A12);
        c.rhs = render_gens(again);
        c.window = "EXACT";
        c.ok = A12.equals(again) && A12.tlf() == again.tlf();
        r.push(std::move(c));
    }
    {
        CheckCase c;
        c.input = var1 + " then " + var2 + " against " + var2 + " then " + var1 + ": algebra";
        c.lhs = render_gens(A12);
        c.rhs = render_gens(A21);
        c.window = "EXACT";
        auto sorted = [](std::vector<std::string> v) {
            std::sort(v.begin(), v.end());
            return v;
        };
        c.ok = A12.tlf().scalars->equals(*A21.tlf().scalars) &&
               sorted(A12.tlf().vars) == sorted(A21.tlf().vars) &&
               A12.nilp_vars() == A21.nilp_vars() && A12.ideal_gens() == A21.ideal_gens() &&
               A12.basis() == A21.basis();
        r.push(std::move(c));
    }
    {
        CheckCase c;
        c.input = var1 + " then " + var2 + " against " + var2 + " then " + var1 + ": section";
        CoeffField s12 = intensify_section(u12, intensify_section(u1, sigma));
        CoeffField s21 = intensify_section(u21, intensify_section(u2, sigma));
        bool ok = true;
        CmpWindow cw;
        std::vector<LaurentElement> left, right;
        for (const auto& dir : A12.tlf().all_dirs()) {
            BcaElement e12 = s12.eps(dir);
            BcaElement e21 = s21.eps(dir);
            for (std::size_t i = 0; i < e12.coords().size(); ++i) {
                LaurentElement a = e12.coord(static_cast<int>(i));
                LaurentElement b = reorder_element(e21.coord(static_cast<int>(i)), A12.tlf());
                cw.absorb(a, A12.tlf().dim());
                cw.absorb(b, A12.tlf().dim());
                left.push_back(a);
                right.push_back(b);
            }
        }
        Window w = cw.window();
        for (std::size_t i = 0; ok && i < left.size(); ++i)
            ok = agree_on_window(left[i], right[i], w);
        c.lhs = render_coords(left);
        c.rhs = render_coords(right);
        c.window = cw.to_string(A12.tlf().vars);
        c.ok = ok;
        r.push(std::move(c));
    }
    if (!extra_gens.empty()) {
        CheckCase c;
        c.input = "promotion of the quotient against the quotient of the promotion";
        std::vector<Expvec> gens = A.ideal_gens();
        gens.insert(gens.end(), extra_gens.begin(), extra_gens.end());
        ArtinianBca Aq = ArtinianBca::make(A.tlf(), A.nilp_vars(), gens);
        ArtinianBca lhs = intensify_bca(u1, Aq);
        ArtinianBca rhs = ArtinianBca::make(A1.tlf(), A1.nilp_vars(), gens);
        c.lhs = render_gens(lhs);
        c.rhs = render_gens(rhs);
        c.window = "EXACT";
        c.ok = lhs.equals(rhs) && lhs.tlf() == rhs.tlf();
        r.push(std::move(c));
    }
    return r;
}

} // namespace bca
