#include "bcakit/verify.hpp"

#include "bcakit/render.hpp"
#include "bcakit/rng.hpp"
#include "linalg.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace bca {

namespace {

// ---- shared case plumbing -------------------------------------------------

TlfDescriptor desc_qt() { return TlfDescriptor::make(ScalarField::rationals(), {"t"}); }
TlfDescriptor desc_q2() { return TlfDescriptor::make(ScalarField::rationals(), {"t1", "t2"}); }
TlfDescriptor desc_q0() { return TlfDescriptor::make(ScalarField::rationals(), {}); }
TlfDescriptor desc_qs(const std::vector<std::string>& fn, std::vector<std::string> lv) {
    return TlfDescriptor::make(ScalarField::rational_functions(ScalarField::rationals(), fn),
                               std::move(lv));
}

// the Laurent steps building K from its coefficient field, innermost first
std::vector<MorphismStep> full_tower(const TlfDescriptor& K) {
    std::vector<MorphismStep> steps;
    auto cur = TlfDescriptor::make(K.scalars, {});
    for (int i = K.dim() - 1; i >= 0; --i) {
        steps.push_back(MorphismStep::laurent(cur, K.vars[static_cast<std::size_t>(i)]));
        cur = steps.back().target;
    }
    return steps;
}

std::string dvol_string(const TlfDescriptor& K) {
    std::string out;
    for (const auto& d : K.all_dirs()) {
        if (!out.empty()) out += "^";
        out += "d" + d;
    }
    return out;
}

// sparse exact element: <= max_terms terms, exponents in [-4, 4]
LaurentElement rand_elem(Rng& rng, const TlfDescriptor& K, int max_terms = 6) {
    auto x = LaurentElement::zero(K);
    int nt = static_cast<int>(rng.uniform(1, max_terms));
    for (int i = 0; i < nt; ++i) {
        Expvec e;
        for (int d = 0; d < K.dim(); ++d)
            e.push_back(static_cast<std::int32_t>(rng.uniform(-4, 4)));
        long long c = rng.uniform(-4, 4);
        if (c == 0) c = 1;
        x = x + LaurentElement::monomial(K, Scalar::of_int(K.scalars, c), std::move(e));
    }
    if (x.is_zero()) x = LaurentElement::one(K);
    return x;
}

DiffOp rand_op(Rng& rng, const TlfDescriptor& K, int max_order, int max_terms) {
    auto nd = K.all_dirs().size();
    auto D = DiffOp::zero(K);
    int nt = static_cast<int>(rng.uniform(1, max_terms));
    for (int i = 0; i < nt; ++i) {
        Expvec beta(nd, 0);
        int total = static_cast<int>(rng.uniform(0, max_order));
        for (int o = 0; o < total; ++o)
            beta[static_cast<std::size_t>(rng.uniform(0, static_cast<std::int64_t>(nd) - 1))]++;
        D = D + DiffOp::term(rand_elem(rng, K, 2), beta);
    }
    return D;
}

std::string wrap(const std::string& s) { return "(" + s + ")"; }

void push_size(VerifyCase& c, const std::string& k, int v) { c.size.emplace_back(k, v); }
void push_input(VerifyCase& c, const std::string& k, const std::string& v) {
    c.inputs.emplace_back(k, v);
}
void push_step(VerifyCase& c, const std::string& expr, const std::string& out) {
    c.steps.emplace_back(expr, out);
}

SuiteReport make_report(const std::string& name, std::uint64_t seed, int window) {
    SuiteReport r;
    r.suite = name;
    r.seed = seed;
    r.window = window;
    return r;
}

// ---- residue calculus suites ----------------------------------------------

SuiteReport run_ibp(std::uint64_t seed, int cases, int window) {
    auto rep = make_report("integration-by-parts", seed, window);
    Rng master(seed);
    for (int i = 0; i < cases; ++i) {
        VerifyCase vc;
        vc.seed = master.next();
        Rng rng(vc.seed);
        auto K = (i % 2 == 0) ? desc_qt() : desc_q2();
        auto tower = full_tower(K);
        std::string Ks = K.to_string();
        auto a = rand_elem(rng, K);
        auto c = rand_elem(rng, K);
        auto alpha = volume_form(K).scale(c);
        auto D = rand_op(rng, K, 3, 3);

        auto Da = D.apply(a);
        auto lhs = res_tower_form(alpha.scale(Da), tower);
        auto aD = right_action(alpha, D);
        auto rhs = res_tower_form(aD.scale(a), tower);
        vc.pass = (lhs == rhs);
        vc.lhs = render_form(lhs);
        vc.rhs = render_form(rhs);

        push_size(vc, "vars", K.dim());
        push_size(vc, "order", D.order());
        push_input(vc, "a", render_element(a));
        push_input(vc, "alpha", render_form(alpha));
        push_input(vc, "D", render_op(D));
        push_input(vc, "descriptor", Ks);
        std::string dv = dvol_string(K);
        push_step(vc, "apply " + wrap(render_op(D)) + " to " + wrap(render_element(a)) +
                          " over " + Ks,
                  render_element(Da));
        push_step(vc, "res " + wrap(render_element(Da)) + "*" + wrap(render_element(c)) + "*" +
                          dv + " over " + Ks,
                  vc.lhs);
        auto g = aD.component([&] {
            DirKey full;
            for (std::size_t d = 0; d < K.all_dirs().size(); ++d)
                full.push_back(static_cast<int>(d));
            return full;
        }());
        push_input(vc, "alpha*D", render_form(aD));
        push_step(vc, "res " + wrap(render_element(a)) + "*" + wrap(render_element(g)) + "*" +
                          dv + " over " + Ks,
                  vc.rhs);
        rep.ok = rep.ok && vc.pass;
        rep.cases.push_back(std::move(vc));
    }
    return rep;
}

SuiteReport run_lie_vanishing(std::uint64_t seed, int cases, int window) {
    auto rep = make_report("lie-vanishing", seed, window);
    Rng master(seed);
    for (int i = 0; i < cases; ++i) {
        VerifyCase vc;
        vc.seed = master.next();
        Rng rng(vc.seed);
        auto K = (i % 2 == 0) ? desc_qt() : desc_q2();
        auto tower = full_tower(K);
        std::string Ks = K.to_string();
        auto alpha = volume_form(K).scale(rand_elem(rng, K));
        auto dirs = K.all_dirs();
        auto v = dirs[static_cast<std::size_t>(rng.uniform(0, static_cast<std::int64_t>(dirs.size()) - 1))];

        auto L = lie_derivative(Derivation::along(K, v), alpha);
        auto r = res_tower_form(L, tower);
        vc.pass = r.is_zero();
        vc.lhs = render_form(r);
        vc.rhs = "0";

        push_size(vc, "vars", K.dim());
        push_input(vc, "alpha", render_form(alpha));
        push_input(vc, "direction", v);
        push_input(vc, "descriptor", Ks);
        push_step(vc, "lie D" + v + " on " + render_form(alpha) + " over " + Ks, render_form(L));
        push_step(vc, "res " + render_form(L) + " over " + Ks, vc.lhs);
        rep.ok = rep.ok && vc.pass;
        rep.cases.push_back(std::move(vc));
    }
    return rep;
}

Form rand_form(Rng& rng, const TlfDescriptor& K, int degree) {
    auto dirs = K.all_dirs();
    int top = static_cast<int>(dirs.size());
    std::map<DirKey, LaurentElement> comps;
    // all sorted subsets of the given size, each kept with probability 1/2
    std::vector<DirKey> keys;
    DirKey cur;
    std::function<void(int)> walk = [&](int from) {
        if (static_cast<int>(cur.size()) == degree) {
            keys.push_back(cur);
            return;
        }
        for (int d = from; d < top; ++d) {
            cur.push_back(d);
            walk(d + 1);
            cur.pop_back();
        }
    };
    walk(0);
    for (const auto& k : keys)
        if (rng.chance(2, 3)) comps[k] = rand_elem(rng, K, 3);
    if (comps.empty() && !keys.empty()) comps[keys.front()] = rand_elem(rng, K, 3);
    return Form::from_components(K, degree, std::move(comps));
}

SuiteReport run_cartan(std::uint64_t seed, int cases, int window) {
    auto rep = make_report("cartan-calculus", seed, window);
    Rng master(seed);
    for (int i = 0; i < cases; ++i) {
        VerifyCase vc;
        vc.seed = master.next();
        Rng rng(vc.seed);
        auto K = desc_q2();
        std::string Ks = K.to_string();
        auto dirs = K.all_dirs();
        auto pick_dir = [&] {
            return dirs[static_cast<std::size_t>(
                rng.uniform(0, static_cast<std::int64_t>(dirs.size()) - 1))];
        };
        push_size(vc, "vars", K.dim());
        int which = i % 3;
        if (which == 0) {
            // the Lie derivative commutes with d
            int deg = static_cast<int>(rng.uniform(0, 1));
            auto x = rand_form(rng, K, deg);
            auto v = pick_dir();
            auto a = rand_elem(rng, K, 3);
            auto X = Derivation::along(K, v, a);
            auto dx = exterior_d(x);
            auto lhs = lie_derivative(X, dx);
            auto rhs = exterior_d(lie_derivative(X, x));
            vc.pass = (lhs == rhs);
            vc.lhs = render_form(lhs);
            vc.rhs = render_form(rhs);
            push_input(vc, "identity", "lie-commutes-with-d");
            push_input(vc, "x", render_form(x));
            push_input(vc, "X", render_derivation(X));
            push_input(vc, "d_x", render_form(dx));
            push_input(vc, "descriptor", Ks);
            push_step(vc, "lie " + render_derivation(X) + " on " + render_form(dx) + " over " + Ks,
                      vc.lhs);
            push_input(vc, "lie_X_x", render_form(lie_derivative(X, x)));
        } else if (which == 1) {
            // L is a homomorphism of Lie algebras
            auto alpha = rand_form(rng, K, static_cast<int>(rng.uniform(0, 2)));
            auto X = Derivation::along(K, pick_dir(), rand_elem(rng, K, 2));
            auto Y = Derivation::along(K, pick_dir(), rand_elem(rng, K, 2));
            auto LYa = lie_derivative(Y, alpha);
            auto LXa = lie_derivative(X, alpha);
            auto lhs = lie_derivative(X, LYa) - lie_derivative(Y, LXa);
            auto rhs = lie_derivative(X.commutator(Y), alpha);
            vc.pass = (lhs == rhs);
            vc.lhs = render_form(lhs);
            vc.rhs = render_form(rhs);
            push_input(vc, "identity", "lie-bracket-homomorphism");
            push_input(vc, "alpha", render_form(alpha));
            push_input(vc, "X", render_derivation(X));
            push_input(vc, "Y", render_derivation(Y));
            push_input(vc, "descriptor", Ks);
            push_step(vc, "lie " + render_derivation(Y) + " on " + render_form(alpha) + " over " + Ks,
                      render_form(LYa));
            push_step(vc, "lie " + render_derivation(X) + " on " + render_form(LYa) + " over " + Ks,
                      render_form(lie_derivative(X, LYa)));
            push_step(vc, "lie " + render_derivation(X) + " on " + render_form(alpha) + " over " + Ks,
                      render_form(LXa));
            push_step(vc, "lie " + render_derivation(Y) + " on " + render_form(LXa) + " over " + Ks,
                      render_form(lie_derivative(Y, LXa)));
            push_step(vc, "lie " + render_derivation(X.commutator(Y)) + " on " + render_form(alpha) +
                          " over " + Ks,
                      vc.rhs);
        } else {
            // on top forms the coefficient of the derivation can be absorbed
            auto alpha = volume_form(K).scale(rand_elem(rng, K, 3));
            auto a = rand_elem(rng, K, 3);
            auto v = pick_dir();
            auto lhs = lie_derivative(Derivation::along(K, v, a), alpha);
            auto rhs = lie_derivative(Derivation::along(K, v), alpha.scale(a));
            vc.pass = (lhs == rhs);
            vc.lhs = render_form(lhs);
            vc.rhs = render_form(rhs);
            push_input(vc, "identity", "top-form-absorption");
            push_input(vc, "alpha", render_form(alpha));
            push_input(vc, "a", render_element(a));
            push_input(vc, "direction", v);
            push_input(vc, "descriptor", Ks);
            push_step(vc, "lie " + wrap(render_element(a)) + "*D" + v + " on " + render_form(alpha) +
                          " over " + Ks,
                      vc.lhs);
            push_step(vc, "lie D" + v + " on " + render_form(alpha.scale(a)) + " over " + Ks,
                      vc.rhs);
        }
        rep.ok = rep.ok && vc.pass;
        rep.cases.push_back(std::move(vc));
    }
    return rep;
}

SuiteReport run_normal_order(std::uint64_t seed, int cases, int window) {
    auto rep = make_report("normal-order", seed, window);
    Rng master(seed);
    for (int i = 0; i < cases; ++i) {
        VerifyCase vc;
        vc.seed = master.next();
        Rng rng(vc.seed);
        auto K = (i % 2 == 0) ? desc_qt() : desc_q2();
        std::string Ks = K.to_string();
        auto D = rand_op(rng, K, 2, 3);
        auto E = rand_op(rng, K, 2, 3);
        auto x = rand_elem(rng, K);

        auto Ex = E.apply(x);
        auto rhs = D.apply(Ex);
        auto lhs = (D * E).apply(x);
        vc.pass = (lhs == rhs);
        vc.lhs = render_element(lhs);
        vc.rhs = render_element(rhs);

        push_size(vc, "vars", K.dim());
        push_size(vc, "order", (D * E).order());
        push_input(vc, "D", render_op(D));
        push_input(vc, "E", render_op(E));
        push_input(vc, "x", render_element(x));
        push_input(vc, "descriptor", Ks);
        push_step(vc, "apply " + wrap(render_op(E)) + " to " + wrap(render_element(x)) + " over " + Ks,
                  render_element(Ex));
        push_step(vc, "apply " + wrap(render_op(D)) + " to " + wrap(render_element(Ex)) + " over " + Ks,
                  vc.rhs);
        push_step(vc, "apply " + wrap(render_op(D)) + "*" + wrap(render_op(E)) + " to " +
                      wrap(render_element(x)) + " over " + Ks,
                  vc.lhs);
        rep.ok = rep.ok && vc.pass;
        rep.cases.push_back(std::move(vc));
    }
    return rep;
}

// ---- finite length duality suites -----------------------------------------

ArtinianBca rand_algebra(Rng& rng, const TlfDescriptor& K, int max_vars = 2, int max_pow = 4) {
    int nv = static_cast<int>(rng.uniform(1, max_vars));
    std::vector<std::string> names = (nv == 1) ? std::vector<std::string>{"a"}
                                               : std::vector<std::string>{"a", "b"};
    std::vector<Expvec> gens;
    if (nv == 1) {
        gens.push_back(Expvec{static_cast<std::int32_t>(rng.uniform(2, max_pow))});
    } else {
        auto p = static_cast<std::int32_t>(rng.uniform(2, 3));
        auto q = static_cast<std::int32_t>(rng.uniform(2, 3));
        gens.push_back(Expvec{p, 0});
        gens.push_back(Expvec{0, q});
        if (rng.chance(1, 2)) gens.push_back(Expvec{1, 1});
    }
    return ArtinianBca::make(K, names, gens);
}

FinLenModule rand_module(Rng& rng, const ArtinianBca& A) {
    int kind = static_cast<int>(rng.uniform(0, 2));
    if (kind == 0) return FinLenModule::regular(A);
    std::vector<std::vector<Expvec>> ideals;
    int ns = static_cast<int>(rng.uniform(1, 2));
    for (int s = 0; s < ns; ++s) {
        if (rng.chance(1, 2) && A.length() > 1) {
            // knock the summand down by one random non-unit basis monomial
            auto m = A.basis()[static_cast<std::size_t>(rng.uniform(1, A.length() - 1))];
            ideals.push_back({m});
        } else {
            ideals.push_back({});
        }
    }
    return FinLenModule::cyclic_sum(A, ideals);
}

BcaElement rand_nilpotent(Rng& rng, const ArtinianBca& A) {
    auto x = BcaElement::zero(A);
    const auto& K = A.tlf();
    int picks = static_cast<int>(rng.uniform(1, 2));
    for (int i = 0; i < picks && A.length() > 1; ++i) {
        auto m = A.basis()[static_cast<std::size_t>(rng.uniform(1, A.length() - 1))];
        Expvec e(static_cast<std::size_t>(K.dim()), 0);
        if (K.dim() > 0) e[0] = static_cast<std::int32_t>(rng.uniform(0, 1));
        long long c = rng.uniform(-3, 3);
        if (c == 0) c = 1;
        auto sc = Scalar::of_int(K.scalars, c);
        auto fv = K.scalars->function_vars();
        if (!fv.empty() && rng.chance(1, 2))
            sc = sc * Scalar::var(K.scalars, fv[static_cast<std::size_t>(
                                       rng.uniform(0, static_cast<std::int64_t>(fv.size()) - 1))]);
        auto coeff = LaurentElement::monomial(K, sc, e);
        auto mono = BcaElement::one(A);
        for (std::size_t v = 0; v < A.nilp_vars().size(); ++v)
            for (int k = 0; k < m[v]; ++k) mono = mono * BcaElement::nilp_var(A, A.nilp_vars()[v]);
        x = x + mono.scale(coeff);
    }
    return x;
}

CoeffField rand_section(Rng& rng, const ArtinianBca& A, bool allow_canonical = true) {
    if (allow_canonical && rng.chance(1, 3)) return CoeffField::canonical(A);
    std::map<std::string, BcaElement> eps;
    for (const auto& d : A.tlf().all_dirs())
        if (rng.chance(1, 2)) {
            auto e = rand_nilpotent(rng, A);
            if (!e.is_zero()) eps[d] = e;
        }
    if (eps.empty()) return CoeffField::canonical(A);
    return CoeffField::make(A, eps);
}

DualElement rand_dual(Rng& rng, const FinLenModule& M, const CoeffField& sigma, int max_terms = 3) {
    const auto& K = M.algebra().tlf();
    std::vector<Form> vals;
    for (int i = 0; i < M.length(); ++i)
        vals.push_back(volume_form(K).scale(rand_elem(rng, K, max_terms)));
    return DualElement::make(M, sigma, vals);
}

void push_dual_inputs(VerifyCase& vc, const std::string& tag, const DualElement& phi) {
    for (int i = 0; i < phi.M.length(); ++i)
        push_input(vc, tag + "(" + phi.M.labels()[static_cast<std::size_t>(i)] + ")",
                   render_form(phi.values[static_cast<std::size_t>(i)]));
}

SuiteReport run_psi_inverse(std::uint64_t seed, int cases, int window) {
    auto rep = make_report("psi-inverse", seed, window);
    Rng master(seed);
    for (int i = 0; i < cases; ++i) {
        VerifyCase vc;
        vc.seed = master.next();
        Rng rng(vc.seed);
        auto K = (i % 2 == 0) ? desc_qt() : desc_qs({"s"}, {"t"});
        auto A = rand_algebra(rng, K);
        auto M = rand_module(rng, A);
        auto sigma = rand_section(rng, A);
        auto sigma2 = rand_section(rng, A, false);
        auto phi = rand_dual(rng, M, sigma);

        auto moved = psi(sigma2, phi);
        auto back = psi(sigma, moved);
        bool inverse_ok = (back == phi);

        // the transported presentation is the same functional
        bool func_ok = true;
        for (int r = 0; r < 3 && func_ok; ++r) {
            std::vector<LaurentElement> y;
            for (int j = 0; j < M.length(); ++j) y.push_back(rand_elem(rng, K, 2));
            func_ok = (moved.eval(y) == phi.eval(y));
        }

        // change-of-section matrix: unitriangular with the doubled order bound
        auto D = dij_matrix(sigma, sigma2, M);
        bool tri_ok = true;
        for (int a = 0; a < M.length() && tri_ok; ++a)
            for (int b = 0; b < M.length() && tri_ok; ++b) {
                if (a == b && D.at(a, a) != DiffOp::identity(K)) tri_ok = false;
                if (a != b && M.ord(b) <= M.ord(a) && !D.at(b, a).is_zero()) tri_ok = false;
                if (!D.at(b, a).is_zero() &&
                    D.at(b, a).order() > 2 * std::max(-1, M.ord(b) - M.ord(a)))
                    tri_ok = false;
            }

        vc.pass = inverse_ok && func_ok && tri_ok;
        push_size(vc, "length", M.length());
        push_size(vc, "nilpotency", A.nilpotency());
        push_size(vc, "vars", static_cast<int>(A.nilp_vars().size()));
        push_input(vc, "bca", A.to_string());
        push_input(vc, "module", M.to_string());
        push_input(vc, "sigma", sigma.to_string());
        push_input(vc, "sigma2", sigma2.to_string());
        push_dual_inputs(vc, "phi", phi);
        if (!inverse_ok) {
            for (int j = 0; j < M.length(); ++j)
                if (!(back.values[static_cast<std::size_t>(j)] ==
                      phi.values[static_cast<std::size_t>(j)])) {
                    vc.lhs = render_form(back.values[static_cast<std::size_t>(j)]);
                    vc.rhs = render_form(phi.values[static_cast<std::size_t>(j)]);
                    break;
                }
        } else if (!func_ok) {
            vc.lhs = "transported functional";
            vc.rhs = "original functional";
        } else if (!tri_ok) {
            vc.lhs = "change-of-section matrix";
            vc.rhs = "unitriangular with order bound";
        } else {
            vc.lhs = "roundtrip restores phi";
            vc.rhs = "roundtrip restores phi";
        }
        rep.ok = rep.ok && vc.pass;
        rep.cases.push_back(std::move(vc));
    }
    return rep;
}

// evaluation map M -> dual(dual(M)) as a constant matrix, rows = images
ScalarMat double_dual_E(const FinLenModule& M) {
    auto Md = M.dual();
    auto Mdd = Md.dual();
    const FieldPtr& f = M.algebra().tlf().scalars;
    return mat_mul(mat_transpose(Md.basis_in_parent()), mat_inverse(f, Mdd.basis_in_parent()));
}

SuiteReport run_matlis(std::uint64_t seed, int cases, int window) {
    auto rep = make_report("matlis-duality", seed, window);
    Rng master(seed);
    for (int i = 0; i < cases; ++i) {
        VerifyCase vc;
        vc.seed = master.next();
        Rng rng(vc.seed);
        auto K = (i % 2 == 0) ? desc_qt() : desc_q0();
        const FieldPtr& f = K.scalars;
        auto A = rand_algebra(rng, K);
        auto M = rand_module(rng, A);
        auto Md = M.dual();
        bool dim_ok = (Md.length() == M.length());
        auto Mdd = Md.dual();
        bool ord_ok = (Mdd.ords() == M.ords());

        auto E = double_dual_E(M);
        bool inv_ok = mat_invertible(f, E);
        bool act_ok = true;
        for (std::size_t v = 0; v < A.nilp_vars().size() && act_ok; ++v)
            act_ok = (mat_mul(M.action(static_cast<int>(v)), E) ==
                      mat_mul(E, Mdd.action(static_cast<int>(v))));

        vc.pass = dim_ok && ord_ok && inv_ok && act_ok;
        push_size(vc, "length", M.length());
        push_size(vc, "nilpotency", A.nilpotency());
        push_input(vc, "bca", A.to_string());
        push_input(vc, "module", M.to_string());
        vc.lhs = "dim " + std::to_string(M.length());
        vc.rhs = "dim " + std::to_string(Md.length());
        if (!inv_ok && dim_ok) {
            vc.lhs = "evaluation matrix";
            vc.rhs = "invertible";
        } else if (!act_ok && dim_ok) {
            vc.lhs = "evaluation conjugate of the action";
            vc.rhs = "double dual action";
        }
        rep.ok = rep.ok && vc.pass;
        rep.cases.push_back(std::move(vc));
    }
    return rep;
}

SuiteReport run_trace_transitivity(std::uint64_t seed, int cases, int window) {
    auto rep = make_report("trace-transitivity", seed, window);
    Rng master(seed);
    for (int i = 0; i < cases; ++i) {
        VerifyCase vc;
        vc.seed = master.next();
        Rng rng(vc.seed);
        auto K = desc_qt();
        bool with_step = (i % 2 == 1);
        auto Kc = with_step ? TlfDescriptor::make(K.scalars, {"w", "t"}) : K;

        // A -> B nilpotent over K, then B -> C (optionally through a Laurent step)
        int p = static_cast<int>(rng.uniform(2, 3));
        int q = static_cast<int>(rng.uniform(2, 4));
        int m = (q + p - 1) / p;
        while (m * (p - 1) >= q) { // keep the socle image alive
            q = static_cast<int>(rng.uniform(2, 4));
            m = (q + p - 1) / p;
        }
        auto A = ArtinianBca::make(K, {"a"}, {Expvec{static_cast<std::int32_t>(p)}});
        auto B = ArtinianBca::make(K, {"b"}, {Expvec{static_cast<std::int32_t>(q)}});
        long long cf = rng.uniform(1, 3);
        auto fim = BcaElement::nilp_var(B, "b").pow(m).scale(
            LaurentElement::constant(K, Scalar::of_int(K.scalars, cf)));
        auto f = BcaMorphism::make(A, B, {}, {fim});

        int r = static_cast<int>(rng.uniform(2, 4));
        int n = (r + q - 1) / q;
        auto C = ArtinianBca::make(Kc, {"c"}, {Expvec{static_cast<std::int32_t>(r)}});
        auto gim = BcaElement::nilp_var(C, "c").pow(n);
        std::vector<MorphismStep> gtower;
        if (with_step) gtower.push_back(MorphismStep::laurent(K, "w"));
        auto g = BcaMorphism::make(B, C, gtower, {gim});
        auto gf = BcaMorphism::compose(g, f);

        auto sigA = rand_section(rng, A);
        auto canB = CoeffField::canonical(B);
        auto phi = rand_dual(rng, FinLenModule::regular(C), CoeffField::canonical(C), 4);

        auto lhs = trace_map(gf, sigA, phi);
        auto rhs = trace_map(f, sigA, trace_map(g, canB, phi));
        bool trans_ok = (lhs == rhs);

        // the trace presented through another section is the transported one
        auto sigA2 = rand_section(rng, A, false);
        bool sig_ok = (psi(sigA2, lhs) == trace_map(gf, sigA2, phi));

        // the socle-image functional pulls back to a perfect trace pairing,
        // the counit collapses
        bool gram_ok = true;
        {
            auto canA = CoeffField::canonical(A);
            auto regB = FinLenModule::regular(B);
            auto mk = [&](int idx) {
                std::vector<Form> vals(static_cast<std::size_t>(B.length()), Form::zero(K, 1));
                vals[static_cast<std::size_t>(idx)] = volume_form(K);
                return trace_map(f, canA, DualElement::make(regB, canB, vals));
            };
            auto gram_of = [&](const DualElement& tr) {
                int nb = A.length();
                std::vector<std::vector<Form>> gm(
                    static_cast<std::size_t>(nb),
                    std::vector<Form>(static_cast<std::size_t>(nb), Form::zero(K, 1)));
                for (int x = 0; x < nb; ++x)
                    for (int y = 0; y < nb; ++y) {
                        int idx = A.basis_index(expvec_add(A.basis()[static_cast<std::size_t>(x)],
                                                           A.basis()[static_cast<std::size_t>(y)]));
                        if (idx >= 0)
                            gm[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)] =
                                tr.values[static_cast<std::size_t>(idx)];
                    }
                return gm;
            };
            int socle_img = B.basis_index(Expvec{static_cast<std::int32_t>(m * (p - 1))});
            gram_ok = gram_invertible(K, gram_of(mk(socle_img)), vc.seed) &&
                      !gram_invertible(K, gram_of(mk(0)), vc.seed);
        }

        vc.pass = trans_ok && sig_ok && gram_ok;
        push_size(vc, "nilpotency", A.nilpotency());
        push_size(vc, "tower", with_step ? 1 : 0);
        push_input(vc, "A", A.to_string());
        push_input(vc, "B", B.to_string());
        push_input(vc, "C", C.to_string());
        push_input(vc, "f(a)", fim.to_string());
        push_input(vc, "g(b)", gim.to_string());
        push_input(vc, "sigmaA", sigA.to_string());
        push_dual_inputs(vc, "phi", phi);
        if (!trans_ok) {
            for (int j = 0; j < lhs.M.length(); ++j)
                if (!(lhs.values[static_cast<std::size_t>(j)] ==
                      rhs.values[static_cast<std::size_t>(j)])) {
                    vc.lhs = render_form(lhs.values[static_cast<std::size_t>(j)]);
                    vc.rhs = render_form(rhs.values[static_cast<std::size_t>(j)]);
                    break;
                }
        } else if (!sig_ok) {
            vc.lhs = "transported composite trace";
            vc.rhs = "composite trace through the other section";
        } else if (!gram_ok) {
            vc.lhs = "trace pairing of the socle-image functional";
            vc.rhs = "invertible (and counit pairing singular)";
        } else {
            vc.lhs = "composite trace";
            vc.rhs = "composite trace";
        }
        rep.ok = rep.ok && vc.pass;
        rep.cases.push_back(std::move(vc));
    }
    return rep;
}

DiffOpMatrix rand_do_matrix(Rng& rng, const TlfDescriptor& K, int rows, int cols) {
    auto mat = DiffOpMatrix::zeros(K, rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            if (rng.chance(1, 2)) mat.set(i, j, rand_op(rng, K, 2, 2));
    return mat;
}

// multiply an operator matrix by a constant matrix on either side
DiffOpMatrix const_mul(const ScalarMat& C, const DiffOpMatrix& A) {
    int n = static_cast<int>(C.size()), m = A.cols();
    DiffOpMatrix r = DiffOpMatrix::zeros(A.tlf(), n, m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            DiffOp acc = DiffOp::zero(A.tlf());
            for (int k = 0; k < A.rows(); ++k) {
                if (C[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].is_zero() ||
                    A.at(k, j).is_zero())
                    continue;
                acc = acc + A.at(k, j).scale_scalar(
                                C[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)]);
            }
            if (!acc.is_zero()) r.set(i, j, acc);
        }
    return r;
}
DiffOpMatrix const_mul(const DiffOpMatrix& A, const ScalarMat& C) {
    int n = A.rows(), m = static_cast<int>(C.empty() ? 0 : C[0].size());
    DiffOpMatrix r = DiffOpMatrix::zeros(A.tlf(), n, m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            DiffOp acc = DiffOp::zero(A.tlf());
            for (int k = 0; k < A.cols(); ++k) {
                if (C[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)].is_zero() ||
                    A.at(i, k).is_zero())
                    continue;
                acc = acc + A.at(i, k).scale_scalar(
                                C[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)]);
            }
            if (!acc.is_zero()) r.set(i, j, acc);
        }
    return r;
}

SuiteReport run_dual_operators(std::uint64_t seed, int cases, int window) {
    auto rep = make_report("dual-operators", seed, window);
    Rng master(seed);
    for (int i = 0; i < cases; ++i) {
        VerifyCase vc;
        vc.seed = master.next();
        Rng rng(vc.seed);
        auto K = desc_qt();
        auto A = rand_algebra(rng, K);
        auto can = CoeffField::canonical(A);
        auto M = rand_module(rng, A);
        auto N = rand_module(rng, A);
        auto D = ModuleDO::make(M, N, can, rand_do_matrix(rng, K, M.length(), N.length()));

        push_size(vc, "length", M.length() + N.length());
        push_size(vc, "nilpotency", A.nilpotency());
        push_input(vc, "bca", A.to_string());
        push_input(vc, "M", M.to_string());
        push_input(vc, "N", N.to_string());
        int which = i % 4;
        if (which == 0) {
            push_input(vc, "identity", "linearity");
            auto E = ModuleDO::make(M, N, can, rand_do_matrix(rng, K, M.length(), N.length()));
            auto phi = rand_dual(rng, N, can);
            auto sum = ModuleDO::make(M, N, can, D.mat + E.mat);
            auto lhs = dual_of_do(sum, phi);
            auto rhs = dual_of_do(D, phi) + dual_of_do(E, phi);
            vc.pass = (lhs == rhs);
            vc.lhs = render_form(lhs.values.empty() ? Form() : lhs.values[0]);
            vc.rhs = render_form(rhs.values.empty() ? Form() : rhs.values[0]);
        } else if (which == 1) {
            push_input(vc, "identity", "transitivity");
            auto P = rand_module(rng, A);
            auto G = ModuleDO::make(N, P, can, rand_do_matrix(rng, K, N.length(), P.length()));
            auto phi = rand_dual(rng, P, can);
            auto lhs = dual_of_do(ModuleDO::compose(G, D), phi);
            auto rhs = dual_of_do(D, dual_of_do(G, phi));
            vc.pass = (lhs == rhs);
            vc.lhs = render_form(lhs.values.empty() ? Form() : lhs.values[0]);
            vc.rhs = render_form(rhs.values.empty() ? Form() : rhs.values[0]);
        } else if (which == 2) {
            push_input(vc, "identity", "adjointness");
            auto phi = rand_dual(rng, N, can);
            std::vector<LaurentElement> x;
            for (int j = 0; j < M.length(); ++j) x.push_back(rand_elem(rng, K, 2));
            auto lhs = residue_pairing(phi, D.apply(x));
            auto rhs = residue_pairing(dual_of_do(D, phi), x);
            vc.pass = (lhs == rhs);
            vc.lhs = render_form(lhs);
            vc.rhs = render_form(rhs);
        } else {
            push_input(vc, "identity", "double-dual");
            auto Dvv = dual_do_module(dual_do_module(D));
            auto EM = double_dual_E(M);
            auto EN = double_dual_E(N);
            vc.pass = (Dvv.source.ords() == M.ords()) && (Dvv.target.ords() == N.ords()) &&
                      (const_mul(EM, Dvv.mat) == const_mul(D.mat, EN));
            vc.lhs = "double dual conjugated by evaluation";
            vc.rhs = "original operator matrix";
        }
        rep.ok = rep.ok && vc.pass;
        rep.cases.push_back(std::move(vc));
    }
    return rep;
}

SuiteReport run_derham_dual(std::uint64_t seed, int cases, int window) {
    auto rep = make_report("derham-dual", seed, window);
    Rng master(seed);
    for (int i = 0; i < cases; ++i) {
        VerifyCase vc;
        vc.seed = master.next();
        Rng rng(vc.seed);
        // small menu over the bare rationals so cohomology is finite linear algebra
        auto K = desc_q0();
        const FieldPtr& f = K.scalars;
        ArtinianBca A;
        switch (rng.uniform(0, 3)) {
        case 0:
            A = ArtinianBca::make(K, {"a"}, {Expvec{static_cast<std::int32_t>(rng.uniform(2, 4))}});
            break;
        case 1: A = ArtinianBca::make(K, {"a", "b"}, {{2, 0}, {0, 2}}); break;
        case 2: A = ArtinianBca::make(K, {"a", "b"}, {{2, 0}, {0, 3}}); break;
        default: A = ArtinianBca::make(K, {"a", "b"}, {{2, 0}, {0, 2}, {1, 1}}); break;
        }
        int qmax = static_cast<int>(A.nilp_vars().size());
        auto Cx = omega_complex(A, qmax);

        bool square_ok = true;
        for (int q = 0; q + 1 < static_cast<int>(Cx.differentials.size()); ++q)
            square_ok = square_ok &&
                        ModuleDO::compose(Cx.differentials[static_cast<std::size_t>(q + 1)],
                                          Cx.differentials[static_cast<std::size_t>(q)])
                            .is_zero();

        // the dual complex squares to zero as well
        std::vector<ModuleDO> dv;
        for (const auto& d : Cx.differentials) dv.push_back(dual_do_module(d));
        bool dual_square_ok = true;
        for (int q = 0; q + 1 < static_cast<int>(dv.size()); ++q)
            dual_square_ok = dual_square_ok &&
                             ModuleDO::compose(dv[static_cast<std::size_t>(q)],
                                               dv[static_cast<std::size_t>(q + 1)])
                                 .is_zero();

        // cohomology dimensions agree with the double dual complex
        auto rank_of = [&](const ModuleDO& d) {
            int n = d.source.length(), m = d.target.length();
            if (n == 0 || m == 0) return 0;
            ScalarMat mat(static_cast<std::size_t>(n),
                          std::vector<Scalar>(static_cast<std::size_t>(m), Scalar::zero(f)));
            for (int a = 0; a < n; ++a) {
                auto img = d.apply(d.source.unit_coords(a));
                for (int b = 0; b < m; ++b)
                    mat[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] =
                        img[static_cast<std::size_t>(b)].coeff_at(Expvec{});
            }
            return mat_rank(f, mat);
        };
        auto coh_dims = [&](const std::vector<FinLenModule>& mods,
                            const std::vector<ModuleDO>& diffs) {
            std::vector<int> h;
            for (std::size_t q = 0; q < mods.size(); ++q) {
                int rin = (q == 0) ? 0 : rank_of(diffs[q - 1]);
                int rout = (q < diffs.size()) ? rank_of(diffs[q]) : 0;
                h.push_back(mods[q].length() - rin - rout);
            }
            return h;
        };
        std::vector<FinLenModule> ddm;
        std::vector<ModuleDO> ddd;
        for (const auto& m : Cx.modules) ddm.push_back(m.dual().dual());
        for (const auto& d : Cx.differentials) ddd.push_back(dual_do_module(dual_do_module(d)));
        auto h1 = coh_dims(Cx.modules, Cx.differentials);
        auto h2 = coh_dims(ddm, ddd);
        bool coh_ok = (h1 == h2);

        vc.pass = square_ok && dual_square_ok && coh_ok;
        push_size(vc, "length", A.length());
        push_size(vc, "vars", static_cast<int>(A.nilp_vars().size()));
        push_input(vc, "bca", A.to_string());
        auto dims = [](const std::vector<int>& h) {
            std::string s = "[";
            for (std::size_t j = 0; j < h.size(); ++j)
                s += (j ? "," : "") + std::to_string(h[j]);
            return s + "]";
        };
        vc.lhs = dims(h1);
        vc.rhs = dims(h2);
        if (!square_ok || !dual_square_ok) {
            vc.lhs = square_ok ? "dual complex square" : "complex square";
            vc.rhs = "0";
        }
        rep.ok = rep.ok && vc.pass;
        rep.cases.push_back(std::move(vc));
    }
    return rep;
}

// ---- intensification base change suites -----------------------------------

VerifyCase case_from_check(const CheckCase& c, std::uint64_t cs) {
    VerifyCase vc;
    vc.seed = cs;
    vc.pass = c.ok;
    push_input(vc, "input", c.input);
    push_input(vc, "window", c.window);
    vc.lhs = c.lhs;
    vc.rhs = c.rhs;
    return vc;
}

SuiteReport run_psi_square(std::uint64_t seed, int cases, int window) {
    auto rep = make_report("psi-square", seed, window);
    Rng master(seed);
    for (int i = 0; i < cases; ++i) {
        std::uint64_t cs = master.next();
        Rng rng(cs);
        auto K = desc_qs({"s"}, {"t"});
        auto u = Intensification::make(K, "s", window);
        auto A = rand_algebra(rng, K);
        auto M = rand_module(rng, A);
        auto sigma = rand_section(rng, A);
        auto sigma2 = rand_section(rng, A, false);
        auto chk = check_square_psi(u, sigma, sigma2, M, cs, 1);
        auto vc = case_from_check(chk.cases.front(), cs);
        push_size(vc, "window", window);
        push_size(vc, "length", M.length());
        push_input(vc, "bca", A.to_string());
        push_input(vc, "sigma", sigma.to_string());
        push_input(vc, "sigma2", sigma2.to_string());
        rep.ok = rep.ok && vc.pass;
        rep.cases.push_back(std::move(vc));
    }
    return rep;
}

SuiteReport run_trace_square(std::uint64_t seed, int cases, int window) {
    auto rep = make_report("trace-square", seed, window);
    Rng master(seed);
    for (int i = 0; i < cases; ++i) {
        std::uint64_t cs = master.next();
        Rng rng(cs);
        int which = i % 4;
        BcaMorphism f;
        CoeffField sigA;
        Intensification u;
        std::string shape;
        if (which == 0) {
            // identity morphism on a nilpotent algebra over Q(s)
            auto K = desc_qs({"s"}, {});
            u = Intensification::make(K, "s", window);
            auto A = rand_algebra(rng, K, 1, 3);
            std::vector<BcaElement> ims;
            for (const auto& v : A.nilp_vars()) ims.push_back(BcaElement::nilp_var(A, v));
            f = BcaMorphism::make(A, A, {}, ims);
            sigA = rand_section(rng, A);
            shape = "identity";
        } else if (which == 1) {
            // nilpotent extension of the field
            auto K = desc_qs({"s"}, {});
            u = Intensification::make(K, "s", window);
            auto A = ArtinianBca::make(K, {}, {});
            auto B = ArtinianBca::make(
                K, {"c"}, {Expvec{static_cast<std::int32_t>(rng.uniform(2, 3))}});
            f = BcaMorphism::make(A, B, {}, {});
            sigA = CoeffField::canonical(A);
            shape = "nilpotent-extension";
        } else if (which == 2) {
            // Laurent step with a nilpotent image on top
            auto K = desc_qs({"s"}, {});
            u = Intensification::make(K, "s", window);
            auto step = MorphismStep::laurent(K, "t");
            auto A = ArtinianBca::make(K, {"a"}, {Expvec{2}});
            auto B = ArtinianBca::make(step.target, {"c"}, {Expvec{2}});
            auto im = BcaElement::nilp_var(B, "c");
            if (rng.chance(1, 2))
                im = im.scale(LaurentElement::variable(step.target, "t"));
            f = BcaMorphism::make(A, B, {step}, {im});
            sigA = rand_section(rng, A);
            shape = "laurent-step";
        } else {
            // ramified cover of the Laurent variable
            auto K = desc_qs({"s"}, {"t"});
            u = Intensification::make(K, "s", window);
            auto rdesc = TlfDescriptor::make(K.scalars, {"r"});
            auto g = LaurentElement::one(rdesc);
            if (rng.chance(1, 2)) g = g + LaurentElement::variable(rdesc, "r");
            auto kum = MorphismStep::kummer(K, "t", "r",
                                            static_cast<int>(rng.uniform(2, 3)), g);
            auto A = ArtinianBca::make(K, {}, {});
            auto B = ArtinianBca::make(kum.target, {}, {});
            f = BcaMorphism::make(A, B, {kum}, {});
            sigA = CoeffField::canonical(A);
            shape = "kummer-step";
        }
        auto chk = check_square_trace(f, u, sigA, cs, 1);
        auto vc = case_from_check(chk.cases.front(), cs);
        push_size(vc, "window", window);
        push_input(vc, "shape", shape);
        push_input(vc, "A", f.source.to_string());
        push_input(vc, "B", f.target.to_string());
        push_input(vc, "sigmaA", sigA.to_string());
        rep.ok = rep.ok && vc.pass;
        rep.cases.push_back(std::move(vc));
    }
    return rep;
}

SuiteReport run_promotion_order(std::uint64_t seed, int cases, int window) {
    auto rep = make_report("promotion-order", seed, window);
    Rng master(seed);
    for (int i = 0; i < cases; ++i) {
        std::uint64_t cs = master.next();
        Rng rng(cs);
        auto K = desc_qs({"s", "w"}, {"t"});
        auto A = rand_algebra(rng, K);
        auto sigma = rand_section(rng, A);
        std::vector<Expvec> extra;
        if (rng.chance(1, 2) && A.length() > 1)
            extra.push_back(A.basis()[static_cast<std::size_t>(rng.uniform(1, A.length() - 1))]);
        auto chk = check_associativity(A, sigma, "s", "w", window, extra);
        VerifyCase vc;
        vc.seed = cs;
        vc.pass = chk.ok;
        push_size(vc, "window", window);
        push_size(vc, "length", A.length());
        push_input(vc, "bca", A.to_string());
        push_input(vc, "sigma", sigma.to_string());
        for (const auto& c : chk.cases) {
            push_input(vc, c.input, c.ok ? "pass" : "fail");
            if (!c.ok && vc.lhs.empty()) {
                vc.lhs = c.lhs;
                vc.rhs = c.rhs;
            }
        }
        if (vc.lhs.empty()) {
            vc.lhs = "both promotion orders";
            vc.rhs = "both promotion orders";
        }
        rep.ok = rep.ok && vc.pass;
        rep.cases.push_back(std::move(vc));
    }
    return rep;
}

} // namespace

const std::vector<SuiteInfo>& suite_registry() {
    static const std::vector<SuiteInfo> reg = {
        {"integration-by-parts",
         "residue pairing adjunction between an operator and its right action", 200, run_ibp},
        {"lie-vanishing", "residues of coordinate Lie derivatives vanish", 200, run_lie_vanishing},
        {"cartan-calculus",
         "Lie derivative commutes with d, respects brackets, absorbs coefficients on top forms",
         300, run_cartan},
        {"normal-order", "operator composition agrees with chained application", 200,
         run_normal_order},
        {"psi-inverse",
         "section transport is invertible, functional, and unitriangular with the order bound",
         100, run_psi_inverse},
        {"matlis-duality", "duals preserve length and evaluation into the double dual is bijective",
         50, run_matlis},
        {"trace-transitivity",
         "traces compose along towers, transport between sections, and detect dualizing generators",
         50, run_trace_transitivity},
        {"dual-operators",
         "duals of module operators: linearity, transitivity, adjointness, double dual", 100,
         run_dual_operators},
        {"derham-dual",
         "the dual de Rham complex squares to zero and keeps the cohomology dimensions", 20,
         run_derham_dual},
        {"psi-square", "section transport commutes with intensification", 50, run_psi_square},
        {"trace-square", "trace maps commute with intensification", 50, run_trace_square},
        {"promotion-order", "stacked intensifications commute", 50, run_promotion_order},
    };
    return reg;
}

const SuiteInfo* find_suite(const std::string& name) {
    for (const auto& s : suite_registry())
        if (s.name == name) return &s;
    return nullptr;
}

} // namespace bca
