#include "bcakit/series.hpp"
#include "bcakit/rng.hpp"

#include "doctest.h"

using namespace bca;

namespace {

TlfDescriptor qt() { return TlfDescriptor::make(ScalarField::rationals(), {"t"}); }
TlfDescriptor qst() {
    return TlfDescriptor::make(ScalarField::rational_functions(ScalarField::rationals(), {"s"}),
                               {"t"});
}
// Q((s))((t)): t outermost, then s
TlfDescriptor q_ts() { return TlfDescriptor::make(ScalarField::rationals(), {"t", "s"}); }

LaurentElement mono(const TlfDescriptor& K, long long c, Expvec e) {
    return LaurentElement::monomial(K, Scalar::of_int(K.scalars, c), std::move(e));
}

LaurentElement rand_exact(Rng& rng, const TlfDescriptor& K, int max_terms) {
    LaurentElement x = LaurentElement::zero(K);
    int nt = static_cast<int>(rng.uniform(0, max_terms));
    for (int i = 0; i < nt; ++i) {
        Expvec e;
        for (int d = 0; d < K.dim(); ++d)
            e.push_back(static_cast<std::int32_t>(rng.uniform(-3, 3)));
        x = x + mono(K, static_cast<long long>(rng.uniform(-5, 5)), std::move(e));
    }
    return x;
}

} // namespace

TEST_SUITE("series") {

TEST_CASE("exact arithmetic stays exact") {
    auto K = qt();
    auto x = mono(K, 1, {1}) + mono(K, 1, {0}); // t + 1
    auto y = x + mono(K, 1, {-1});              // t + 1 + t^-1
    CHECK(y.is_exact());
    CHECK(y.terms().size() == 3);
    CHECK(y.coeff_at({-1}).is_one());

    auto Ks = qst();
    Scalar s = Scalar::var(Ks.scalars, "s");
    auto a = LaurentElement::monomial(Ks, s, {-1});        // s*t^-1
    auto b = LaurentElement::monomial(Ks, s.inv(), {1});   // s^-1*t
    CHECK(a * b == LaurentElement::one(Ks));
    CHECK((a * b).is_exact());
}

TEST_CASE("windowed product keeps the common box") {
    auto K = qt();
    Window w = Window::supported({0}, {3});
    auto x = (LaurentElement::one(K) + mono(K, 1, {1})).truncate(w);  // 1 + t
    auto y = (LaurentElement::one(K) + mono(K, -1, {1})).truncate(w); // 1 - t
    auto z = x * y;
    CHECK(!z.is_exact());
    CHECK(z.window() == w);
    CHECK(z.terms().size() == 2);
    CHECK(z.coeff_at({0}).is_one());
    CHECK(z.coeff_at({2}) == Scalar::of_int(K.scalars, -1));
    CHECK(z.coeff_at({3}).is_zero());
    CHECK_THROWS_AS((void)z.coeff_at({4}), PrecisionError);
}

TEST_CASE("window bookkeeping for sums") {
    auto K = qt();
    auto x = mono(K, 2, {1}).truncate(Window::supported({0}, {5}));
    auto y = mono(K, 3, {2}).truncate(Window::supported({1}, {3}));
    auto z = x + y;
    CHECK(z.window() == Window::supported({0}, {3}));
    // a windowed coordinate without support bounds cannot be multiplied
    Window nosupp = Window::box({0}, {3});
    auto u = LaurentElement::from_terms(K, {{Expvec{1}, Scalar::one(K.scalars)}}, nosupp);
    CHECK_THROWS_AS((void)(u * u), PrecisionError);
    // but adding and scaling are fine
    CHECK((u + u).window() == nosupp);
    CHECK(u.scale(Scalar::of_int(K.scalars, 2)).coeff_at({1}) == Scalar::of_int(K.scalars, 2));
}

TEST_CASE("inverse of an exact monomial is exact") {
    auto K = qt();
    auto x = mono(K, 3, {2});
    auto r = x.invert(Window::exact_marker());
    CHECK(r.is_exact());
    CHECK(r == LaurentElement::monomial(K, Scalar::of_rational(K.scalars, Rational(1, 3)), {-2}));
    CHECK(x * r == LaurentElement::one(K));

    auto t = LaurentElement::variable(K, "t");
    CHECK(t.invert(Window::exact_marker()) == mono(K, 1, {-1}));
}

TEST_CASE("geometric inverse on a window") {
    auto K = qt();
    auto x = LaurentElement::one(K) + mono(K, -1, {1}); // 1 - t
    auto r = x.invert(Window::box({-4}, {3}));
    CHECK(!r.is_exact());
    CHECK(r.window() == Window::supported({0}, {3}));
    for (std::int32_t j = 0; j <= 3; ++j) CHECK(r.coeff_at({j}).is_one());
    CHECK(agree_on_window(x * r, LaurentElement::one(K), Window::box({0}, {3})));
}

TEST_CASE("inverse picks the lex-lowest term of a two-variable sum") {
    // Q((s))((t)), lex on (e_t, e_s): the s-term of s + t leads
    auto K = q_ts();
    auto x = mono(K, 1, {0, 1}) + mono(K, 1, {1, 0});
    auto r = x.invert(Window::box({-4, -4}, {2, 2}));
    CHECK(r.coeff_at({0, -1}).is_one());
    CHECK(r.coeff_at({1, -2}) == Scalar::of_int(K.scalars, -1));
    CHECK(r.coeff_at({2, -3}).is_one());
    CHECK(r.coeff_at({1, -1}).is_zero());
    CHECK(agree_on_window(x * r, LaurentElement::one(K), Window::box({0, -3}, {2, 2})));

    // same element over Q((t))((s)): now the t-term leads
    auto K2 = TlfDescriptor::make(ScalarField::rationals(), {"s", "t"});
    auto y = mono(K2, 1, {0, 1}) + mono(K2, 1, {1, 0});
    auto r2 = y.invert(Window::box({-4, -4}, {2, 2}));
    CHECK(r2.coeff_at({0, -1}).is_one());
    CHECK(agree_on_window(y * r2, LaurentElement::one(K2), Window::box({0, -3}, {2, 2})));
}

TEST_CASE("windowed inverse needs a certified corner") {
    auto K = q_ts();
    // lowest stored term (0,1) is not the support corner (0,0)
    auto x = LaurentElement::from_terms(
        K, {{Expvec{0, 1}, Scalar::one(K.scalars)}, {Expvec{1, 0}, Scalar::one(K.scalars)}},
        Window::supported({0, 0}, {3, 3}));
    CHECK_THROWS_AS((void)x.invert(Window::box({-3, -3}, {3, 3})), PrecisionError);

    // one variable: certified zeros below the lowest term are fine
    auto K1 = qt();
    auto y = LaurentElement::from_terms(
        K1, {{Expvec{1}, Scalar::one(K1.scalars)}, {Expvec{2}, Scalar::one(K1.scalars)}},
        Window::supported({0}, {6}));
    auto r = y.invert(Window::box({-4}, {3}));
    CHECK(r.coeff_at({-1}).is_one());
    CHECK(r.coeff_at({0}) == Scalar::of_int(K1.scalars, -1));
    CHECK(agree_on_window(y * r, LaurentElement::one(K1), Window::box({0}, {3})));
    // a wider request is capped at hi - 2*lowest
    auto r2 = y.invert(Window::box({-4}, {9}));
    CHECK(r2.window().hi[0] == 4);
}

TEST_CASE("division by zero and empty windows") {
    auto K = qt();
    CHECK_THROWS_AS((void)LaurentElement::zero(K).invert(Window::box({-2}, {2})), DomainError);
    auto empty = LaurentElement::from_terms(K, {}, Window::supported({0}, {4}));
    CHECK_THROWS_AS((void)empty.invert(Window::box({-2}, {2})), PrecisionError);
    CHECK_THROWS_AS((void)empty.lowest_term(), PrecisionError);
}

TEST_CASE("derivatives move the window down by one") {
    auto Ks = qst();
    Scalar s = Scalar::var(Ks.scalars, "s");
    auto x = LaurentElement::monomial(Ks, s * s, {1}) + mono(Ks, 2, {0}); // s^2 t + 2
    auto dt = x.derive("t");
    CHECK(dt == LaurentElement::monomial(Ks, s * s, {0}));
    auto ds = x.derive("s");
    CHECK(ds == LaurentElement::monomial(Ks, s + s, {1}));
    CHECK_THROWS_AS((void)x.derive("w"), DomainError);

    auto w = x.truncate(Window::supported({0}, {4}));
    auto dw = w.derive("t");
    CHECK(dw.window() == Window::supported({-1}, {3}));
    // function-variable derivatives keep the window
    CHECK(w.derive("s").window() == Window::supported({0}, {4}));
}

TEST_CASE("lowest term extraction") {
    auto K = q_ts();
    auto x = mono(K, 5, {1, -2}) + mono(K, 3, {2, 0});
    auto [e, c] = x.lowest_term();
    CHECK(e == Expvec{1, -2});
    CHECK(c == Scalar::of_int(K.scalars, 5));
    CHECK_THROWS_AS((void)LaurentElement::zero(K).lowest_term(), DomainError);
}

TEST_CASE("printing follows the term grammar") {
    auto Ks = qst();
    Scalar s = Scalar::var(Ks.scalars, "s");
    auto x = mono(Ks, 3, {-1}) + mono(Ks, 2, {0}) + LaurentElement::monomial(Ks, s * s, {1});
    auto w = x.truncate(Window::supported({-1}, {4}));
    CHECK(w.to_string() == "3*t^-1 + 2 + s^2*t + O(t^5)");
    CHECK(LaurentElement::zero(Ks).to_string() == "0");
    CHECK(Ks.to_string() == "Q(s)((t))");
    CHECK(TlfDescriptor::make(Ks.scalars, {"t1", "t2"}).to_string() == "Q(s)((t1,t2))");
}

TEST_CASE("rational expansion at the origin") {
    auto F = ScalarField::rational_functions(ScalarField::rationals(), {"s"});
    Scalar s = Scalar::var(F, "s");
    Scalar one = Scalar::one(F);

    auto g = expand_rational(one / (one - s), "s", 4);
    CHECK(!g.is_exact());
    for (std::int32_t j = 0; j <= 4; ++j) CHECK(g.coeff_at({j}).is_one());
    CHECK_THROWS_AS((void)g.coeff_at({5}), PrecisionError);

    auto inv = expand_rational(one / s, "s", 4);
    CHECK(inv.is_exact());
    CHECK(inv == mono(expansion_target(F, "s"), 1, {-1}));

    auto h = expand_rational((s + s * s) / (one - s), "s", 3);
    auto T = expansion_target(F, "s");
    CHECK(h.coeff_at({1}).is_one());
    CHECK(h.coeff_at({2}) == Scalar::of_int(T.scalars, 2));
    CHECK(h.coeff_at({3}) == Scalar::of_int(T.scalars, 2));
    CHECK(h.coeff_at({0}).is_zero());
    // multiply back: h * (1 - s) must match s + s^2 on the window
    auto den = LaurentElement::one(T) + mono(T, -1, {1});
    auto num = mono(T, 1, {1}) + mono(T, 1, {2});
    CHECK(agree_on_window(h * den, num, Window::box({0}, {3})));
}

TEST_CASE("expansion keeps the remaining function variables") {
    auto F = ScalarField::rational_functions(ScalarField::rationals(), {"s", "u"});
    Scalar s = Scalar::var(F, "s");
    Scalar u = Scalar::var(F, "u");
    auto x = expand_rational(u / (u - s), "s", 3);
    auto T = expansion_target(F, "s");
    CHECK(T.scalars->vars() == std::vector<std::string>{"u"});
    Scalar uu = Scalar::var(T.scalars, "u");
    for (std::int32_t j = 0; j <= 3; ++j)
        CHECK(x.coeff_at({j}) * uu.pow(j) == Scalar::one(T.scalars));
    CHECK_THROWS_AS((void)expand_rational(s, "w", 3), DomainError);
}

TEST_CASE("adding an outer variable embeds exactly") {
    auto Ksrc = TlfDescriptor::make(ScalarField::rationals(), {"s"});
    auto step = MorphismStep::laurent(Ksrc, "t");
    CHECK(step.target.vars == std::vector<std::string>{"t", "s"});
    auto x = mono(Ksrc, 1, {0}) + mono(Ksrc, 1, {1}); // 1 + s
    auto y = apply_step(x, step, Window::exact_marker());
    CHECK(y.is_exact());
    CHECK(y.coeff_at({0, 0}).is_one());
    CHECK(y.coeff_at({0, 1}).is_one());
    // windowed elements get a complete new coordinate
    auto w = apply_step(x.truncate(Window::supported({0}, {5})), step, Window::exact_marker());
    CHECK(w.window().hi[0] == Window::INF);
    CHECK(w.window().supp[0] == 1);
}

TEST_CASE("ramified reparameterization") {
    auto K = qt();
    auto Kt = TlfDescriptor::make(ScalarField::rationals(), {"u"});

    // t = u^2
    auto s1 = MorphismStep::kummer(K, "t", "u", 2, LaurentElement::one(Kt));
    auto x = mono(K, 1, {-1}) + mono(K, 1, {1});
    auto y = apply_step(x, s1, Window::exact_marker());
    CHECK(y.is_exact());
    CHECK(y == mono(Kt, 1, {-2}) + mono(Kt, 1, {2}));

    // t = u^2 (1 + u)
    auto g = LaurentElement::one(Kt) + LaurentElement::variable(Kt, "u");
    auto s2 = MorphismStep::kummer(K, "t", "u", 2, g);
    auto z = apply_step(LaurentElement::variable(K, "t"), s2, Window::exact_marker());
    CHECK(z.is_exact());
    CHECK(z == mono(Kt, 1, {2}) + mono(Kt, 1, {3}));

    // negative exponents need the unit inverted on a window
    auto r = apply_step(mono(K, 1, {-1}), s2, Window::box({-8}, {4}));
    CHECK(!r.is_exact());
    for (std::int32_t j = -2; j <= 4; ++j)
        CHECK(r.coeff_at({j}) == Scalar::of_int(Kt.scalars, (j % 2 == 0) ? 1 : -1));
    // oracle: the image of t * t^-1 is 1
    CHECK(agree_on_window(z * r, LaurentElement::one(Kt), Window::box({0}, {4})));
}

TEST_CASE("ramified map on a windowed element caps the image height") {
    auto K = qt();
    auto Kt = TlfDescriptor::make(ScalarField::rationals(), {"u"});
    auto g = LaurentElement::one(Kt) + LaurentElement::variable(Kt, "u");
    auto s2 = MorphismStep::kummer(K, "t", "u", 2, g);
    auto x = (LaurentElement::variable(K, "t") + mono(K, 1, {2})).truncate(Window::supported({0}, {3}));
    auto y = apply_step(x, s2, Window::box({-4}, {12}));
    // slices above t^3 are unknown; they start at u^8, so the image is
    // certified strictly below that
    CHECK(!y.is_exact());
    CHECK(y.window().hi[0] == 7);
    CHECK(y.coeff_at({2}).is_one());
    CHECK(y.coeff_at({3}).is_one());
    CHECK(y.coeff_at({4}).is_one());
    CHECK_THROWS_AS((void)y.coeff_at({8}), PrecisionError);
}

TEST_CASE("constant field extension lifts coefficients") {
    auto K = qt();
    auto Q = ScalarField::rationals();
    std::vector<Scalar> mp = {Scalar::of_int(Q, -2), Scalar::zero(Q), Scalar::one(Q)};
    auto st = MorphismStep::constfield(K, "w", mp);
    auto x = LaurentElement::one(K) + LaurentElement::variable(K, "t");
    auto y = apply_step(x, st, Window::exact_marker());
    CHECK(y.is_exact());
    Scalar w = Scalar::var(st.target.scalars, "w");
    auto z = y.scale(w).scale(w); // w^2 = 2
    CHECK(z == y.scale(Scalar::of_int(st.target.scalars, 2)));
}

TEST_CASE("towers compose") {
    auto K0 = TlfDescriptor::make(ScalarField::rationals(), std::vector<std::string>{});
    auto s1 = MorphismStep::laurent(K0, "s");
    auto s2 = MorphismStep::laurent(s1.target, "t");
    auto x = LaurentElement::constant(K0, Scalar::of_int(K0.scalars, 7));
    auto y = apply_tower(x, {s1, s2}, Window::exact_marker());
    CHECK(y.tlf().vars == std::vector<std::string>{"t", "s"});
    CHECK(y.coeff_at({0, 0}) == Scalar::of_int(y.tlf().scalars, 7));
}

TEST_CASE("ring axioms on random exact elements") {
    auto K = q_ts();
    Rng rng{20260816u};
    for (int it = 0; it < 30; ++it) {
        auto x = rand_exact(rng, K, 4);
        auto y = rand_exact(rng, K, 4);
        auto z = rand_exact(rng, K, 4);
        CHECK(x + y == y + x);
        CHECK(x * y == y * x);
        CHECK((x + y) + z == x + (y + z));
        CHECK((x * y) * z == x * (y * z));
        CHECK(x * (y + z) == x * y + x * z);
        CHECK(x + LaurentElement::zero(K) == x);
        CHECK(x * LaurentElement::one(K) == x);
        CHECK(x - x == LaurentElement::zero(K));
    }
}

TEST_CASE("shrinking windows never changes certified coefficients") {
    auto K = q_ts();
    Rng rng{777u};
    for (int it = 0; it < 25; ++it) {
        auto x = rand_exact(rng, K, 4);
        auto y = rand_exact(rng, K, 4);
        if (x.is_zero() || y.is_zero()) continue;
        auto exact = x * y;
        auto w = Window::supported({-6, -6}, {static_cast<std::int32_t>(rng.uniform(0, 4)),
                                              static_cast<std::int32_t>(rng.uniform(0, 4))});
        auto zt = x.truncate(w) * y.truncate(w);
        const Window& wz = zt.window();
        Window probe = Window::box(wz.lo, wz.hi);
        CHECK(agree_on_window(exact, zt, probe));
    }
}

TEST_CASE("morphism steps are ring maps") {
    auto K = qt();
    auto Kt = TlfDescriptor::make(ScalarField::rationals(), {"u"});
    auto g = LaurentElement::one(Kt) + LaurentElement::variable(Kt, "u");
    auto st = MorphismStep::kummer(K, "t", "u", 3, g);
    Rng rng{42u};
    for (int it = 0; it < 12; ++it) {
        // nonnegative exponents keep the image exact
        auto x = LaurentElement::zero(K);
        auto y = LaurentElement::zero(K);
        for (int j = 0; j < 3; ++j) {
            x = x + mono(K, static_cast<long long>(rng.uniform(-4, 4)),
                         {static_cast<std::int32_t>(rng.uniform(0, 3))});
            y = y + mono(K, static_cast<long long>(rng.uniform(-4, 4)),
                         {static_cast<std::int32_t>(rng.uniform(0, 3))});
        }
        auto w = Window::exact_marker();
        CHECK(apply_step(x + y, st, w) == apply_step(x, st, w) + apply_step(y, st, w));
        CHECK(apply_step(x * y, st, w) == apply_step(x, st, w) * apply_step(y, st, w));
    }
}

TEST_CASE("unit series validation") {
    auto K = qt();
    auto Kt = TlfDescriptor::make(ScalarField::rationals(), {"u"});
    CHECK_THROWS_AS(MorphismStep::kummer(K, "t", "u", 0, LaurentElement::one(Kt)), DomainError);
    CHECK_THROWS_AS(MorphismStep::kummer(K, "t", "u", 2, LaurentElement::variable(Kt, "u")),
                    DomainError);
    CHECK_THROWS_AS(MorphismStep::kummer(K, "t", "u", 2, mono(Kt, 1, {-1})), DomainError);
    CHECK_THROWS_AS(MorphismStep::kummer(K, "x", "u", 2, LaurentElement::one(Kt)), DomainError);
}

}
