#include "bcakit/weyl.hpp"
#include "bcakit/bca.hpp"
#include <iostream>

using namespace bca;

int main() {
    auto Q = ScalarField::rationals();
    auto Qs = ScalarField::rational_functions(Q, {"s"});
    auto Qt = ScalarField::rational_functions(Q, {"t"});
    auto K = TlfDescriptor::make(Q, {"t"});
    auto Ks = TlfDescriptor::make(Qs, {"t"});
    auto K2 = TlfDescriptor::make(Q, {"t", "s"});

    std::cout << "desc K    : " << K.to_string() << "\n";
    std::cout << "desc Ks   : " << Ks.to_string() << "\n";
    std::cout << "desc K2   : " << K2.to_string() << "\n";
    auto K0 = TlfDescriptor::make(Qt, {});
    std::cout << "desc K0   : " << K0.to_string() << "\n";

    auto t = LaurentElement::variable(K, "t");
    auto e1 = t.pow_int(3, Window::exact_marker()).scale(Scalar::of_int(Q, 3));
    std::cout << "elem 3t^3 : " << e1.to_string() << "\n";
    auto e2 = LaurentElement::monomial(K, Scalar::of_int(Q, 1), Expvec{-1}) + t;
    std::cout << "elem t^-1+t: " << e2.to_string() << "\n";
    std::cout << "elem one  : " << LaurentElement::one(K).to_string() << "\n";
    std::cout << "elem zero : " << LaurentElement::zero(K).to_string() << "\n";
    auto eneg = LaurentElement::monomial(K, Scalar::of_int(Q, -2), Expvec{1});
    std::cout << "elem -2t  : " << eneg.to_string() << "\n";
    auto ehalf = LaurentElement::monomial(K, Scalar::of_rational(Q, Rational(1, 2)), Expvec{2});
    std::cout << "elem t^2/2: " << ehalf.to_string() << "\n";
    auto es = LaurentElement::monomial(Ks, Scalar::var(Qs, "s"), Expvec{0});
    std::cout << "elem s    : " << es.to_string() << "\n";
    auto esr = LaurentElement::monomial(
        Ks, Scalar::var(Qs, "s") / (Scalar::one(Qs) + Scalar::var(Qs, "s")), Expvec{1});
    std::cout << "elem s/(1+s)t: " << esr.to_string() << "\n";

    // windowed element display
    auto w = LaurentElement::one(K).truncate(Window::box({-2}, {4}));
    std::cout << "elem windowed: " << w.to_string() << "\n";

    auto dt = Form::d_basis(K, "t");
    std::cout << "form dt    : " << dt.to_string() << "\n";
    auto f1 = dt.scale(t.pow_int(2, Window::exact_marker()).scale(Scalar::of_int(Q, 2)));
    std::cout << "form 2t^2dt: " << f1.to_string() << "\n";
    auto ds2 = Form::d_basis(K2, "s");
    auto dt2 = Form::d_basis(K2, "t");
    std::cout << "form dt^ds : " << wedge(dt2, ds2).to_string() << "\n";
    std::cout << "form zero  : " << Form::zero(K, 1).to_string() << "\n";
    auto f0 = Form::of_element(LaurentElement::one(K));
    std::cout << "form 0-deg : " << f0.to_string() << "\n";

    auto Dt = DiffOp::partial(K, "t");
    auto op1 = DiffOp::of_element(t) * Dt * Dt + DiffOp::identity(K);
    std::cout << "op t*Dt^2+1: " << op1.to_string() << "\n";
    auto sK2 = LaurentElement::variable(K2, "s");
    auto tK2 = LaurentElement::variable(K2, "t");
    auto op2 = DiffOp::of_element(tK2) * DiffOp::partial(K2, "t") * DiffOp::partial(K2, "t")
             + DiffOp::of_element(sK2) * DiffOp::partial(K2, "s") + DiffOp::identity(K2);
    std::cout << "op mixed   : " << op2.to_string() << "\n";
    std::cout << "op zero    : " << DiffOp::zero(K).to_string() << "\n";

    // apply example
    auto applied = (DiffOp::of_element(t) * Dt).apply(t.pow_int(3, Window::exact_marker()));
    std::cout << "apply t*Dt t^3 -> " << applied.to_string() << "\n";
    // lie example
    auto lie = lie_derivative(Derivation::along(K, "t"),
                              dt.scale(t.pow_int(2, Window::exact_marker())));
    std::cout << "lie Dt t^2dt -> " << lie.to_string() << "\n";
    // res example
    auto base = TlfDescriptor::make(Q, {});
    auto resv = res_tower_form(dt.scale(e2), std::vector<MorphismStep>{MorphismStep::laurent(base, "t")});
    std::cout << "res (t^-1+t)dt -> " << resv.to_string() << "\n";

    // scalar printing
    std::cout << "scalar 3/2 : " << Scalar::of_rational(Q, Rational(3, 2)).to_string() << "\n";
    std::cout << "scalar s+1 : " << (Scalar::var(Qs, "s") + Scalar::one(Qs)).to_string() << "\n";

    // bca + element printing
    auto A = ArtinianBca::make(Ks, {"u"}, {Expvec{2}});
    std::cout << "bca A      : " << A.to_string() << "\n";
    auto a = BcaElement::one(A) + BcaElement::nilp_var(A, "u").scale(es);
    std::cout << "bca elem   : " << a.to_string() << "\n";
    auto sig = CoeffField::make(A, {{"s", BcaElement::nilp_var(A, "u")}});
    std::cout << "sigma      : " << sig.to_string() << "\n";
    std::cout << "module     : " << FinLenModule::regular(A).to_string() << "\n";
    return 0;
}
