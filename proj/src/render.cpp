#include "bcakit/render.hpp"

namespace bca {

std::string render_element(const LaurentElement& x) { return x.to_string(); }

std::string render_op(const DiffOp& d) { return d.to_string(); }

namespace {

// single exact term whose printed coefficient carries no sign or sum: safe to
// splice in front of a wedge block without parentheses
bool plain_positive_term(const LaurentElement& x, const std::string& s) {
    if (!x.is_exact() || x.terms().size() != 1) return false;
    return !s.empty() && s[0] != '-';
}

} // namespace

std::string render_form(const Form& a) {
    if (a.components().empty()) return "0";
    if (a.degree() == 0) return render_element(a.component(DirKey{}));
    auto dirs = a.tlf().all_dirs();
    std::string out;
    for (const auto& [key, x] : a.components()) {
        if (x.is_zero()) continue;
        std::string block;
        for (int idx : key) {
            if (!block.empty()) block += "^";
            block += "d" + dirs[static_cast<std::size_t>(idx)];
        }
        std::string coeff = render_element(x);
        std::string piece;
        if (coeff == "1")
            piece = block;
        else if (plain_positive_term(x, coeff))
            piece = coeff + "*" + block;
        else
            piece = "(" + coeff + ")*" + block;
        out += (out.empty() ? "" : " + ") + piece;
    }
    return out.empty() ? "0" : out;
}

std::string render_bca_decl(const std::string& name, const ArtinianBca& A) {
    std::string out = "bca " + name + " over " + A.tlf().to_string();
    if (!A.nilp_vars().empty()) {
        out += " vars ";
        for (std::size_t i = 0; i < A.nilp_vars().size(); ++i)
            out += (i ? "," : "") + A.nilp_vars()[i];
        out += " ideal ";
        for (std::size_t i = 0; i < A.ideal_gens().size(); ++i)
            out += (i ? "," : "") + A.mono_string(A.ideal_gens()[i]);
    }
    return out;
}

std::string render_decl(const std::string& name, const ArtinianBca& A, const CoeffField& sigma) {
    std::string out = render_bca_decl(name, A);
    const auto& K = A.tlf();
    for (const auto& [dir, eps] : sigma.eps_all()) {
        auto embed = K.has_var(dir)
                         ? LaurentElement::variable(K, dir)
                         : LaurentElement::constant(K, Scalar::var(K.scalars, dir));
        out += "; sigma " + dir + " -> " + (BcaElement::coeff(A, embed) + eps).to_string();
    }
    return out;
}

std::string render_derivation(const Derivation& d) {
    std::string out;
    for (const auto& [dir, a] : d.coeffs()) {
        if (a.is_zero()) continue;
        std::string coeff = render_element(a);
        std::string piece;
        if (coeff == "1")
            piece = "D" + dir;
        else if (plain_positive_term(a, coeff))
            piece = coeff + "*D" + dir;
        else
            piece = "(" + coeff + ")*D" + dir;
        out += (out.empty() ? "" : " + ") + piece;
    }
    return out.empty() ? "0" : out;
}

} // namespace bca
