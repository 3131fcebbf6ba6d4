#pragma once

// Artinian local algebras A = K[t_1..t_r]/I with a monomial defining ideal
// over an iterated Laurent field K, and the duality machinery on top of them:
//
//  - coefficient sections sigma: K -> A (the canonical one, or twisted by
//    nilpotent corrections sigma(v) = v + eps_v), applied by Taylor transport;
//  - finite length modules with bases adapted to the maximal-ideal filtration;
//  - semilinear functionals into top forms ("dual elements"), evaluated
//    through sigma-coordinates;
//  - change of section via operator matrices, dual operators, residue
//    pairings, trace maps along algebra morphisms, and the separated
//    de Rham complex with its dual.

#include "series.hpp"
#include "forms.hpp"
#include "weyl.hpp"

#include <map>
#include <string>
#include <vector>

namespace bca {

class ArtinianBca {
public:
    ArtinianBca() = default;
    // ideal generators as exponent tuples over nilp_vars; every variable must
    // appear in a pure power so the quotient has finite length
    static ArtinianBca make(TlfDescriptor K, std::vector<std::string> nilp_vars,
                            std::vector<Expvec> ideal_gens);

    const TlfDescriptor& tlf() const { return K_; }
    const std::vector<std::string>& nilp_vars() const { return nv_; }
    const std::vector<Expvec>& ideal_gens() const { return gens_; }
    const std::vector<Expvec>& basis() const { return basis_; } // ord, then lex
    int length() const { return static_cast<int>(basis_.size()); }
    int nilpotency() const; // least N with m^N = 0
    bool in_ideal(const Expvec& m) const;
    int basis_index(const Expvec& m) const; // -1 when m lies in the ideal
    std::string mono_string(const Expvec& m) const;

    bool equals(const ArtinianBca& o) const;
    std::string to_string() const;

private:
    TlfDescriptor K_;
    std::vector<std::string> nv_;
    std::vector<Expvec> gens_;
    std::vector<Expvec> basis_;
};

inline bool operator==(const ArtinianBca& a, const ArtinianBca& b) { return a.equals(b); }
inline bool operator!=(const ArtinianBca& a, const ArtinianBca& b) { return !a.equals(b); }

// element of A in coordinates over the monomial basis
class BcaElement {
public:
    BcaElement() = default;
    static BcaElement zero(const ArtinianBca& A);
    static BcaElement one(const ArtinianBca& A);
    static BcaElement coeff(const ArtinianBca& A, LaurentElement lambda);
    static BcaElement nilp_var(const ArtinianBca& A, const std::string& v);
    static BcaElement from_coords(const ArtinianBca& A, std::vector<LaurentElement> c);

    const ArtinianBca& algebra() const { return A_; }
    const std::vector<LaurentElement>& coords() const { return c_; }
    const LaurentElement& coord(int i) const { return c_[i]; }
    bool is_zero() const;      // exact zero in every coordinate
    bool is_nilpotent() const; // unit coordinate exactly zero

    BcaElement operator+(const BcaElement& o) const;
    BcaElement operator-(const BcaElement& o) const;
    BcaElement operator-() const;
    BcaElement operator*(const BcaElement& o) const;
    BcaElement scale(const LaurentElement& x) const;
    BcaElement pow(int n) const;
    bool operator==(const BcaElement& o) const;
    bool operator!=(const BcaElement& o) const { return !(*this == o); }
    std::string to_string() const;

private:
    ArtinianBca A_;
    std::vector<LaurentElement> c_;
};

// a section K -> A of the residue map: v -> v + eps_v with eps_v nilpotent.
// Values on all of K by Taylor transport; finite because eps is nilpotent.
class CoeffField {
public:
    CoeffField() = default;
    static CoeffField canonical(ArtinianBca A);
    static CoeffField make(ArtinianBca A, std::map<std::string, BcaElement> eps);

    const ArtinianBca& algebra() const { return A_; }
    BcaElement eps(const std::string& dir) const;
    const std::map<std::string, BcaElement>& eps_all() const { return eps_; }
    bool is_canonical() const { return eps_.empty(); }

    BcaElement apply(const LaurentElement& lambda) const;

    bool equals(const CoeffField& o) const;
    std::string to_string() const;

private:
    ArtinianBca A_;
    std::map<std::string, BcaElement> eps_;
};

// finite length A-module: a basis adapted to the maximal-ideal filtration
// (ord ascending) and one action matrix per nilpotent variable, with entries
// constant along every differential direction of K
class FinLenModule {
public:
    FinLenModule() = default;
    // direct sum of cyclic quotients A/J_i; each J_i is a monomial ideal
    // containing the defining ideal of A
    static FinLenModule cyclic_sum(ArtinianBca A, std::vector<std::vector<Expvec>> summand_ideals);
    static FinLenModule regular(ArtinianBca A);
    // arbitrary constant action matrices, rebased to a filtration-adapted basis
    static FinLenModule from_action(ArtinianBca A,
                                    std::vector<std::vector<std::vector<Scalar>>> act,
                                    std::vector<std::string> labels);
    // module structure on functionals: transposed action, rebased
    FinLenModule dual() const;

    const ArtinianBca& algebra() const { return A_; }
    int length() const { return static_cast<int>(ord_.size()); }
    int ord(int i) const { return ord_[i]; }
    const std::vector<int>& ords() const { return ord_; }
    const std::vector<std::string>& labels() const { return labels_; }
    const std::vector<std::vector<Scalar>>& action(int v) const { return act_[v]; }
    // current basis expressed in the coordinates of the construction input
    const std::vector<std::vector<Scalar>>& basis_in_parent() const { return pres_; }

    // canonical-coordinate action of a on x
    std::vector<LaurentElement> act(const BcaElement& a,
                                    const std::vector<LaurentElement>& x) const;
    std::vector<LaurentElement> zero_coords() const;
    std::vector<LaurentElement> unit_coords(int i) const;

    bool equals(const FinLenModule& o) const; // same algebra, ords and action
    std::string to_string() const;

private:
    static FinLenModule attach(ArtinianBca A, std::vector<int> ord,
                               std::vector<std::vector<std::vector<Scalar>>> act,
                               std::vector<std::string> labels,
                               std::vector<std::vector<Scalar>> pres);
    static FinLenModule refiltered(const ArtinianBca& A,
                                   const std::vector<std::vector<std::vector<Scalar>>>& act,
                                   const std::vector<std::string>& labels,
                                   const std::vector<std::vector<Scalar>>& pres);

    ArtinianBca A_;
    std::vector<int> ord_;
    std::vector<std::vector<std::vector<Scalar>>> act_;
    std::vector<std::string> labels_;
    std::vector<std::vector<Scalar>> pres_;
};

// sigma-coordinates of y: the unique lambda with y = sum sigma(lambda_i) x_i
std::vector<LaurentElement> sigma_coords(const CoeffField& sigma, const FinLenModule& M,
                                         std::vector<LaurentElement> y);

// continuous sigma-semilinear functional M -> omega(K), stored by its values
// on the module basis
struct DualElement {
    FinLenModule M;
    CoeffField sigma;
    std::vector<Form> values;

    static DualElement make(FinLenModule M, CoeffField sigma, std::vector<Form> values);
    Form eval(const std::vector<LaurentElement>& y) const;
    DualElement act(const BcaElement& a) const; // (a.phi)(x) = phi(a x)
    DualElement operator+(const DualElement& o) const;
    DualElement scale(const LaurentElement& lambda) const; // (lambda.phi)(x) = lambda phi(x)
    bool operator==(const DualElement& o) const;
    bool operator!=(const DualElement& o) const { return !(*this == o); }
};

// the full-direction volume form dt_1^...^dv_m with unit coefficient
Form volume_form(const TlfDescriptor& K);

// residue pairing <x, phi> = phi(x), a top form over K
Form residue_pairing(const DualElement& phi, const std::vector<LaurentElement>& x);

// operator matrix of the semilinear expansion sum_i sigma(lambda_i) x_i in
// canonical coordinates: out_k = sum_i F[k][i](lambda_i); unitriangular in ord
DiffOpMatrix semilinear_matrix(const CoeffField& sigma, const FinLenModule& M);

// change of section: sigma2(lambda) x_i = sum_j sigma(D[i][j](lambda)) x_j,
// returned with rows indexed by i (stored transposed: at(j, i) = D_ij)
DiffOpMatrix dij_matrix(const CoeffField& sigma, const CoeffField& sigma2,
                        const FinLenModule& M);

// transport of a dual element to another section of the same algebra
DualElement psi(const CoeffField& sigma_to, const DualElement& phi);

// differential operator between finite length modules, presented through a
// section: D(sigma(lambda) x_i) = sum_j sigma(mat.at(i,j)(lambda)) y_j
struct ModuleDO {
    FinLenModule source, target;
    CoeffField sigma;
    DiffOpMatrix mat;

    static ModuleDO make(FinLenModule source, FinLenModule target, CoeffField sigma,
                         DiffOpMatrix mat);
    static ModuleDO identity(const FinLenModule& M, const CoeffField& sigma);
    static ModuleDO mult(const CoeffField& sigma, const FinLenModule& M, const BcaElement& a);
    static ModuleDO compose(const ModuleDO& later, const ModuleDO& first);
    std::vector<LaurentElement> apply(const std::vector<LaurentElement>& x) const;
    int order() const;
    bool is_zero() const;
};

// dual of a module operator on functionals: (dual D)(phi) = phi after D
DualElement dual_of_do(const ModuleDO& D, const DualElement& phi);

// the same dual operator at the module level, between the dual modules
// (canonical section only); applying it twice returns the original matrix
ModuleDO dual_do_module(const ModuleDO& D);

// the dualizing data of A: the regular module with its filtered dual basis
// delta_i(x_j) = delta_ij * volume_form(K)
struct DualizingData {
    FinLenModule M;
    std::vector<DualElement> dual_basis;
};
DualizingData k_dualizing(const ArtinianBca& A, const CoeffField& sigma);

// morphism of algebras: a tower extension on the coefficient fields followed
// by substitution of the nilpotent generators
struct BcaMorphism {
    ArtinianBca source, target;
    std::vector<MorphismStep> tower;  // K_source -> K_target, innermost last
    std::vector<BcaElement> images;   // per source nilpotent variable, nilpotent

    static BcaMorphism make(ArtinianBca source, ArtinianBca target,
                            std::vector<MorphismStep> tower, std::vector<BcaElement> images);
    static BcaMorphism compose(const BcaMorphism& later, const BcaMorphism& first);
    BcaElement apply(const BcaElement& a) const;
    BcaElement apply_mono(const Expvec& m) const;
};

// trace map along f: functionals on the target algebra pull back to the
// source: Tr(phi)(x) = Res along the tower of (phi transported to the section
// induced by f and sigma)(f(x)).  phi must be a functional on the regular
// module of the target.
DualElement trace_map(const BcaMorphism& f, const CoeffField& sigma, const DualElement& phi);

// twisted inverse image on finite length modules: dual over the target of
// (target tensor_source dual of M); monomial-image morphisms over a shared
// coefficient field only
FinLenModule f_sharp(const BcaMorphism& f, const FinLenModule& M);

// the separated de Rham complex of A (characteristic zero, canonical
// section): modules Omega^0..Omega^q_max and the differentials between them
struct DeRhamComplex {
    std::vector<FinLenModule> modules;
    std::vector<ModuleDO> differentials; // differentials[q]: Omega^q -> Omega^{q+1}
};
DeRhamComplex omega_complex(const ArtinianBca& A, int q_max);

// invertibility of the matrix of top-form pairings, decided exactly through
// evaluation of the coefficients at random rational points
bool gram_invertible(const TlfDescriptor& K, const std::vector<std::vector<Form>>& gram,
                     std::uint64_t seed);

} // namespace bca
