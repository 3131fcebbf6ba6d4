#pragma once

// Continuous differential operators on an iterated Laurent field K, kept in
// the normal form  sum_beta a_beta D^beta  with every derivative to the right
// of its coefficient.  beta is a multi-index over the differential directions
// of K (Laurent variables first, then function variables).  Composition uses
// the Leibniz rule and re-normalizes.  On top of the ring: the transpose
// anti-automorphism, the right action on top forms that makes omega(K) a
// right module, and rectangular operator matrices.

#include "forms.hpp"
#include "series.hpp"

#include <map>
#include <string>
#include <vector>

namespace bca {

class DiffOp {
public:
    DiffOp() = default;

    static DiffOp zero(const TlfDescriptor& K);
    static DiffOp identity(const TlfDescriptor& K);
    static DiffOp of_element(LaurentElement a); // multiplication by a
    static DiffOp partial(const TlfDescriptor& K, const std::string& dir);
    // a * D^beta; beta indexed like TlfDescriptor::all_dirs()
    static DiffOp term(LaurentElement a, Expvec beta);
    static DiffOp from_terms(const TlfDescriptor& K,
                             std::map<Expvec, LaurentElement, LexLess> terms);

    const TlfDescriptor& tlf() const { return K_; }
    const std::map<Expvec, LaurentElement, LexLess>& terms() const { return t_; }
    LaurentElement coeff(const Expvec& beta) const; // zero when absent
    bool is_zero() const;
    int order() const; // max |beta|, -1 for the zero operator

    DiffOp operator+(const DiffOp& o) const;
    DiffOp operator-(const DiffOp& o) const;
    DiffOp operator-() const;
    DiffOp operator*(const DiffOp& o) const; // composition: (D*E)(x) = D(E(x))
    DiffOp scale(const LaurentElement& a) const; // left multiply by a
    DiffOp scale_scalar(const Scalar& c) const;

    LaurentElement apply(const LaurentElement& x) const;

    bool operator==(const DiffOp& o) const;
    bool operator!=(const DiffOp& o) const { return !(*this == o); }
    std::string to_string() const; // e.g. "t*Dt^2 + s*Ds + 1"

private:
    void put(const Expvec& beta, const LaurentElement& a);

    TlfDescriptor K_;
    std::map<Expvec, LaurentElement, LexLess> t_;
};

// commutator [D, a] = D a - a D with a multiplication operator
DiffOp element_commutator(const DiffOp& D, const LaurentElement& a);

// iterated commutators [..[[D, a_0], a_1].., a_k] against multiplication
// operators; true when the fully iterated commutator is the zero operator.
// Supplying order(D)+1 elements must always yield true.
bool commutator_order_check(const DiffOp& D, const std::vector<LaurentElement>& elts);

// transpose anti-automorphism: a -> a, D_v -> -D_v
DiffOp transpose(const DiffOp& D);

// right action on top forms: alpha * (a D^beta) = (-1)^{|beta|} L^beta(a alpha)
// with L the coordinate Lie derivatives; alpha * (D E) = (alpha * D) * E
Form right_action(const Form& top, const DiffOp& D);

class DiffOpMatrix {
public:
    DiffOpMatrix() = default;
    static DiffOpMatrix zeros(const TlfDescriptor& K, int rows, int cols);
    static DiffOpMatrix identity(const TlfDescriptor& K, int n);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    const TlfDescriptor& tlf() const { return K_; }
    const DiffOp& at(int i, int j) const;
    void set(int i, int j, DiffOp d);

    DiffOpMatrix operator+(const DiffOpMatrix& o) const;
    DiffOpMatrix operator-() const;
    // (A*B)[i][k] = sum_j A[i][j] * B[j][k], entrywise composition
    DiffOpMatrix operator*(const DiffOpMatrix& o) const;
    bool operator==(const DiffOpMatrix& o) const;
    bool operator!=(const DiffOpMatrix& o) const { return !(*this == o); }
    bool is_zero() const;

    // inverse of I + N with N nilpotent (Neumann series); ShapeError when the
    // strictly triangular part fails to vanish within size() steps
    DiffOpMatrix inverse_unitriangular() const;

private:
    TlfDescriptor K_;
    int rows_ = 0, cols_ = 0;
    std::vector<DiffOp> e_; // row major
};

} // namespace bca
