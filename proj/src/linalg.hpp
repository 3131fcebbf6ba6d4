#pragma once

// Small dense exact linear algebra over the Scalar field.  Everything here
// divides freely (Scalar is a field), so no fraction-free tricks are needed.

#include "bcakit/errors.hpp"
#include "bcakit/scalar.hpp"

#include <vector>

namespace bca {

using ScalarMat = std::vector<std::vector<Scalar>>;

inline ScalarMat mat_zero(const FieldPtr& f, int rows, int cols) {
    return ScalarMat(rows, std::vector<Scalar>(cols, Scalar::zero(f)));
}

inline ScalarMat mat_identity(const FieldPtr& f, int n) {
    ScalarMat m = mat_zero(f, n, n);
    for (int i = 0; i < n; ++i) m[i][i] = Scalar::one(f);
    return m;
}

inline ScalarMat mat_mul(const ScalarMat& a, const ScalarMat& b) {
    if (a.empty() || b.empty()) return {};
    std::size_t n = a.size(), k = b.size(), m = b[0].size();
    if (a[0].size() != k) throw ShapeError("matrix shapes do not compose");
    ScalarMat r(n, std::vector<Scalar>(m, Scalar::zero(a[0][0].field())));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            if (a[i][j].is_zero()) continue;
            for (std::size_t l = 0; l < m; ++l) r[i][l] = r[i][l] + a[i][j] * b[j][l];
        }
    return r;
}

inline ScalarMat mat_transpose(const ScalarMat& a) {
    if (a.empty() || a[0].empty()) return {};
    ScalarMat r(a[0].size(), std::vector<Scalar>(a.size(), a[0][0]));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[0].size(); ++j) r[j][i] = a[i][j];
    return r;
}

// Column echelon form of a span: each kept column has a unit pivot at a
// distinct row (increasing down the matrix) and zeros at every other pivot
// row, so reduction against it is a single sweep.
struct Echelon {
    FieldPtr field;
    ScalarMat cols;           // rows x rank
    std::vector<int> pivots;  // pivot row of each column, strictly increasing

    int rank() const { return static_cast<int>(pivots.size()); }

    // v minus its span component: zero at every pivot row afterwards
    std::vector<Scalar> reduce(std::vector<Scalar> v) const {
        for (std::size_t j = 0; j < pivots.size(); ++j) {
            Scalar c = v[pivots[j]];
            if (c.is_zero()) continue;
            for (std::size_t r = 0; r < v.size(); ++r) v[r] = v[r] - cols[r][j] * c;
        }
        return v;
    }

    bool contains(const std::vector<Scalar>& v) const {
        for (const auto& c : reduce(v))
            if (!c.is_zero()) return false;
        return true;
    }

    // absorb one more vector; true when it enlarged the span
    bool add(const std::vector<Scalar>& v) {
        auto w = reduce(v);
        int p = -1;
        for (std::size_t r = 0; r < w.size(); ++r)
            if (!w[r].is_zero()) {
                p = static_cast<int>(r);
                break;
            }
        if (p < 0) return false;
        Scalar inv = w[p].inv();
        for (auto& c : w) c = c * inv;
        // clear the new pivot row from the existing columns
        for (std::size_t j = 0; j < pivots.size(); ++j) {
            Scalar c = cols[p][j];
            if (c.is_zero()) continue;
            for (std::size_t r = 0; r < w.size(); ++r)
                cols[r][j] = cols[r][j] - w[r] * c;
        }
        std::size_t at = 0;
        while (at < pivots.size() && pivots[at] < p) ++at;
        pivots.insert(pivots.begin() + at, p);
        if (cols.empty()) cols.assign(w.size(), {});
        for (std::size_t r = 0; r < w.size(); ++r)
            cols[r].insert(cols[r].begin() + at, w[r]);
        return true;
    }
};

inline Echelon echelonize(const FieldPtr& f, std::size_t rows, const ScalarMat& vec_cols) {
    Echelon e;
    e.field = f;
    e.cols.assign(rows, {});
    if (!vec_cols.empty() && !vec_cols[0].empty()) {
        std::size_t n = vec_cols[0].size();
        for (std::size_t j = 0; j < n; ++j) {
            std::vector<Scalar> v;
            v.reserve(rows);
            for (std::size_t r = 0; r < rows; ++r) v.push_back(vec_cols[r][j]);
            e.add(v);
        }
    }
    return e;
}

inline int mat_rank(const FieldPtr& f, const ScalarMat& a) {
    if (a.empty() || a[0].empty()) return 0;
    return echelonize(f, a.size(), a).rank();
}

inline ScalarMat mat_inverse(const FieldPtr& f, const ScalarMat& a) {
    std::size_t n = a.size();
    ScalarMat work = a;
    ScalarMat inv = mat_identity(f, static_cast<int>(n));
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t p = c;
        while (p < n && work[p][c].is_zero()) ++p;
        if (p == n) throw ShapeError("matrix is singular");
        std::swap(work[p], work[c]);
        std::swap(inv[p], inv[c]);
        Scalar d = work[c][c].inv();
        for (std::size_t j = 0; j < n; ++j) {
            work[c][j] = work[c][j] * d;
            inv[c][j] = inv[c][j] * d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == c || work[r][c].is_zero()) continue;
            Scalar fct = work[r][c];
            for (std::size_t j = 0; j < n; ++j) {
                work[r][j] = work[r][j] - work[c][j] * fct;
                inv[r][j] = inv[r][j] - inv[c][j] * fct;
            }
        }
    }
    return inv;
}

inline bool mat_invertible(const FieldPtr& f, const ScalarMat& a) {
    if (a.empty()) return true;
    if (a.size() != a[0].size()) return false;
    return mat_rank(f, a) == static_cast<int>(a.size());
}

} // namespace bca
