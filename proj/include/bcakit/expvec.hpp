#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

namespace bca {

// Exponent tuples.  Used both for monomials of polynomial scalars and for
// the exponents of Laurent terms; the comparator differs per use.
using Expvec = std::vector<std::int32_t>;

inline Expvec expvec_add(const Expvec& a, const Expvec& b) {
    Expvec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

inline Expvec expvec_sub(const Expvec& a, const Expvec& b) {
    Expvec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline Expvec expvec_neg(const Expvec& a) {
    Expvec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = -a[i];
    return r;
}

inline std::int64_t expvec_total(const Expvec& a) {
    return std::accumulate(a.begin(), a.end(), std::int64_t{0});
}

inline bool expvec_is_zero(const Expvec& a) {
    return std::all_of(a.begin(), a.end(), [](std::int32_t e) { return e == 0; });
}

// a <= b componentwise (a divides b, for nonnegative exponents).
inline bool expvec_leq(const Expvec& a, const Expvec& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] > b[i]) return false;
    return true;
}

// Plain lexicographic order, first coordinate most significant.  This is the
// term order of the iterated-Laurent structure (outermost variable first).
struct LexLess {
    bool operator()(const Expvec& a, const Expvec& b) const {
        return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
    }
};

// Graded lex: total degree first, then lex.  Fixed monomial order for
// polynomial normal forms (monic denominators, leading coefficients).
struct GrlexLess {
    bool operator()(const Expvec& a, const Expvec& b) const {
        auto ta = expvec_total(a), tb = expvec_total(b);
        if (ta != tb) return ta < tb;
        return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
    }
};

} // namespace bca
