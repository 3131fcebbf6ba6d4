#pragma once

#include <cstdint>

namespace bca {

// Deterministic PRNG (splitmix64).  We avoid <random> distributions on
// purpose: their outputs are implementation-defined, and verification
// reports promise byte-identical output for identical invocations.
struct Rng {
    std::uint64_t s;

    explicit Rng(std::uint64_t seed) : s(seed) {}

    std::uint64_t next() {
        s += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = s;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [lo, hi] inclusive (desk scale; modulo bias is irrelevant here
    // and the sequence stays platform-independent)
    std::int64_t uniform(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(next() % static_cast<std::uint64_t>(hi - lo + 1));
    }

    bool chance(unsigned num, unsigned den) { return next() % den < num; }
};

} // namespace bca
