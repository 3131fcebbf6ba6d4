#pragma once

// Seeded property-verification campaigns.  Each suite draws randomized cases
// (bounded sparse supports, small exponents, small nilpotency degrees) and
// checks one identity with exact equality.  Case generation depends only on
// (seed, case index), so identical invocations reproduce reports
// bit-for-bit.  Witnesses carry the drawn inputs plus, where the objects fit
// the expression grammar, eval commands that recompute every recorded value.

#include "bca.hpp"
#include "intensify.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace bca {

struct VerifyCase {
    std::uint64_t seed = 0; // per-case sub-seed
    bool pass = false;
    std::vector<std::pair<std::string, int>> size;            // named size parameters
    std::vector<std::pair<std::string, std::string>> inputs;  // label -> canonical text
    std::vector<std::pair<std::string, std::string>> steps;   // eval command -> its output
    std::string lhs, rhs;                                     // both sides, canonical text
};

struct SuiteReport {
    std::string suite;
    std::uint64_t seed = 0;
    int window = 0;
    bool ok = true;
    std::vector<VerifyCase> cases;
};

struct SuiteInfo {
    std::string name;
    std::string summary;
    int default_cases = 0;
    SuiteReport (*run)(std::uint64_t seed, int cases, int window);
};

const std::vector<SuiteInfo>& suite_registry();
const SuiteInfo* find_suite(const std::string& name);

} // namespace bca
