#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gdesigner {

/// One task of the synthetic benchmark. Queries follow fixed textual grammars
/// that the mock backend understands, so utility is computable offline.
struct SyntheticTask {
    std::string query;
    std::string category; // arith_easy | arith_hard | choice | relay
    std::string ground_truth;
    double difficulty = 0.0;
};

struct SuiteCounts {
    std::size_t arith_easy = 0;
    std::size_t arith_hard = 0;
    std::size_t choice = 0;
    std::size_t relay = 0;
};

/// Exact-match utility after answer normalization: 1.0 or 0.0.
double evaluate(const std::string& answer, const SyntheticTask& task);

/// Deterministic per seed. arith_easy: one-step additions. arith_hard:
/// three-step chained expressions that exceed any single agent's per-turn
/// capability. choice: four-option questions. relay: only the named
/// specialist role can produce the code.
std::vector<SyntheticTask> generate_suite(std::uint64_t seed, const SuiteCounts& counts,
                                          const std::string& specialist_role = "archivist");

} // namespace gdesigner
