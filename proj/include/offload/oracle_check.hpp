#ifndef OFFLOAD_ORACLE_CHECK_HPP_
#define OFFLOAD_ORACLE_CHECK_HPP_

#include <cstdint>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "offload/policies.hpp"
#include "offload/types.hpp"

namespace offload {

struct OracleCheckMismatch {
  Trace trace;
  RewardParams params;
  int budget = 0;
  double dp_value = 0.0;
  double bf_value = 0.0;
  std::vector<Action> dp_actions;
  std::vector<Action> bf_actions;
};

struct OracleCheckResult {
  int cases = 0;
  int matched = 0;
  std::optional<OracleCheckMismatch> first_mismatch;

  bool all_match() const { return matched == cases; }
};

// Randomized short-horizon instances (T in [2, 8], budgets 0-3, randomized
// reward weights); the DP value must equal the brute-force value exactly.
OracleCheckResult oracle_cross_check(int cases, std::uint64_t seed);

// Counterexample serialization for replay.
nlohmann::json mismatch_to_json(const OracleCheckMismatch& m);
OracleCheckMismatch mismatch_from_json(const nlohmann::json& j);

// Re-runs both oracles on a stored instance.
OracleCheckMismatch replay_instance(const Trace& trace, const RewardParams& params, int budget);

}  // namespace offload

#endif  // OFFLOAD_ORACLE_CHECK_HPP_
