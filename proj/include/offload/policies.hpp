#ifndef OFFLOAD_POLICIES_HPP_
#define OFFLOAD_POLICIES_HPP_

#include <random>
#include <vector>

#include "offload/types.hpp"

namespace offload {

// Uniform over all four actions while budget remains, over actions 0-2 after.
Action random_policy(const OffloadState& state, std::mt19937_64& rng);

// Queries the robot whenever the cached prediction is missing or was captured
// >= hold steps ago; hold=1 queries every step.
Action all_robot_policy(const OffloadState& state, int hold = 1);

// Periodic cloud sampling with period ceil(T / budget), holding in between.
Action all_cloud_policy(const OffloadState& state, int t, int horizon, int budget);

struct ThresholdPolicyConfig {
  double q = 50.0;        // percentile the threshold was calibrated at
  double threshold = 0.5;  // robot confidence below this offloads
};

// q-th percentile (linear interpolation) of robot confidences pooled over the
// calibration traces.
ThresholdPolicyConfig calibrate_threshold(const std::vector<Trace>& traces, double q);

// Percentile helper shared with the calibration and reporting code.
double percentile(std::vector<double> values, double q);

Action threshold_policy(const OffloadState& state, double step_robot_conf,
                        const ThresholdPolicyConfig& cfg);

struct OraclePlan {
  std::vector<Action> actions;  // executed actions, one per step
  double value = 0.0;
};

// Exact clairvoyant optimum by finite-horizon dynamic programming over
// (t, budget left, robot cache source, cloud cache source). Ties break toward
// the smallest action code.
OraclePlan oracle_dp(const Trace& trace, const RewardParams& params, int budget,
                     int horizon_limit = 200);

// Exhaustive enumeration of all 4^T requested-action sequences, each run
// through the environment (budget remapping included). Test oracle; T <= 10.
OraclePlan brute_force_oracle(const Trace& trace, const RewardParams& params, int budget);

}  // namespace offload

#endif  // OFFLOAD_POLICIES_HPP_
