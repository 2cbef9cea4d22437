#ifndef OFFLOAD_EVAL_HPP_
#define OFFLOAD_EVAL_HPP_

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "offload/env.hpp"
#include "offload/net.hpp"
#include "offload/policies.hpp"
#include "offload/types.hpp"

namespace offload {

// Per-episode decision maker. begin() is called right after the environment
// reset, act() once per step before the environment advances.
class EpisodePolicy {
 public:
  virtual ~EpisodePolicy() = default;
  virtual void begin(const EpisodeEnv& env) { (void)env; }
  virtual Action act(const EpisodeEnv& env) = 0;
};

struct EpisodeResult {
  std::string trace_id;
  std::string policy;
  double budget_fraction = 0.0;
  int budget = 0;
  int trial = 0;
  double total_reward = 0.0;  // -alpha * loss_sum - beta * cost_sum
  long loss_sum = 0;
  double cost_sum = 0.0;  // unweighted action costs, from action counts
  double step_reward_sum = 0.0;  // forward-accumulated per-step rewards
  std::array<long, kNumActions> action_counts{};
  std::vector<Action> action_log;  // executed actions
};

enum class PolicyRole { Baseline, Learned, Oracle };

// Named policy with a per-episode factory. Factories must be safe to call
// concurrently; stochastic policies get a distinct seed per (cell, trial).
struct PolicySpec {
  std::string name;
  PolicyRole role = PolicyRole::Baseline;
  bool stochastic = false;
  std::function<std::unique_ptr<EpisodePolicy>(const Trace& trace, int budget,
                                               std::uint64_t seed)>
      make;
};

PolicySpec make_random_spec();
PolicySpec make_all_robot_spec(int hold = 1);
PolicySpec make_all_cloud_spec();
PolicySpec make_threshold_spec(std::string name, ThresholdPolicyConfig cfg);
PolicySpec make_rl_greedy_spec(std::shared_ptr<const PolicyNet> actor, double phi_scale);
PolicySpec make_oracle_spec(RewardParams params);

// budget = round(budget_fraction * T). Policy/trial metadata is left for the
// caller to fill.
EpisodeResult run_episode(EpisodePolicy& policy, const Trace& trace, double budget_fraction,
                          const RewardParams& params);

struct PolicyAggregate {
  std::string policy;
  bool overall = false;          // true: pooled over all fractions
  double budget_fraction = 0.0;  // meaningful when !overall
  long n = 0;
  double median_reward = 0.0;
  double mean_reward = 0.0;
  double se95 = 0.0;  // 1.96 * sd / sqrt(n)
  double mean_loss = 0.0;
  double mean_cost = 0.0;
};

struct RatioRow {
  std::string policy;
  double median_reward = 0.0;
  double ratio_vs_oracle = 0.0;    // median(oracle) / median(policy)
  double ratio_vs_baseline = 0.0;  // median(best baseline) / median(policy)
};

struct BenchmarkReport {
  std::vector<EpisodeResult> episodes;  // policy-major, then trace, fraction, trial
  std::vector<PolicyAggregate> aggregates;
  std::vector<RatioRow> ratios;
  std::string best_baseline;
  std::string oracle_policy;
  long budget_violations = 0;
  long dominance_violations = 0;
  long decomposition_violations = 0;
};

struct BenchmarkConfig {
  std::vector<double> budget_fractions{0.10, 0.20, 0.50, 0.70, 1.0};
  int trials = 4;
  std::uint64_t seed = 1234;
  int jobs = 1;
};

// Evaluates every (policy, trace, fraction, trial) cell. Deterministic
// policies run once per cell and are replicated across trials. Results and
// aggregates are identical for any jobs count.
BenchmarkReport benchmark(const std::vector<PolicySpec>& policies,
                          const std::vector<Trace>& traces, const BenchmarkConfig& config,
                          const RewardParams& params);

// Writes rewards.csv, summary.csv, ratios.csv and a README describing the
// columns into dir (created if missing).
void export_report(const BenchmarkReport& report, const std::string& dir);

}  // namespace offload

#endif  // OFFLOAD_EVAL_HPP_
