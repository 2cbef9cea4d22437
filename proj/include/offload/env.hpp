#ifndef OFFLOAD_ENV_HPP_
#define OFFLOAD_ENV_HPP_

#include <array>

#include "offload/types.hpp"

namespace offload {

inline constexpr int kStateDim = 9;

struct StepInfo {
  Action executed = Action::UsePastRobot;  // post-remap action that actually ran
  int loss = 0;
  std::optional<int> pred_label;
};

struct StepResult {
  OffloadState state;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

// Episodic offloading environment driven by a fixed trace. Transitions are
// deterministic given (trace, budget, action sequence). Value semantics:
// copies are independent; a single instance is not safe for concurrent
// mutation.
class EpisodeEnv {
 public:
  EpisodeEnv(Trace trace, int initial_budget, RewardParams params);

  // Prediction the given action would select at the current step. Pre-remap;
  // an empty cache legally resolves to (nullopt, 0).
  std::pair<std::optional<int>, double> resolve_prediction(Action a) const;

  // Advances one timestep. A QueryCloud request with no budget left executes
  // as QueryRobot. Throws std::logic_error once the episode is over.
  StepResult step(Action a);

  const OffloadState& state() const { return state_; }
  const Trace& trace() const { return trace_; }
  const RewardParams& params() const { return params_; }
  int t() const { return t_; }
  int horizon() const { return trace_.horizon(); }
  int initial_budget() const { return initial_budget_; }
  bool done() const { return t_ >= horizon(); }

 private:
  Trace trace_;
  RewardParams params_;
  int initial_budget_ = 0;
  int t_ = 0;
  OffloadState state_;
};

// Fixed 9-feature embedding of the MDP state for the policy network.
// phi values are divided by phi_scale; every entry is clamped to [0, 1].
std::array<double, kStateDim> encode_state(const OffloadState& state, int horizon,
                                           int initial_budget, double phi_scale);

}  // namespace offload

#endif  // OFFLOAD_ENV_HPP_
