#ifndef OFFLOAD_TYPES_HPP_
#define OFFLOAD_TYPES_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace offload {

// Per-step decision: reuse a cached prediction or pay for a fresh one.
// Integer codes are part of the wire/CSV contract, do not reorder.
enum class Action : int {
  UsePastRobot = 0,
  UsePastCloud = 1,
  QueryRobot = 2,
  QueryCloud = 3,
};

inline constexpr int kNumActions = 4;

inline Action to_action(int code) {
  if (code < 0 || code >= kNumActions) {
    throw std::out_of_range("action code out of range: " + std::to_string(code));
  }
  return static_cast<Action>(code);
}

inline int action_code(Action a) { return static_cast<int>(a); }

const char* action_name(Action a);

// One timestep of a prediction log: ground truth plus what each model
// would answer if queried at this step.
struct TraceStep {
  int true_label = 0;
  int robot_pred = 0;
  double robot_conf = 0.0;
  int cloud_pred = 0;
  double cloud_conf = 0.0;
  double phi = 0.0;  // frame-difference feature, >= 0
};

struct Trace {
  std::string id;
  std::uint64_t seed = 0;
  std::vector<TraceStep> steps;

  int horizon() const { return static_cast<int>(steps.size()); }
};

// Last answer obtained from one model. label is empty until the model
// has been queried at least once; empty label carries conf 0.
struct CachedPrediction {
  std::optional<int> label;
  double conf = 0.0;
  int age = 0;
};

struct OffloadState {
  double phi_now = 0.0;
  double phi_prev = 0.0;
  CachedPrediction robot_cache;
  CachedPrediction cloud_cache;
  int budget_left = 0;
  int time_left = 0;
};

struct RewardParams {
  double alpha = 1.0;  // accuracy weight
  double beta = 7.0;   // cost weight
  std::array<double, kNumActions> cost{0.0, 0.0, 0.4, 8.0};

  double cost_of(Action a) const { return cost[static_cast<size_t>(action_code(a))]; }
};

// Zero-one classification loss; an empty prediction always counts as wrong.
inline int loss01(std::optional<int> pred, int truth) {
  return (pred.has_value() && *pred == truth) ? 0 : 1;
}

inline double reward(const RewardParams& params, int loss, Action a) {
  return -params.alpha * static_cast<double>(loss) - params.beta * params.cost_of(a);
}

}  // namespace offload

#endif  // OFFLOAD_TYPES_HPP_
