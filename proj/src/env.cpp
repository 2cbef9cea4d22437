#include "offload/env.hpp"

#include <algorithm>
#include <cmath>

namespace offload {

const char* action_name(Action a) {
  switch (a) {
    case Action::UsePastRobot:
      return "use-past-robot";
    case Action::UsePastCloud:
      return "use-past-cloud";
    case Action::QueryRobot:
      return "query-robot";
    case Action::QueryCloud:
      return "query-cloud";
  }
  return "invalid";
}

EpisodeEnv::EpisodeEnv(Trace trace, int initial_budget, RewardParams params)
    : trace_(std::move(trace)), params_(params), initial_budget_(initial_budget) {
  if (trace_.steps.empty()) {
    throw std::invalid_argument("EpisodeEnv: trace is empty");
  }
  if (initial_budget_ < 0) {
    throw std::invalid_argument("EpisodeEnv: negative query budget");
  }
  const int T = horizon();
  // Empty caches carry an over-horizon age so encode_state saturates them.
  state_.robot_cache = CachedPrediction{std::nullopt, 0.0, T + 1};
  state_.cloud_cache = CachedPrediction{std::nullopt, 0.0, T + 1};
  state_.budget_left = initial_budget_;
  state_.time_left = T;
  state_.phi_now = trace_.steps[0].phi;
  state_.phi_prev = 0.0;
}

std::pair<std::optional<int>, double> EpisodeEnv::resolve_prediction(Action a) const {
  if (done()) {
    throw std::logic_error("resolve_prediction: episode is over");
  }
  const TraceStep& now = trace_.steps[static_cast<size_t>(t_)];
  switch (a) {
    case Action::UsePastRobot:
      return {state_.robot_cache.label, state_.robot_cache.conf};
    case Action::UsePastCloud:
      return {state_.cloud_cache.label, state_.cloud_cache.conf};
    case Action::QueryRobot:
      return {now.robot_pred, now.robot_conf};
    case Action::QueryCloud:
      return {now.cloud_pred, now.cloud_conf};
  }
  throw std::logic_error("resolve_prediction: invalid action");
}

StepResult EpisodeEnv::step(Action a) {
  if (done()) {
    throw std::logic_error("step: episode is over");
  }
  // Budget exhaustion remaps a cloud request onto the robot model.
  Action executed = a;
  if (executed == Action::QueryCloud && state_.budget_left == 0) {
    executed = Action::QueryRobot;
  }

  const TraceStep& now = trace_.steps[static_cast<size_t>(t_)];
  auto [pred, conf] = resolve_prediction(executed);
  const int loss = loss01(pred, now.true_label);
  const double r = reward(params_, loss, executed);

  switch (executed) {
    case Action::UsePastRobot:
    case Action::UsePastCloud:
      state_.robot_cache.age += 1;
      state_.cloud_cache.age += 1;
      break;
    case Action::QueryRobot:
      state_.robot_cache = CachedPrediction{now.robot_pred, now.robot_conf, 0};
      state_.cloud_cache.age += 1;
      break;
    case Action::QueryCloud:
      state_.cloud_cache = CachedPrediction{now.cloud_pred, now.cloud_conf, 0};
      state_.robot_cache.age += 1;
      state_.budget_left -= 1;
      break;
  }

  t_ += 1;
  state_.time_left -= 1;
  state_.phi_prev = state_.phi_now;
  const int T = horizon();
  state_.phi_now = (t_ < T) ? trace_.steps[static_cast<size_t>(t_)].phi : 0.0;

  StepResult out;
  out.state = state_;
  out.reward = r;
  out.done = (t_ == T);
  out.info = StepInfo{executed, loss, pred};
  return out;
}

namespace {
double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }
}  // namespace

std::array<double, kStateDim> encode_state(const OffloadState& state, int horizon,
                                           int initial_budget, double phi_scale) {
  const double T = static_cast<double>(std::max(1, horizon));
  const double scale = phi_scale > 0.0 ? phi_scale : 1.0;
  const bool agree = state.robot_cache.label.has_value() && state.cloud_cache.label.has_value() &&
                     *state.robot_cache.label == *state.cloud_cache.label;
  return {
      clamp01(state.phi_now / scale),
      clamp01(state.phi_prev / scale),
      clamp01(state.robot_cache.conf),
      clamp01(state.cloud_cache.conf),
      agree ? 1.0 : 0.0,
      std::min<double>(state.robot_cache.age, T) / T,
      std::min<double>(state.cloud_cache.age, T) / T,
      clamp01(static_cast<double>(state.budget_left) / std::max(1, initial_budget)),
      clamp01(static_cast<double>(state.time_left) / T),
  };
}

}  // namespace offload
