#include "offload/policies.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "offload/env.hpp"

namespace offload {

Action random_policy(const OffloadState& state, std::mt19937_64& rng) {
  const int top = state.budget_left > 0 ? 3 : 2;
  std::uniform_int_distribution<int> pick(0, top);
  return to_action(pick(rng));
}

Action all_robot_policy(const OffloadState& state, int hold) {
  if (hold < 1) throw std::invalid_argument("all_robot_policy: hold must be >= 1");
  // age counts steps since the post-query state, so a prediction captured at
  // step tau is hold steps old when age + 1 == hold.
  if (!state.robot_cache.label.has_value() || state.robot_cache.age + 1 >= hold) {
    return Action::QueryRobot;
  }
  return Action::UsePastRobot;
}

Action all_cloud_policy(const OffloadState& state, int t, int horizon, int budget) {
  if (budget < 0) throw std::invalid_argument("all_cloud_policy: negative budget");
  if (budget == 0) return Action::UsePastCloud;
  const int period = (horizon + budget - 1) / budget;
  if (t % period == 0 && state.budget_left > 0) return Action::QueryCloud;
  return Action::UsePastCloud;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile: empty sample");
  if (q < 0.0 || q > 100.0) throw std::invalid_argument("percentile: q outside [0, 100]");
  std::sort(values.begin(), values.end());
  if (values.size() == 1) return values[0];
  const double rank = q / 100.0 * static_cast<double>(values.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(rank));
  const size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

ThresholdPolicyConfig calibrate_threshold(const std::vector<Trace>& traces, double q) {
  if (traces.empty()) throw std::invalid_argument("calibrate_threshold: no calibration traces");
  std::vector<double> confs;
  for (const Trace& trace : traces) {
    for (const TraceStep& step : trace.steps) confs.push_back(step.robot_conf);
  }
  return ThresholdPolicyConfig{q, percentile(std::move(confs), q)};
}

Action threshold_policy(const OffloadState& state, double step_robot_conf,
                        const ThresholdPolicyConfig& cfg) {
  if (step_robot_conf < cfg.threshold && state.budget_left > 0) return Action::QueryCloud;
  return Action::QueryRobot;
}

namespace {

// DP cache sources are encoded as src + 1, with 0 meaning "never queried".
inline size_t dp_index(int n, int isr, int isc, int width) {
  return (static_cast<size_t>(n) * static_cast<size_t>(width) + static_cast<size_t>(isr)) *
             static_cast<size_t>(width) +
         static_cast<size_t>(isc);
}

}  // namespace

OraclePlan oracle_dp(const Trace& trace, const RewardParams& params, int budget,
                     int horizon_limit) {
  const int T = trace.horizon();
  if (T == 0) throw std::invalid_argument("oracle_dp: trace is empty");
  if (T > horizon_limit) {
    throw std::length_error("oracle_dp: horizon " + std::to_string(T) + " exceeds limit " +
                            std::to_string(horizon_limit));
  }
  const int B = std::min(std::max(budget, 0), T);

  // Per-step reward of each prediction source against the step's truth.
  auto cached_robot_reward = [&](int src, int t) {
    const int loss =
        src < 0 ? 1 : loss01(trace.steps[static_cast<size_t>(src)].robot_pred,
                             trace.steps[static_cast<size_t>(t)].true_label);
    return reward(params, loss, Action::UsePastRobot);
  };
  auto cached_cloud_reward = [&](int src, int t) {
    const int loss =
        src < 0 ? 1 : loss01(trace.steps[static_cast<size_t>(src)].cloud_pred,
                             trace.steps[static_cast<size_t>(t)].true_label);
    return reward(params, loss, Action::UsePastCloud);
  };

  // Backward value iteration. value_next holds V at time t+1 indexed by
  // (n, src_robot + 1, src_cloud + 1) with sources in {-1, 0, .., t}.
  std::vector<double> value_next(static_cast<size_t>(B + 1) * static_cast<size_t>(T + 1) *
                                     static_cast<size_t>(T + 1),
                                 0.0);
  std::vector<double> value_cur(value_next.size(), 0.0);
  std::vector<std::vector<std::uint8_t>> choice(static_cast<size_t>(T));

  for (int t = T - 1; t >= 0; --t) {
    const int width_cur = t + 1;
    const int width_next = t + 2;
    auto& picks = choice[static_cast<size_t>(t)];
    picks.assign(static_cast<size_t>(B + 1) * static_cast<size_t>(width_cur) *
                     static_cast<size_t>(width_cur),
                 0);
    const TraceStep& now = trace.steps[static_cast<size_t>(t)];
    const double r_query_robot =
        reward(params, loss01(now.robot_pred, now.true_label), Action::QueryRobot);
    const double r_query_cloud =
        reward(params, loss01(now.cloud_pred, now.true_label), Action::QueryCloud);

    for (int n = 0; n <= B; ++n) {
      for (int isr = 0; isr < width_cur; ++isr) {
        const double r_use_robot = cached_robot_reward(isr - 1, t);
        for (int isc = 0; isc < width_cur; ++isc) {
          double best = r_use_robot + value_next[dp_index(n, isr, isc, width_next)];
          std::uint8_t best_a = 0;

          const double v1 =
              cached_cloud_reward(isc - 1, t) + value_next[dp_index(n, isr, isc, width_next)];
          if (v1 > best) {
            best = v1;
            best_a = 1;
          }
          const double v2 = r_query_robot + value_next[dp_index(n, t + 1, isc, width_next)];
          if (v2 > best) {
            best = v2;
            best_a = 2;
          }
          if (n > 0) {
            const double v3 =
                r_query_cloud + value_next[dp_index(n - 1, isr, t + 1, width_next)];
            if (v3 > best) {
              best = v3;
              best_a = 3;
            }
          }
          value_cur[dp_index(n, isr, isc, width_cur)] = best;
          picks[dp_index(n, isr, isc, width_cur)] = best_a;
        }
      }
    }
    std::swap(value_cur, value_next);
  }

  OraclePlan plan;
  plan.value = value_next[dp_index(B, 0, 0, 1)];
  plan.actions.reserve(static_cast<size_t>(T));
  int n = B, isr = 0, isc = 0;
  for (int t = 0; t < T; ++t) {
    const int width = t + 1;
    const Action a = to_action(choice[static_cast<size_t>(t)][dp_index(n, isr, isc, width)]);
    plan.actions.push_back(a);
    switch (a) {
      case Action::QueryRobot:
        isr = t + 1;
        break;
      case Action::QueryCloud:
        isc = t + 1;
        n -= 1;
        break;
      default:
        break;
    }
  }
  return plan;
}

OraclePlan brute_force_oracle(const Trace& trace, const RewardParams& params, int budget) {
  const int T = trace.horizon();
  if (T == 0) throw std::invalid_argument("brute_force_oracle: trace is empty");
  if (T > 10) {
    throw std::length_error("brute_force_oracle: horizon " + std::to_string(T) +
                            " exceeds brute-force limit 10");
  }

  std::vector<int> requested(static_cast<size_t>(T), 0);
  std::vector<double> rewards(static_cast<size_t>(T), 0.0);
  std::vector<Action> executed(static_cast<size_t>(T), Action::UsePastRobot);

  OraclePlan best;
  bool have_best = false;
  while (true) {
    EpisodeEnv env(trace, budget, params);
    for (int t = 0; t < T; ++t) {
      StepResult res = env.step(to_action(requested[static_cast<size_t>(t)]));
      rewards[static_cast<size_t>(t)] = res.reward;
      executed[static_cast<size_t>(t)] = res.info.executed;
    }
    // Summed back to front to match the DP accumulation order exactly.
    double total = 0.0;
    for (int t = T - 1; t >= 0; --t) total = rewards[static_cast<size_t>(t)] + total;
    if (!have_best || total > best.value) {
      best.value = total;
      best.actions = executed;
      have_best = true;
    }
    // Next sequence in lexicographic order.
    int pos = T - 1;
    while (pos >= 0 && requested[static_cast<size_t>(pos)] == kNumActions - 1) {
      requested[static_cast<size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
    requested[static_cast<size_t>(pos)] += 1;
  }
  return best;
}

}  // namespace offload
