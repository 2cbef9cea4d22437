#include "offload/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include "offload/util.hpp"

namespace offload {

namespace {

class RandomEpisodePolicy : public EpisodePolicy {
 public:
  explicit RandomEpisodePolicy(std::uint64_t seed) : rng_(seed) {}
  Action act(const EpisodeEnv& env) override { return random_policy(env.state(), rng_); }

 private:
  std::mt19937_64 rng_;
};

class AllRobotEpisodePolicy : public EpisodePolicy {
 public:
  explicit AllRobotEpisodePolicy(int hold) : hold_(hold) {}
  Action act(const EpisodeEnv& env) override { return all_robot_policy(env.state(), hold_); }

 private:
  int hold_;
};

class AllCloudEpisodePolicy : public EpisodePolicy {
 public:
  Action act(const EpisodeEnv& env) override {
    return all_cloud_policy(env.state(), env.t(), env.horizon(), env.initial_budget());
  }
};

class ThresholdEpisodePolicy : public EpisodePolicy {
 public:
  explicit ThresholdEpisodePolicy(ThresholdPolicyConfig cfg) : cfg_(cfg) {}
  Action act(const EpisodeEnv& env) override {
    // Conceptually the robot model runs every step; the policy reads its
    // confidence on the current frame.
    const double conf = env.trace().steps[static_cast<size_t>(env.t())].robot_conf;
    return threshold_policy(env.state(), conf, cfg_);
  }

 private:
  ThresholdPolicyConfig cfg_;
};

class GreedyRlEpisodePolicy : public EpisodePolicy {
 public:
  GreedyRlEpisodePolicy(std::shared_ptr<const PolicyNet> actor, double phi_scale)
      : actor_(std::move(actor)), phi_scale_(phi_scale), state_(actor_->zero_state()) {}
  void begin(const EpisodeEnv& env) override {
    (void)env;
    state_ = actor_->zero_state();
  }
  Action act(const EpisodeEnv& env) override {
    const auto encoded =
        encode_state(env.state(), env.horizon(), env.initial_budget(), phi_scale_);
    const Eigen::Map<const Eigen::VectorXd> x(encoded.data(), kStateDim);
    const Eigen::VectorXd probs = actor_->step_forward(x, state_);
    return to_action(argmax_action_index(probs));
  }

 private:
  static int argmax_action_index(const Eigen::VectorXd& probs) {
    int best = 0;
    for (int i = 1; i < probs.size(); ++i) {
      if (probs(i) > probs(best)) best = i;
    }
    return best;
  }

  std::shared_ptr<const PolicyNet> actor_;
  double phi_scale_;
  LstmState state_;
};

class ScriptedEpisodePolicy : public EpisodePolicy {
 public:
  explicit ScriptedEpisodePolicy(std::vector<Action> actions) : actions_(std::move(actions)) {}
  Action act(const EpisodeEnv& env) override {
    return actions_.at(static_cast<size_t>(env.t()));
  }

 private:
  std::vector<Action> actions_;
};

}  // namespace

PolicySpec make_random_spec() {
  return PolicySpec{"random", PolicyRole::Baseline, true,
                    [](const Trace&, int, std::uint64_t seed) {
                      return std::make_unique<RandomEpisodePolicy>(seed);
                    }};
}

PolicySpec make_all_robot_spec(int hold) {
  return PolicySpec{"all-robot", PolicyRole::Baseline, false,
                    [hold](const Trace&, int, std::uint64_t) {
                      return std::make_unique<AllRobotEpisodePolicy>(hold);
                    }};
}

PolicySpec make_all_cloud_spec() {
  return PolicySpec{"all-cloud", PolicyRole::Baseline, false,
                    [](const Trace&, int, std::uint64_t) {
                      return std::make_unique<AllCloudEpisodePolicy>();
                    }};
}

PolicySpec make_threshold_spec(std::string name, ThresholdPolicyConfig cfg) {
  return PolicySpec{std::move(name), PolicyRole::Baseline, false,
                    [cfg](const Trace&, int, std::uint64_t) {
                      return std::make_unique<ThresholdEpisodePolicy>(cfg);
                    }};
}

PolicySpec make_rl_greedy_spec(std::shared_ptr<const PolicyNet> actor, double phi_scale) {
  return PolicySpec{"rl", PolicyRole::Learned, false,
                    [actor, phi_scale](const Trace&, int, std::uint64_t) {
                      return std::make_unique<GreedyRlEpisodePolicy>(actor, phi_scale);
                    }};
}

PolicySpec make_oracle_spec(RewardParams params) {
  return PolicySpec{"oracle", PolicyRole::Oracle, false,
                    [params](const Trace& trace, int budget, std::uint64_t) {
                      OraclePlan plan = oracle_dp(trace, params, budget);
                      return std::make_unique<ScriptedEpisodePolicy>(std::move(plan.actions));
                    }};
}

EpisodeResult run_episode(EpisodePolicy& policy, const Trace& trace, double budget_fraction,
                          const RewardParams& params) {
  const int T = trace.horizon();
  const int budget = static_cast<int>(std::lround(budget_fraction * T));
  if (budget > T) throw std::invalid_argument("run_episode: budget exceeds horizon");

  EpisodeEnv env(trace, budget, params);
  policy.begin(env);

  EpisodeResult result;
  result.trace_id = trace.id;
  result.budget_fraction = budget_fraction;
  result.budget = budget;
  result.action_log.reserve(static_cast<size_t>(T));
  while (!env.done()) {
    const Action a = policy.act(env);
    const StepResult res = env.step(a);
    result.action_counts[static_cast<size_t>(action_code(res.info.executed))] += 1;
    result.action_log.push_back(res.info.executed);
    result.loss_sum += res.info.loss;
    result.step_reward_sum += res.reward;
  }
  // Canonical total from the decomposition: action-count order is fixed, so
  // equal-valued episodes produce bit-identical totals.
  result.cost_sum = 0.0;
  for (int a = 0; a < kNumActions; ++a) {
    result.cost_sum += static_cast<double>(result.action_counts[static_cast<size_t>(a)]) *
                       params.cost[static_cast<size_t>(a)];
  }
  result.total_reward =
      -params.alpha * static_cast<double>(result.loss_sum) - params.beta * result.cost_sum;
  return result;
}

namespace {

double median_of(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

PolicyAggregate aggregate_slice(const std::string& policy, bool overall, double fraction,
                                const std::vector<const EpisodeResult*>& slice) {
  PolicyAggregate agg;
  agg.policy = policy;
  agg.overall = overall;
  agg.budget_fraction = fraction;
  agg.n = static_cast<long>(slice.size());
  std::vector<double> rewards;
  rewards.reserve(slice.size());
  double sum = 0.0, loss = 0.0, cost = 0.0;
  for (const EpisodeResult* r : slice) {
    rewards.push_back(r->total_reward);
    sum += r->total_reward;
    loss += static_cast<double>(r->loss_sum);
    cost += r->cost_sum;
  }
  const double n = static_cast<double>(slice.size());
  agg.mean_reward = sum / n;
  agg.mean_loss = loss / n;
  agg.mean_cost = cost / n;
  double sq = 0.0;
  for (double r : rewards) sq += (r - agg.mean_reward) * (r - agg.mean_reward);
  const double sd = slice.size() > 1 ? std::sqrt(sq / (n - 1.0)) : 0.0;
  agg.se95 = 1.96 * sd / std::sqrt(n);
  agg.median_reward = median_of(std::move(rewards));
  return agg;
}

}  // namespace

BenchmarkReport benchmark(const std::vector<PolicySpec>& policies,
                          const std::vector<Trace>& traces, const BenchmarkConfig& config,
                          const RewardParams& params) {
  if (policies.empty()) throw std::invalid_argument("benchmark: no policies");
  if (traces.empty()) throw std::invalid_argument("benchmark: no traces");
  if (config.trials < 1) throw std::invalid_argument("benchmark: trials must be >= 1");

  const size_t num_fractions = config.budget_fractions.size();
  const size_t trials = static_cast<size_t>(config.trials);
  const size_t per_policy = traces.size() * num_fractions * trials;

  BenchmarkReport report;
  report.episodes.resize(policies.size() * per_policy);

  auto slot = [&](size_t p, size_t tr, size_t fr, size_t trial) {
    return ((p * traces.size() + tr) * num_fractions + fr) * trials + trial;
  };

  // Unique runs: deterministic policies only run trial 0 of each cell.
  struct Run {
    size_t p, tr, fr, trial;
  };
  std::vector<Run> runs;
  for (size_t p = 0; p < policies.size(); ++p) {
    const size_t cell_trials = policies[p].stochastic ? trials : 1;
    for (size_t tr = 0; tr < traces.size(); ++tr) {
      for (size_t fr = 0; fr < num_fractions; ++fr) {
        for (size_t trial = 0; trial < cell_trials; ++trial) {
          runs.push_back(Run{p, tr, fr, trial});
        }
      }
    }
  }

  std::atomic<size_t> next{0};
  std::atomic<bool> failed{false};
  std::string failure;
  std::mutex failure_mutex;
  auto worker = [&]() {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= runs.size() || failed.load()) break;
      const Run& run = runs[i];
      try {
        const PolicySpec& spec = policies[run.p];
        const Trace& trace = traces[run.tr];
        const double fraction = config.budget_fractions[run.fr];
        const int budget =
            static_cast<int>(std::lround(fraction * trace.horizon()));
        const std::uint64_t seed = mix_seed(
            config.seed, {run.p, run.tr, run.fr, run.trial});
        auto policy = spec.make(trace, budget, seed);
        EpisodeResult result = run_episode(*policy, trace, fraction, params);
        result.policy = spec.name;
        result.trial = static_cast<int>(run.trial);
        report.episodes[slot(run.p, run.tr, run.fr, run.trial)] = std::move(result);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        failed.store(true);
        if (failure.empty()) failure = e.what();
      }
    }
  };

  const int jobs = std::max(1, config.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(jobs));
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (failed.load()) throw std::runtime_error("benchmark: " + failure);

  // Replicate deterministic cells across trials for weighting parity.
  for (size_t p = 0; p < policies.size(); ++p) {
    if (policies[p].stochastic) continue;
    for (size_t tr = 0; tr < traces.size(); ++tr) {
      for (size_t fr = 0; fr < num_fractions; ++fr) {
        const EpisodeResult& base = report.episodes[slot(p, tr, fr, 0)];
        for (size_t trial = 1; trial < trials; ++trial) {
          EpisodeResult copy = base;
          copy.trial = static_cast<int>(trial);
          report.episodes[slot(p, tr, fr, trial)] = std::move(copy);
        }
      }
    }
  }

  // Invariant audits over every episode row.
  size_t oracle_idx = policies.size();
  for (size_t p = 0; p < policies.size(); ++p) {
    if (policies[p].role == PolicyRole::Oracle) oracle_idx = p;
  }
  for (const EpisodeResult& r : report.episodes) {
    if (r.action_counts[static_cast<size_t>(action_code(Action::QueryCloud))] > r.budget) {
      report.budget_violations += 1;
    }
    if (std::abs(r.step_reward_sum - r.total_reward) > 1e-9) {
      report.decomposition_violations += 1;
    }
  }
  if (oracle_idx < policies.size()) {
    report.oracle_policy = policies[oracle_idx].name;
    for (size_t p = 0; p < policies.size(); ++p) {
      if (p == oracle_idx) continue;
      for (size_t i = 0; i < per_policy; ++i) {
        const double oracle_reward = report.episodes[oracle_idx * per_policy + i].total_reward;
        const double policy_reward = report.episodes[p * per_policy + i].total_reward;
        if (policy_reward > oracle_reward + 1e-9) report.dominance_violations += 1;
      }
    }
  }

  // Aggregates: one overall row per policy, then per-fraction rows.
  for (size_t p = 0; p < policies.size(); ++p) {
    std::vector<const EpisodeResult*> all;
    all.reserve(per_policy);
    for (size_t i = 0; i < per_policy; ++i) all.push_back(&report.episodes[p * per_policy + i]);
    report.aggregates.push_back(aggregate_slice(policies[p].name, true, 0.0, all));
    for (size_t fr = 0; fr < num_fractions; ++fr) {
      std::vector<const EpisodeResult*> slice;
      slice.reserve(traces.size() * trials);
      for (size_t tr = 0; tr < traces.size(); ++tr) {
        for (size_t trial = 0; trial < trials; ++trial) {
          slice.push_back(&report.episodes[slot(p, tr, fr, trial)]);
        }
      }
      report.aggregates.push_back(
          aggregate_slice(policies[p].name, false, config.budget_fractions[fr], slice));
    }
  }

  // Ratio table against the oracle and the best baseline, by overall median.
  // Rewards are negative, so ratio = median(reference) / median(policy) reads
  // "x times better than the reference" when > 1.
  auto overall_median = [&](size_t p) { return report.aggregates[p * (num_fractions + 1)].median_reward; };
  size_t best_baseline_idx = policies.size();
  for (size_t p = 0; p < policies.size(); ++p) {
    if (policies[p].role != PolicyRole::Baseline) continue;
    if (best_baseline_idx == policies.size() ||
        overall_median(p) > overall_median(best_baseline_idx)) {
      best_baseline_idx = p;
    }
  }
  if (best_baseline_idx < policies.size()) report.best_baseline = policies[best_baseline_idx].name;
  auto safe_ratio = [](double reference, double value) {
    return value == 0.0 ? std::numeric_limits<double>::quiet_NaN() : reference / value;
  };
  for (size_t p = 0; p < policies.size(); ++p) {
    RatioRow row;
    row.policy = policies[p].name;
    row.median_reward = overall_median(p);
    row.ratio_vs_oracle = oracle_idx < policies.size()
                              ? safe_ratio(overall_median(oracle_idx), row.median_reward)
                              : std::numeric_limits<double>::quiet_NaN();
    row.ratio_vs_baseline = best_baseline_idx < policies.size()
                                ? safe_ratio(overall_median(best_baseline_idx), row.median_reward)
                                : std::numeric_limits<double>::quiet_NaN();
    report.ratios.push_back(std::move(row));
  }
  return report;
}

void export_report(const BenchmarkReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("export_report: cannot create " + dir + ": " + ec.message());

  const std::string rewards_path = dir + "/rewards.csv";
  {
    std::ofstream out(rewards_path, std::ios::binary);
    if (!out) throw std::runtime_error("export_report: cannot open " + rewards_path);
    out << "policy,trace,fraction,trial,total_reward,loss_sum,cost_sum\n";
    for (const EpisodeResult& r : report.episodes) {
      out << r.policy << ',' << r.trace_id << ',' << format_double(r.budget_fraction) << ','
          << r.trial << ',' << format_double(r.total_reward) << ',' << r.loss_sum << ','
          << format_double(r.cost_sum) << '\n';
    }
    if (!out) throw std::runtime_error("export_report: write failed for " + rewards_path);
  }

  const std::string summary_path = dir + "/summary.csv";
  {
    std::ofstream out(summary_path, std::ios::binary);
    if (!out) throw std::runtime_error("export_report: cannot open " + summary_path);
    out << "policy,fraction,n,median_reward,mean_reward,se95,mean_loss,mean_cost\n";
    for (const PolicyAggregate& a : report.aggregates) {
      out << a.policy << ',' << (a.overall ? "all" : format_double(a.budget_fraction)) << ','
          << a.n << ',' << format_double(a.median_reward) << ',' << format_double(a.mean_reward)
          << ',' << format_double(a.se95) << ',' << format_double(a.mean_loss) << ','
          << format_double(a.mean_cost) << '\n';
    }
    if (!out) throw std::runtime_error("export_report: write failed for " + summary_path);
  }

  const std::string ratios_path = dir + "/ratios.csv";
  {
    std::ofstream out(ratios_path, std::ios::binary);
    if (!out) throw std::runtime_error("export_report: cannot open " + ratios_path);
    out << "policy,median_reward,ratio_vs_oracle,ratio_vs_best_baseline\n";
    for (const RatioRow& r : report.ratios) {
      out << r.policy << ',' << format_double(r.median_reward) << ','
          << format_double(r.ratio_vs_oracle) << ',' << format_double(r.ratio_vs_baseline)
          << '\n';
    }
    if (!out) throw std::runtime_error("export_report: write failed for " + ratios_path);
  }

  const std::string readme_path = dir + "/README.md";
  {
    std::ofstream out(readme_path, std::ios::binary);
    if (!out) throw std::runtime_error("export_report: cannot open " + readme_path);
    out << "# Benchmark report\n"
           "\n"
           "All rewards are non-positive; closer to zero is better. Values are\n"
           "written with enough digits to re-parse to the exact double.\n"
           "\n"
           "## rewards.csv\n"
           "One row per evaluated episode.\n"
           "- policy: policy name\n"
           "- trace: trace id\n"
           "- fraction: query budget as a fraction of the horizon\n"
           "- trial: trial index (deterministic policies repeat the same episode)\n"
           "- total_reward: -alpha * loss_sum - beta * cost_sum\n"
           "- loss_sum: number of misclassified steps\n"
           "- cost_sum: summed unweighted action costs\n"
           "\n"
           "## summary.csv\n"
           "Aggregates per policy; fraction \"all\" pools every budget fraction.\n"
           "- n: episode count in the slice\n"
           "- median_reward, mean_reward: distribution statistics\n"
           "- se95: 1.96 * sd / sqrt(n)\n"
           "- mean_loss, mean_cost: mean reward decomposition\n"
           "\n"
           "## ratios.csv\n"
           "Overall-median ratios: ratio_vs_oracle = median(oracle) / median(policy),\n"
           "ratio_vs_best_baseline likewise against ";
    out << (report.best_baseline.empty() ? std::string("the best baseline") : report.best_baseline);
    out << ".\nWith negative rewards a ratio > 1 means the policy beats the reference.\n";
    if (!out) throw std::runtime_error("export_report: write failed for " + readme_path);
  }
}

}  // namespace offload
