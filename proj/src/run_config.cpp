#include "offload/run_config.hpp"

#include <algorithm>
#include <fstream>

namespace offload {

using nlohmann::json;

namespace {

void check_keys(const json& j, const char* section, std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* k) { return it.key() == k; }) == allowed.end()) {
      throw ConfigError(std::string("config: unknown key \"") + it.key() + "\" in " + section);
    }
  }
}

template <typename T>
void get_if_present(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

}  // namespace

void RunConfig::validate() const {
  gen.validate();
  trainer.validate();
  if (reward.alpha < 0.0 || reward.beta < 0.0) {
    throw ConfigError("reward: alpha and beta must be >= 0");
  }
  for (double c : reward.cost) {
    if (c < 0.0) throw ConfigError("reward: action costs must be >= 0");
  }
  if (train_traces < 1) throw ConfigError("config: train_traces must be >= 1");
  if (bench.test_traces < 1) throw ConfigError("bench: test_traces must be >= 1");
  if (bench.trials < 1) throw ConfigError("bench: trials must be >= 1");
  if (bench.calib_traces < 1) throw ConfigError("bench: calib_traces must be >= 1");
  if (bench.all_robot_hold < 1) throw ConfigError("bench: all_robot_hold must be >= 1");
  if (bench.budget_fractions.empty()) throw ConfigError("bench: budget_fractions is empty");
  for (double f : bench.budget_fractions) {
    if (f < 0.0 || f > 1.0) throw ConfigError("bench: budget fractions must be in [0, 1]");
  }
  if (bench.threshold_qs.empty()) throw ConfigError("bench: threshold_qs is empty");
  for (double q : bench.threshold_qs) {
    if (q < 0.0 || q > 100.0) throw ConfigError("bench: threshold_qs must be in [0, 100]");
  }

  // The training side consumes gen.seed .. gen.seed + N for episode traces,
  // saved train traces, calibration traces and the phi-scale sample.
  const std::uint64_t train_lo = gen.seed;
  const std::uint64_t train_span =
      std::max<std::uint64_t>({static_cast<std::uint64_t>(trainer.episodes),
                               static_cast<std::uint64_t>(train_traces),
                               static_cast<std::uint64_t>(bench.calib_traces), 100});
  const std::uint64_t train_hi = train_lo + train_span;
  const std::uint64_t test_lo = bench.test_seed;
  const std::uint64_t test_hi = test_lo + static_cast<std::uint64_t>(bench.test_traces);
  if (train_lo < test_hi && test_lo < train_hi) {
    throw ConfigError("config: train seed range [" + std::to_string(train_lo) + ", " +
                      std::to_string(train_hi) + ") overlaps test seed range [" +
                      std::to_string(test_lo) + ", " + std::to_string(test_hi) + ")");
  }
}

json RunConfig::to_json() const {
  return json{
      {"out_dir", out_dir},
      {"jobs", jobs},
      {"train_traces", train_traces},
      {"gen",
       {{"T", gen.T},
        {"num_identities", gen.num_identities},
        {"num_known", gen.num_known},
        {"coherence_frac_min", gen.coherence_frac_min},
        {"coherence_frac_max", gen.coherence_frac_max},
        {"p_correct_known", gen.p_correct_known},
        {"conf_correct_mean", gen.conf_correct_mean},
        {"conf_correct_sd", gen.conf_correct_sd},
        {"conf_wrong_mean", gen.conf_wrong_mean},
        {"conf_wrong_sd", gen.conf_wrong_sd},
        {"phi_boundary_mean", gen.phi_boundary_mean},
        {"phi_boundary_sd", gen.phi_boundary_sd},
        {"phi_within_mean", gen.phi_within_mean},
        {"phi_within_sd", gen.phi_within_sd},
        {"cloud_conf", gen.cloud_conf},
        {"seed", gen.seed}}},
      {"reward", {{"alpha", reward.alpha}, {"beta", reward.beta}, {"cost", reward.cost}}},
      {"trainer",
       {{"actor_lr", trainer.actor_lr},
        {"critic_lr", trainer.critic_lr},
        {"minibatch_episodes", trainer.minibatch_episodes},
        {"entropy_coeff", trainer.entropy_coeff},
        {"grad_clip_norm", trainer.grad_clip_norm},
        {"gamma", trainer.gamma},
        {"episodes", trainer.episodes},
        {"budget_fractions", trainer.budget_fractions},
        {"seed", trainer.seed},
        {"phi_scale", trainer.phi_scale},
        {"checkpoint_every", trainer.checkpoint_every},
        {"curve_every", trainer.curve_every}}},
      {"bench",
       {{"test_traces", bench.test_traces},
        {"test_seed", bench.test_seed},
        {"trials", bench.trials},
        {"budget_fractions", bench.budget_fractions},
        {"threshold_qs", bench.threshold_qs},
        {"calib_traces", bench.calib_traces},
        {"all_robot_hold", bench.all_robot_hold},
        {"seed", bench.seed}}}};
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig cfg;
  check_keys(j, "config", {"out_dir", "jobs", "train_traces", "gen", "reward", "trainer", "bench"});
  get_if_present(j, "out_dir", cfg.out_dir);
  get_if_present(j, "jobs", cfg.jobs);
  get_if_present(j, "train_traces", cfg.train_traces);

  if (auto it = j.find("gen"); it != j.end()) {
    const json& g = *it;
    check_keys(g, "gen",
               {"T", "num_identities", "num_known", "coherence_frac_min", "coherence_frac_max",
                "p_correct_known", "conf_correct_mean", "conf_correct_sd", "conf_wrong_mean",
                "conf_wrong_sd", "phi_boundary_mean", "phi_boundary_sd", "phi_within_mean",
                "phi_within_sd", "cloud_conf", "seed"});
    get_if_present(g, "T", cfg.gen.T);
    get_if_present(g, "num_identities", cfg.gen.num_identities);
    get_if_present(g, "num_known", cfg.gen.num_known);
    get_if_present(g, "coherence_frac_min", cfg.gen.coherence_frac_min);
    get_if_present(g, "coherence_frac_max", cfg.gen.coherence_frac_max);
    get_if_present(g, "p_correct_known", cfg.gen.p_correct_known);
    get_if_present(g, "conf_correct_mean", cfg.gen.conf_correct_mean);
    get_if_present(g, "conf_correct_sd", cfg.gen.conf_correct_sd);
    get_if_present(g, "conf_wrong_mean", cfg.gen.conf_wrong_mean);
    get_if_present(g, "conf_wrong_sd", cfg.gen.conf_wrong_sd);
    get_if_present(g, "phi_boundary_mean", cfg.gen.phi_boundary_mean);
    get_if_present(g, "phi_boundary_sd", cfg.gen.phi_boundary_sd);
    get_if_present(g, "phi_within_mean", cfg.gen.phi_within_mean);
    get_if_present(g, "phi_within_sd", cfg.gen.phi_within_sd);
    get_if_present(g, "cloud_conf", cfg.gen.cloud_conf);
    get_if_present(g, "seed", cfg.gen.seed);
  }
  if (auto it = j.find("reward"); it != j.end()) {
    const json& r = *it;
    check_keys(r, "reward", {"alpha", "beta", "cost"});
    get_if_present(r, "alpha", cfg.reward.alpha);
    get_if_present(r, "beta", cfg.reward.beta);
    if (auto c = r.find("cost"); c != r.end()) {
      const auto costs = c->get<std::vector<double>>();
      if (costs.size() != kNumActions) {
        throw ConfigError("reward: cost must list exactly 4 values (actions 0-3)");
      }
      std::copy(costs.begin(), costs.end(), cfg.reward.cost.begin());
    }
  }
  if (auto it = j.find("trainer"); it != j.end()) {
    const json& t = *it;
    check_keys(t, "trainer",
               {"actor_lr", "critic_lr", "minibatch_episodes", "entropy_coeff", "grad_clip_norm",
                "gamma", "episodes", "budget_fractions", "seed", "phi_scale", "checkpoint_every",
                "curve_every"});
    get_if_present(t, "actor_lr", cfg.trainer.actor_lr);
    get_if_present(t, "critic_lr", cfg.trainer.critic_lr);
    get_if_present(t, "minibatch_episodes", cfg.trainer.minibatch_episodes);
    get_if_present(t, "entropy_coeff", cfg.trainer.entropy_coeff);
    get_if_present(t, "grad_clip_norm", cfg.trainer.grad_clip_norm);
    get_if_present(t, "gamma", cfg.trainer.gamma);
    get_if_present(t, "episodes", cfg.trainer.episodes);
    get_if_present(t, "budget_fractions", cfg.trainer.budget_fractions);
    get_if_present(t, "seed", cfg.trainer.seed);
    get_if_present(t, "phi_scale", cfg.trainer.phi_scale);
    get_if_present(t, "checkpoint_every", cfg.trainer.checkpoint_every);
    get_if_present(t, "curve_every", cfg.trainer.curve_every);
  }
  if (auto it = j.find("bench"); it != j.end()) {
    const json& b = *it;
    check_keys(b, "bench",
               {"test_traces", "test_seed", "trials", "budget_fractions", "threshold_qs",
                "calib_traces", "all_robot_hold", "seed"});
    get_if_present(b, "test_traces", cfg.bench.test_traces);
    get_if_present(b, "test_seed", cfg.bench.test_seed);
    get_if_present(b, "trials", cfg.bench.trials);
    get_if_present(b, "budget_fractions", cfg.bench.budget_fractions);
    get_if_present(b, "threshold_qs", cfg.bench.threshold_qs);
    get_if_present(b, "calib_traces", cfg.bench.calib_traces);
    get_if_present(b, "all_robot_hold", cfg.bench.all_robot_hold);
    get_if_present(b, "seed", cfg.bench.seed);
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path + ": " + e.what());
  }
  return from_json(j);
}

}  // namespace offload
