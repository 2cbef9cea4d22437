#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "offload/a2c.hpp"
#include "offload/eval.hpp"
#include "offload/oracle_check.hpp"
#include "offload/run_config.hpp"
#include "offload/tracegen.hpp"
#include "offload/util.hpp"

namespace fs = std::filesystem;
using namespace offload;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitVerification = 3;

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  long episodes = -1;
  std::int64_t seed = -1;
  int jobs = -1;
  std::string checkpoint;
};

RunConfig resolve_config(const CommonOpts& opts) {
  RunConfig cfg = opts.config_path.empty() ? RunConfig{} : RunConfig::from_file(opts.config_path);
  if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
  if (opts.episodes >= 0) cfg.trainer.episodes = opts.episodes;
  if (opts.jobs >= 0) cfg.jobs = opts.jobs;
  return cfg;
}

int effective_jobs(const RunConfig& cfg) {
  if (cfg.jobs > 0) return cfg.jobs;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

int cmd_gen(const CommonOpts& opts, const std::string& split) {
  RunConfig cfg = resolve_config(opts);
  const bool train = split == "train";
  if (opts.seed >= 0) {
    (train ? cfg.gen.seed : cfg.bench.test_seed) = static_cast<std::uint64_t>(opts.seed);
  }
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  const int count = train ? cfg.train_traces : cfg.bench.test_traces;
  const std::uint64_t base_seed = train ? cfg.gen.seed : cfg.bench.test_seed;
  const auto traces = generate_dataset(cfg.gen, count, base_seed);
  const std::string path = cfg.out_dir + "/traces_" + split + ".jsonl";
  save_traces(traces, path);
  std::cout << "wrote " << traces.size() << " traces (seeds " << base_seed << ".."
            << base_seed + static_cast<std::uint64_t>(count) - 1 << ") to " << path << "\n";
  return kExitOk;
}

int cmd_calibrate(const CommonOpts& opts) {
  RunConfig cfg = resolve_config(opts);
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  const auto calib = generate_dataset(cfg.gen, cfg.bench.calib_traces, cfg.gen.seed);
  nlohmann::json rows = nlohmann::json::array();
  for (double q : cfg.bench.threshold_qs) {
    const ThresholdPolicyConfig tc = calibrate_threshold(calib, q);
    rows.push_back({{"q", tc.q}, {"threshold", tc.threshold}});
    std::cout << "q=" << format_double(q) << " -> threshold " << format_double(tc.threshold)
              << "\n";
  }
  const std::string path = cfg.out_dir + "/calibration.json";
  std::ofstream out(path, std::ios::binary);
  out << rows.dump(2) << '\n';
  if (!out) throw std::runtime_error("calibrate: write failed for " + path);
  std::cout << "wrote " << path << "\n";
  return kExitOk;
}

int cmd_train(const CommonOpts& opts) {
  RunConfig cfg = resolve_config(opts);
  if (opts.seed >= 0) cfg.trainer.seed = static_cast<std::uint64_t>(opts.seed);
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  const std::string checkpoint_path = cfg.out_dir + "/checkpoint.json";
  const std::string curve_path = cfg.out_dir + "/training_curve.csv";

  TrainerState* resume_ptr = nullptr;
  std::optional<TrainerState> resume;
  if (!opts.checkpoint.empty()) {
    resume.emplace(load_checkpoint(opts.checkpoint));
    resume_ptr = &*resume;
    std::cout << "resuming from " << opts.checkpoint << " at episode " << resume->episode << "\n";
  }
  const bool append_curve = resume_ptr != nullptr && fs::exists(curve_path);

  try {
    TrainResult result = train(cfg.trainer, cfg.gen, cfg.reward, resume_ptr,
                               [&](const TrainerState& st) { save_checkpoint(st, checkpoint_path); });
    if (result.state.episode == 0) save_checkpoint(result.state, checkpoint_path);
    write_training_curve(result.curve, curve_path, append_curve);
    double mean = 0.0;
    for (double r : result.state.reward_window) mean += r;
    if (!result.state.reward_window.empty()) {
      mean /= static_cast<double>(result.state.reward_window.size());
    }
    std::cout << "trained to episode " << result.state.episode << "; moving-average reward ("
              << result.state.reward_window.size() << " episodes) = " << format_double(mean)
              << "\n"
              << "checkpoint: " << checkpoint_path << "\ncurve: " << curve_path << "\n";
    if (result.budget_violations > 0) {
      std::cerr << "budget violations during training: " << result.budget_violations << "\n";
      return kExitVerification;
    }
    return kExitOk;
  } catch (const TrainingDivergence& e) {
    const std::string diag_path = cfg.out_dir + "/train_diagnostics.txt";
    std::ofstream diag(diag_path, std::ios::binary);
    diag << e.what() << '\n';
    std::cerr << "training diverged: " << e.what() << "\ndiagnostics: " << diag_path << "\n";
    return kExitRuntime;
  }
}

int cmd_oracle_check(const CommonOpts& opts, int cases, const std::string& replay_path) {
  RunConfig cfg = resolve_config(opts);
  fs::create_directories(cfg.out_dir);
  if (!replay_path.empty()) {
    std::ifstream in(replay_path, std::ios::binary);
    if (!in) throw std::runtime_error("oracle-check: cannot open " + replay_path);
    nlohmann::json j;
    in >> j;
    const OracleCheckMismatch stored = mismatch_from_json(j);
    const OracleCheckMismatch rerun = replay_instance(stored.trace, stored.params, stored.budget);
    std::cout << "replay: dp=" << format_double(rerun.dp_value)
              << " bf=" << format_double(rerun.bf_value)
              << (rerun.dp_value == rerun.bf_value ? " (match)" : " (MISMATCH)") << "\n";
    return rerun.dp_value == rerun.bf_value ? kExitOk : kExitVerification;
  }

  const std::uint64_t seed = opts.seed >= 0 ? static_cast<std::uint64_t>(opts.seed) : 42;
  const OracleCheckResult result = oracle_cross_check(cases, seed);
  std::cout << result.matched << "/" << result.cases << " match\n";
  if (!result.all_match()) {
    const std::string path = cfg.out_dir + "/oracle_counterexample.json";
    std::ofstream out(path, std::ios::binary);
    out << mismatch_to_json(*result.first_mismatch).dump(2) << '\n';
    std::cerr << "counterexample written to " << path << " (replay with --replay " << path
              << ")\n";
    return kExitVerification;
  }
  return kExitOk;
}

int cmd_bench(const CommonOpts& opts) {
  RunConfig cfg = resolve_config(opts);
  if (opts.seed >= 0) cfg.bench.seed = static_cast<std::uint64_t>(opts.seed);
  cfg.validate();
  const std::string test_path = cfg.out_dir + "/traces_test.jsonl";
  if (!fs::exists(test_path)) {
    std::cerr << "missing test traces: expected " << test_path
              << "\ngenerate them first: offload_cli gen --split test"
              << (opts.config_path.empty() ? "" : " --config " + opts.config_path) << "\n";
    return kExitUsage;
  }
  const auto traces = load_traces(test_path);
  const int jobs = effective_jobs(cfg);

  // Threshold sweep on the calibration split; the best q becomes the
  // robot-heuristic baseline.
  const auto calib = generate_dataset(cfg.gen, cfg.bench.calib_traces, cfg.gen.seed);
  std::vector<PolicySpec> sweep_specs;
  std::vector<ThresholdPolicyConfig> sweep_cfgs;
  for (double q : cfg.bench.threshold_qs) {
    ThresholdPolicyConfig tc = calibrate_threshold(calib, q);
    sweep_cfgs.push_back(tc);
    sweep_specs.push_back(
        make_threshold_spec("threshold-q" + format_double(q), tc));
  }
  BenchmarkConfig sweep_bc{cfg.bench.budget_fractions, 1, cfg.bench.seed, jobs};
  const BenchmarkReport sweep = benchmark(sweep_specs, traces, sweep_bc, cfg.reward);
  size_t best_q_idx = 0;
  const size_t stride = cfg.bench.budget_fractions.size() + 1;
  for (size_t i = 1; i < sweep_specs.size(); ++i) {
    if (sweep.aggregates[i * stride].median_reward >
        sweep.aggregates[best_q_idx * stride].median_reward) {
      best_q_idx = i;
    }
  }
  const double best_q = cfg.bench.threshold_qs[best_q_idx];
  std::cout << "robot-heuristic: q=" << format_double(best_q) << " (threshold "
            << format_double(sweep_cfgs[best_q_idx].threshold) << ")\n";

  std::vector<PolicySpec> policies;
  policies.push_back(make_random_spec());
  policies.push_back(make_all_robot_spec(cfg.bench.all_robot_hold));
  policies.push_back(make_all_cloud_spec());
  policies.push_back(make_threshold_spec("robot-heuristic", sweep_cfgs[best_q_idx]));
  if (!opts.checkpoint.empty()) {
    TrainerState state = load_checkpoint(opts.checkpoint);
    auto actor = std::make_shared<const PolicyNet>(std::move(state.actor));
    policies.push_back(make_rl_greedy_spec(actor, state.phi_scale));
  }
  policies.push_back(make_oracle_spec(cfg.reward));

  BenchmarkConfig bc{cfg.bench.budget_fractions, cfg.bench.trials, cfg.bench.seed, jobs};
  const BenchmarkReport report = benchmark(policies, traces, bc, cfg.reward);
  const std::string report_dir = cfg.out_dir + "/report";
  export_report(report, report_dir);
  {
    nlohmann::json meta{{"robot_heuristic_q", best_q},
                        {"robot_heuristic_threshold", sweep_cfgs[best_q_idx].threshold},
                        {"best_baseline", report.best_baseline},
                        {"budget_violations", report.budget_violations},
                        {"dominance_violations", report.dominance_violations},
                        {"decomposition_violations", report.decomposition_violations},
                        {"jobs", jobs}};
    std::ofstream out(report_dir + "/bench_meta.json", std::ios::binary);
    out << meta.dump(2) << '\n';
  }

  for (const RatioRow& row : report.ratios) {
    std::cout << row.policy << ": median " << format_double(row.median_reward)
              << ", vs oracle " << format_double(row.ratio_vs_oracle) << ", vs "
              << report.best_baseline << " " << format_double(row.ratio_vs_baseline) << "\n";
  }
  std::cout << "report: " << report_dir << "\n";

  const long violations =
      report.budget_violations + report.dominance_violations + report.decomposition_violations;
  if (violations > 0) {
    std::cerr << "invariant violations: budget=" << report.budget_violations
              << " dominance=" << report.dominance_violations
              << " decomposition=" << report.decomposition_violations << "\n";
    return kExitVerification;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace-driven robot/cloud offloading simulator: dataset generation, baseline "
               "policies, a clairvoyant DP oracle, an A2C trainer, and a benchmark harness"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string split = "train";
  std::string replay_path;
  int cases = 200;

  auto add_common = [&](CLI::App* cmd, bool with_checkpoint) {
    cmd->add_option("--config", opts.config_path, "JSON config file (defaults used if omitted)");
    cmd->add_option("--out", opts.out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", opts.seed, "seed override");
    cmd->add_option("--jobs", opts.jobs, "worker threads (0 = all cores)");
    if (with_checkpoint) cmd->add_option("--checkpoint", opts.checkpoint, "checkpoint file");
  };

  CLI::App* gen = app.add_subcommand("gen", "generate trace files for one split");
  add_common(gen, false);
  gen->add_option("--split", split, "train or test")
      ->required()
      ->check(CLI::IsMember({"train", "test"}));

  CLI::App* calibrate = app.add_subcommand("calibrate", "compute confidence thresholds");
  add_common(calibrate, false);

  CLI::App* train_cmd = app.add_subcommand("train", "train the A2C offloading policy");
  add_common(train_cmd, true);
  train_cmd->add_option("--episodes", opts.episodes, "episode count (overrides config)");

  CLI::App* oracle = app.add_subcommand("oracle-check", "cross-check DP oracle vs brute force");
  add_common(oracle, false);
  oracle->add_option("--cases", cases, "number of randomized instances")->check(CLI::PositiveNumber);
  oracle->add_option("--replay", replay_path, "re-run a stored counterexample file");

  CLI::App* bench = app.add_subcommand("bench", "benchmark policies on the test traces");
  add_common(bench, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen(opts, split);
    if (calibrate->parsed()) return cmd_calibrate(opts);
    if (train_cmd->parsed()) return cmd_train(opts);
    if (oracle->parsed()) return cmd_oracle_check(opts, cases, replay_path);
    if (bench->parsed()) return cmd_bench(opts);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
