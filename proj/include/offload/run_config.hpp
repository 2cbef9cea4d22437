#ifndef OFFLOAD_RUN_CONFIG_HPP_
#define OFFLOAD_RUN_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "offload/a2c.hpp"
#include "offload/tracegen.hpp"
#include "offload/types.hpp"

namespace offload {

struct BenchSettings {
  int test_traces = 100;
  std::uint64_t test_seed = 5000;
  int trials = 4;
  std::vector<double> budget_fractions{0.10, 0.20, 0.50, 0.70, 1.0};
  std::vector<double> threshold_qs{10, 25, 50, 75, 90};
  int calib_traces = 50;
  int all_robot_hold = 1;
  std::uint64_t seed = 1234;
};

// One experiment bundle: generator, reward weights, trainer and benchmark
// settings. Train and test trace seed ranges must be disjoint.
struct RunConfig {
  std::string out_dir = "out";
  int jobs = 0;  // 0: use hardware concurrency
  int train_traces = 100;
  GenConfig gen;
  RewardParams reward;
  TrainerConfig trainer;
  BenchSettings bench;

  void validate() const;  // throws ConfigError
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig from_file(const std::string& path);
};

}  // namespace offload

#endif  // OFFLOAD_RUN_CONFIG_HPP_
