#ifndef OFFLOAD_TRACEGEN_HPP_
#define OFFLOAD_TRACEGEN_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "offload/types.hpp"

namespace offload {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TraceParseError : std::runtime_error {
  TraceParseError(const std::string& what, int line_number)
      : std::runtime_error("line " + std::to_string(line_number) + ": " + what),
        line(line_number) {}
  int line;
};

struct TraceValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Synthetic coherent-stream generator settings. An episode is a sequence of
// identity intervals; the robot model only knows the first num_known
// identities, the cloud model is always right.
struct GenConfig {
  int T = 80;
  int num_identities = 20;
  int num_known = 10;
  double coherence_frac_min = 1.0 / 12.0;
  double coherence_frac_max = 1.0 / 10.0;
  double p_correct_known = 0.85;
  double conf_correct_mean = 0.90;
  double conf_correct_sd = 0.05;
  double conf_wrong_mean = 0.45;
  double conf_wrong_sd = 0.15;
  double phi_boundary_mean = 0.8;
  double phi_boundary_sd = 0.1;
  double phi_within_mean = 0.1;
  double phi_within_sd = 0.05;
  double cloud_conf = 1.0;
  std::uint64_t seed = 1000000;

  // Interval length bounds implied by T and the coherence fractions.
  int interval_min() const;
  int interval_max() const;
  void validate() const;  // throws ConfigError
};

// Deterministic given (cfg, seed). Interval lengths are drawn uniformly from
// [interval_min, interval_max] subject to the lengths tiling [0, T) exactly;
// when T cannot be tiled the final interval is truncated.
Trace generate_trace(const GenConfig& cfg, std::uint64_t seed);

// Traces seeded base_seed .. base_seed + n_traces - 1.
std::vector<Trace> generate_dataset(const GenConfig& cfg, int n_traces, std::uint64_t base_seed);

// Line-delimited JSON: one header record per trace followed by its step
// records. Lossless round trip for all finite values.
void save_traces(const std::vector<Trace>& traces, const std::string& path);
std::vector<Trace> load_traces(const std::string& path);

}  // namespace offload

#endif  // OFFLOAD_TRACEGEN_HPP_
