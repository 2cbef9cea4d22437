#include "offload/tracegen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

namespace offload {

using nlohmann::json;

int GenConfig::interval_min() const {
  return static_cast<int>(std::ceil(static_cast<double>(T) * coherence_frac_min));
}

int GenConfig::interval_max() const {
  return static_cast<int>(std::ceil(static_cast<double>(T) * coherence_frac_max));
}

void GenConfig::validate() const {
  if (T < 1) throw ConfigError("gen: T must be >= 1");
  if (num_identities < 1) throw ConfigError("gen: num_identities must be >= 1");
  if (num_known < 0 || num_known > num_identities) {
    throw ConfigError("gen: num_known must be in [0, num_identities]");
  }
  if (!(coherence_frac_min > 0.0) || !(coherence_frac_min <= coherence_frac_max) ||
      !(coherence_frac_max < 1.0)) {
    throw ConfigError("gen: need 0 < coherence_frac_min <= coherence_frac_max < 1");
  }
  if (p_correct_known < 0.0 || p_correct_known > 1.0) {
    throw ConfigError("gen: p_correct_known must be in [0, 1]");
  }
  if (cloud_conf < 0.0 || cloud_conf > 1.0) {
    throw ConfigError("gen: cloud_conf must be in [0, 1]");
  }
  if (conf_correct_sd < 0.0 || conf_wrong_sd < 0.0 || phi_boundary_sd < 0.0 ||
      phi_within_sd < 0.0) {
    throw ConfigError("gen: standard deviations must be >= 0");
  }
}

namespace {

// tileable[r] == true iff r can be written as a sum of lengths in [lo, hi].
std::vector<char> tileable_sums(int lo, int hi, int total) {
  std::vector<char> ok(static_cast<size_t>(total) + 1, 0);
  ok[0] = 1;
  for (int r = 1; r <= total; ++r) {
    for (int len = lo; len <= hi && len <= r; ++len) {
      if (ok[static_cast<size_t>(r - len)]) {
        ok[static_cast<size_t>(r)] = 1;
        break;
      }
    }
  }
  return ok;
}

// Splits T into interval lengths drawn uniformly from [lo, hi]. Draws are
// restricted to lengths that leave a tileable remainder, so every interval
// stays in range whenever T is tileable at all; otherwise the tail interval
// is truncated.
std::vector<int> draw_interval_lengths(int T, int lo, int hi, std::mt19937_64& rng) {
  const auto ok = tileable_sums(lo, hi, T);
  std::vector<int> lengths;
  int remaining = T;
  while (remaining > 0) {
    std::vector<int> feasible;
    for (int len = lo; len <= std::min(hi, remaining); ++len) {
      if (ok[static_cast<size_t>(remaining - len)]) feasible.push_back(len);
    }
    int len;
    if (feasible.empty()) {
      len = std::min(remaining, hi);  // truncated tail
    } else if (feasible.size() == 1) {
      len = feasible[0];
    } else {
      std::uniform_int_distribution<size_t> pick(0, feasible.size() - 1);
      len = feasible[pick(rng)];
    }
    lengths.push_back(len);
    remaining -= len;
  }
  return lengths;
}

double clamped_normal(std::mt19937_64& rng, double mean, double sd, double lo, double hi) {
  std::normal_distribution<double> dist(mean, sd);
  return std::clamp(dist(rng), lo, hi);
}

}  // namespace

Trace generate_trace(const GenConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);

  const int lo = cfg.interval_min();
  const int hi = cfg.interval_max();
  const auto lengths = draw_interval_lengths(cfg.T, lo, hi, rng);

  // Identities per interval; consecutive intervals always differ.
  std::vector<int> identities(lengths.size());
  std::uniform_int_distribution<int> any_identity(0, cfg.num_identities - 1);
  for (size_t k = 0; k < lengths.size(); ++k) {
    int id = any_identity(rng);
    if (k > 0 && cfg.num_identities > 1) {
      while (id == identities[k - 1]) id = any_identity(rng);
    }
    identities[k] = id;
  }

  Trace trace;
  trace.id = "trace-" + std::to_string(seed);
  trace.seed = seed;
  trace.steps.reserve(static_cast<size_t>(cfg.T));

  std::bernoulli_distribution robot_hits(cfg.p_correct_known);
  for (size_t k = 0; k < lengths.size(); ++k) {
    const int label = identities[k];
    const bool known = label < cfg.num_known;
    for (int j = 0; j < lengths[k]; ++j) {
      TraceStep step;
      step.true_label = label;
      step.cloud_pred = label;
      step.cloud_conf = cfg.cloud_conf;

      const bool correct = known && robot_hits(rng);
      if (correct) {
        step.robot_pred = label;
        step.robot_conf = clamped_normal(rng, cfg.conf_correct_mean, cfg.conf_correct_sd, 0.0, 1.0);
      } else {
        // The robot classifier always emits some known identity.
        int wrong = 0;
        if (cfg.num_known > 1 || (cfg.num_known == 1 && label != 0)) {
          std::uniform_int_distribution<int> known_identity(0, cfg.num_known - 1);
          wrong = known_identity(rng);
          while (wrong == label) wrong = known_identity(rng);
        }
        step.robot_pred = wrong;
        step.robot_conf = clamped_normal(rng, cfg.conf_wrong_mean, cfg.conf_wrong_sd, 0.0, 1.0);
      }

      const bool boundary = (j == 0);
      step.phi = boundary
                     ? clamped_normal(rng, cfg.phi_boundary_mean, cfg.phi_boundary_sd, 0.0, 1e300)
                     : clamped_normal(rng, cfg.phi_within_mean, cfg.phi_within_sd, 0.0, 1e300);
      trace.steps.push_back(step);
    }
  }
  return trace;
}

std::vector<Trace> generate_dataset(const GenConfig& cfg, int n_traces, std::uint64_t base_seed) {
  if (n_traces < 1) throw ConfigError("generate_dataset: n_traces must be >= 1");
  std::vector<Trace> traces;
  traces.reserve(static_cast<size_t>(n_traces));
  for (int i = 0; i < n_traces; ++i) {
    traces.push_back(generate_trace(cfg, base_seed + static_cast<std::uint64_t>(i)));
  }
  return traces;
}

void save_traces(const std::vector<Trace>& traces, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_traces: cannot open " + path);
  for (const Trace& trace : traces) {
    json header = {{"type", "trace"},
                   {"id", trace.id},
                   {"T", trace.horizon()},
                   {"seed", trace.seed}};
    out << header.dump() << '\n';
    for (size_t t = 0; t < trace.steps.size(); ++t) {
      const TraceStep& s = trace.steps[t];
      json rec = {{"type", "step"},           {"t", t},
                  {"true_label", s.true_label}, {"robot_pred", s.robot_pred},
                  {"robot_conf", s.robot_conf}, {"cloud_pred", s.cloud_pred},
                  {"cloud_conf", s.cloud_conf}, {"phi", s.phi}};
      out << rec.dump() << '\n';
    }
  }
  if (!out) throw std::runtime_error("save_traces: write failed for " + path);
}

namespace {

const json& require_field(const json& rec, const char* key, int line) {
  auto it = rec.find(key);
  if (it == rec.end()) {
    throw TraceParseError(std::string("record missing field \"") + key + "\"", line);
  }
  return *it;
}

void validate_conf(double value, const char* key, int line) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw TraceValidationError("line " + std::to_string(line) + ": " + key + " = " +
                               std::to_string(value) + " outside [0, 1]");
  }
}

}  // namespace

std::vector<Trace> load_traces(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_traces: cannot open " + path);

  std::vector<Trace> traces;
  int expected_steps = 0;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw TraceParseError(e.what(), line_no);
    }
    const std::string type = require_field(rec, "type", line_no).get<std::string>();
    if (type == "trace") {
      if (!traces.empty() && traces.back().horizon() != expected_steps) {
        throw TraceParseError("trace \"" + traces.back().id + "\" has " +
                                  std::to_string(traces.back().horizon()) + " steps, header says " +
                                  std::to_string(expected_steps),
                              line_no);
      }
      Trace trace;
      trace.id = require_field(rec, "id", line_no).get<std::string>();
      trace.seed = require_field(rec, "seed", line_no).get<std::uint64_t>();
      expected_steps = require_field(rec, "T", line_no).get<int>();
      traces.push_back(std::move(trace));
    } else if (type == "step") {
      if (traces.empty()) {
        throw TraceParseError("step record before any trace header", line_no);
      }
      TraceStep s;
      s.true_label = require_field(rec, "true_label", line_no).get<int>();
      s.robot_pred = require_field(rec, "robot_pred", line_no).get<int>();
      s.robot_conf = require_field(rec, "robot_conf", line_no).get<double>();
      s.cloud_pred = require_field(rec, "cloud_pred", line_no).get<int>();
      s.cloud_conf = require_field(rec, "cloud_conf", line_no).get<double>();
      s.phi = require_field(rec, "phi", line_no).get<double>();
      validate_conf(s.robot_conf, "robot_conf", line_no);
      validate_conf(s.cloud_conf, "cloud_conf", line_no);
      if (!(s.phi >= 0.0)) {
        throw TraceValidationError("line " + std::to_string(line_no) + ": phi = " +
                                   std::to_string(s.phi) + " is negative");
      }
      traces.back().steps.push_back(s);
    } else {
      throw TraceParseError("unknown record type \"" + type + "\"", line_no);
    }
  }
  if (!traces.empty() && traces.back().horizon() != expected_steps) {
    throw TraceParseError("trace \"" + traces.back().id + "\" has " +
                              std::to_string(traces.back().horizon()) + " steps, header says " +
                              std::to_string(expected_steps),
                          line_no + 1);
  }
  return traces;
}

}  // namespace offload
