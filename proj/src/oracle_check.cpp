#include "offload/oracle_check.hpp"

#include <random>

#include "offload/tracegen.hpp"
#include "offload/util.hpp"

namespace offload {

using nlohmann::json;

OracleCheckMismatch replay_instance(const Trace& trace, const RewardParams& params, int budget) {
  OracleCheckMismatch out;
  out.trace = trace;
  out.params = params;
  out.budget = budget;
  OraclePlan dp = oracle_dp(trace, params, budget);
  OraclePlan bf = brute_force_oracle(trace, params, budget);
  out.dp_value = dp.value;
  out.bf_value = bf.value;
  out.dp_actions = std::move(dp.actions);
  out.bf_actions = std::move(bf.actions);
  return out;
}

OracleCheckResult oracle_cross_check(int cases, std::uint64_t seed) {
  OracleCheckResult result;
  result.cases = cases;
  for (int i = 0; i < cases; ++i) {
    std::mt19937_64 rng(mix_seed(seed, {static_cast<std::uint64_t>(i)}));
    std::uniform_int_distribution<int> pick_t(2, 8);
    std::uniform_int_distribution<int> pick_budget(0, 3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    GenConfig gen;
    gen.T = pick_t(rng);
    gen.num_identities = 4;
    gen.num_known = 2;
    gen.coherence_frac_min = 0.01;  // interval min 1 at these horizons
    gen.coherence_frac_max = 0.5;
    gen.p_correct_known = 0.7;
    const Trace trace = generate_trace(gen, rng());

    RewardParams params;
    params.alpha = 0.5 + 1.5 * unit(rng);
    params.beta = 1.0 + 7.0 * unit(rng);
    params.cost = {0.2 * unit(rng), 0.2 * unit(rng), 0.1 + 0.9 * unit(rng),
                   1.0 + 9.0 * unit(rng)};
    const int budget = pick_budget(rng);

    OracleCheckMismatch run = replay_instance(trace, params, budget);
    if (run.dp_value == run.bf_value) {
      result.matched += 1;
    } else if (!result.first_mismatch) {
      result.first_mismatch = std::move(run);
    }
  }
  return result;
}

namespace {

json actions_to_json(const std::vector<Action>& actions) {
  json arr = json::array();
  for (Action a : actions) arr.push_back(action_code(a));
  return arr;
}

std::vector<Action> actions_from_json(const json& arr) {
  std::vector<Action> out;
  for (const auto& v : arr) out.push_back(to_action(v.get<int>()));
  return out;
}

}  // namespace

json mismatch_to_json(const OracleCheckMismatch& m) {
  json steps = json::array();
  for (const TraceStep& s : m.trace.steps) {
    steps.push_back({{"true_label", s.true_label},
                     {"robot_pred", s.robot_pred},
                     {"robot_conf", s.robot_conf},
                     {"cloud_pred", s.cloud_pred},
                     {"cloud_conf", s.cloud_conf},
                     {"phi", s.phi}});
  }
  return json{{"trace", {{"id", m.trace.id}, {"seed", m.trace.seed}, {"steps", steps}}},
              {"params",
               {{"alpha", m.params.alpha}, {"beta", m.params.beta}, {"cost", m.params.cost}}},
              {"budget", m.budget},
              {"dp_value", m.dp_value},
              {"bf_value", m.bf_value},
              {"dp_actions", actions_to_json(m.dp_actions)},
              {"bf_actions", actions_to_json(m.bf_actions)}};
}

OracleCheckMismatch mismatch_from_json(const json& j) {
  OracleCheckMismatch m;
  const json& t = j.at("trace");
  m.trace.id = t.at("id").get<std::string>();
  m.trace.seed = t.at("seed").get<std::uint64_t>();
  for (const auto& s : t.at("steps")) {
    m.trace.steps.push_back(TraceStep{s.at("true_label").get<int>(), s.at("robot_pred").get<int>(),
                                      s.at("robot_conf").get<double>(),
                                      s.at("cloud_pred").get<int>(),
                                      s.at("cloud_conf").get<double>(), s.at("phi").get<double>()});
  }
  const json& p = j.at("params");
  m.params.alpha = p.at("alpha").get<double>();
  m.params.beta = p.at("beta").get<double>();
  const auto costs = p.at("cost").get<std::vector<double>>();
  if (costs.size() != kNumActions) throw std::runtime_error("counterexample: bad cost table");
  std::copy(costs.begin(), costs.end(), m.params.cost.begin());
  m.budget = j.at("budget").get<int>();
  m.dp_value = j.value("dp_value", 0.0);
  m.bf_value = j.value("bf_value", 0.0);
  if (j.contains("dp_actions")) m.dp_actions = actions_from_json(j.at("dp_actions"));
  if (j.contains("bf_actions")) m.bf_actions = actions_from_json(j.at("bf_actions"));
  return m;
}

}  // namespace offload
