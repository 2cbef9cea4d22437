#include <doctest.h>

#include <random>

#include "offload/env.hpp"
#include "offload/tracegen.hpp"
#include "test_util.hpp"

using namespace offload;
using namespace offload::testutil;

namespace {

Trace simple_trace(int T) {
  std::vector<TraceStep> steps;
  for (int t = 0; t < T; ++t) {
    steps.push_back(make_step(t % 3, (t % 3 == 0) ? 0 : 9, 0.8, t % 3, 1.0, 0.5));
  }
  return manual_trace(std::move(steps));
}

}  // namespace

TEST_CASE("env reset initializes the episode") {
  GenConfig gen;
  const Trace trace = generate_trace(gen, 1);
  EpisodeEnv env(trace, 8, RewardParams{});
  CHECK(env.state().budget_left == 8);
  CHECK(env.state().time_left == 80);
  CHECK_FALSE(env.state().robot_cache.label.has_value());
  CHECK_FALSE(env.state().cloud_cache.label.has_value());
  CHECK(env.state().robot_cache.conf == 0.0);
  CHECK(env.state().phi_now == trace.steps[0].phi);
  CHECK(env.state().phi_prev == 0.0);

  CHECK_NOTHROW(EpisodeEnv(trace, 0, RewardParams{}));
  CHECK_THROWS_AS(EpisodeEnv(Trace{}, 4, RewardParams{}), std::invalid_argument);
  CHECK_THROWS_AS(EpisodeEnv(trace, -1, RewardParams{}), std::invalid_argument);
}

TEST_CASE("resolve_prediction maps actions onto sources") {
  Trace trace = manual_trace({make_step(5, 3, 0.6, 5, 1.0, 0.2), make_step(5, 5, 0.9, 5, 1.0, 0.1)});
  EpisodeEnv env(trace, 2, RewardParams{});

  auto [cloud_label, cloud_conf] = env.resolve_prediction(Action::QueryCloud);
  CHECK(cloud_label == 5);
  CHECK(cloud_conf == 1.0);

  auto [empty_label, empty_conf] = env.resolve_prediction(Action::UsePastCloud);
  CHECK_FALSE(empty_label.has_value());
  CHECK(empty_conf == 0.0);

  env.step(Action::QueryRobot);  // caches (3, 0.6)
  auto [robot_label, robot_conf] = env.resolve_prediction(Action::UsePastRobot);
  CHECK(robot_label == 3);
  CHECK(robot_conf == 0.6);
}

TEST_CASE("loss01 and reward") {
  CHECK(loss01(7, 7) == 0);
  CHECK(loss01(3, 7) == 1);
  CHECK(loss01(std::nullopt, 7) == 1);

  RewardParams params;  // alpha 1, beta 7, costs {0, 0, 0.4, 8}
  CHECK(reward(params, 0, Action::QueryRobot) == doctest::Approx(-2.8).epsilon(1e-12));
  CHECK(reward(params, 0, Action::QueryCloud) == doctest::Approx(-56.0).epsilon(1e-12));
  CHECK(reward(params, 1, Action::UsePastRobot) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("step dynamics: budget, ages, remapping") {
  Trace trace = simple_trace(10);
  RewardParams params;

  SUBCASE("query cloud decrements budget and resets its age") {
    EpisodeEnv env(trace, 2, params);
    StepResult res = env.step(Action::QueryCloud);
    CHECK(res.state.budget_left == 1);
    CHECK(res.state.cloud_cache.age == 0);
    CHECK(res.info.executed == Action::QueryCloud);
  }

  SUBCASE("query cloud with no budget executes as query robot") {
    EpisodeEnv env(trace, 0, params);
    StepResult res = env.step(Action::QueryCloud);
    CHECK(res.info.executed == Action::QueryRobot);
    CHECK(res.state.robot_cache.age == 0);
    CHECK(res.state.robot_cache.label == trace.steps[0].robot_pred);
    CHECK(res.state.budget_left == 0);
  }

  SUBCASE("cache use increments both ages and leaves budget alone") {
    EpisodeEnv env(trace, 3, params);
    env.step(Action::QueryRobot);
    env.step(Action::UsePastRobot);
    env.step(Action::UsePastRobot);
    env.step(Action::UsePastRobot);
    env.step(Action::UsePastRobot);  // robot cache age now 4
    CHECK(env.state().robot_cache.age == 4);
    StepResult res = env.step(Action::UsePastRobot);
    CHECK(res.state.robot_cache.age == 5);
    CHECK(res.state.budget_left == 3);
  }

  SUBCASE("stepping a finished episode throws") {
    EpisodeEnv env(trace, 0, params);
    for (int t = 0; t < 10; ++t) env.step(Action::UsePastRobot);
    CHECK(env.done());
    CHECK_THROWS_AS(env.step(Action::UsePastRobot), std::logic_error);
  }
}

TEST_CASE("encode_state layout") {
  GenConfig gen;
  const Trace trace = generate_trace(gen, 3);
  const double scale = 2.0;

  EpisodeEnv env(trace, 8, RewardParams{});
  auto f = encode_state(env.state(), 80, 8, scale);
  CHECK(f[0] == doctest::Approx(trace.steps[0].phi / scale));
  CHECK(f[1] == 0.0);
  CHECK(f[2] == 0.0);
  CHECK(f[3] == 0.0);
  CHECK(f[4] == 0.0);
  CHECK(f[5] == 1.0);
  CHECK(f[6] == 1.0);
  CHECK(f[7] == 1.0);
  CHECK(f[8] == 1.0);

  OffloadState s = env.state();
  s.robot_cache = CachedPrediction{5, 0.9, 2};
  s.cloud_cache = CachedPrediction{5, 1.0, 7};
  s.budget_left = 4;
  auto g = encode_state(s, 80, 8, scale);
  CHECK(g[4] == 1.0);  // both caches agree on label 5
  CHECK(g[7] == doctest::Approx(0.5));

  s.cloud_cache.label = 6;
  CHECK(encode_state(s, 80, 8, scale)[4] == 0.0);

  for (double v : g) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("episode invariants under random action sequences") {
  GenConfig gen;
  gen.T = 40;
  RewardParams params;
  const double bound = params.alpha + params.beta * 8.0;  // max cost is cloud
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> pick(0, 3);

  for (int episode = 0; episode < 30; ++episode) {
    const Trace trace = generate_trace(gen, 1000 + static_cast<std::uint64_t>(episode));
    const int budget = episode % 6;
    EpisodeEnv env(trace, budget, params);

    int cloud_queries = 0;
    long loss_sum = 0;
    double cost_sum = 0.0;
    double reward_sum = 0.0;
    int last_cloud_age = -1;
    int t = 0;
    while (!env.done()) {
      CHECK(env.state().time_left == gen.T - t);
      StepResult res = env.step(to_action(pick(rng)));
      CHECK(res.reward <= 0.0);
      CHECK(res.reward >= -bound);
      reward_sum += res.reward;
      loss_sum += res.info.loss;
      cost_sum += params.cost_of(res.info.executed);
      if (res.info.executed == Action::QueryCloud) {
        ++cloud_queries;
        CHECK(res.state.cloud_cache.age == 0);
        last_cloud_age = 0;
      } else if (last_cloud_age >= 0) {
        CHECK(res.state.cloud_cache.age == last_cloud_age + 1);
        last_cloud_age = res.state.cloud_cache.age;
      }
      ++t;
    }
    CHECK(cloud_queries <= budget);
    CHECK(reward_sum ==
          doctest::Approx(-params.alpha * static_cast<double>(loss_sum) - params.beta * cost_sum)
              .epsilon(1e-9));
  }
}

TEST_CASE("determinism: identical inputs give identical trajectories") {
  GenConfig gen;
  gen.T = 30;
  const Trace trace = generate_trace(gen, 77);
  RewardParams params;
  std::vector<Action> actions;
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> pick(0, 3);
  for (int t = 0; t < 30; ++t) actions.push_back(to_action(pick(rng)));

  EpisodeEnv a(trace, 4, params);
  EpisodeEnv b(trace, 4, params);
  for (Action act : actions) {
    StepResult ra = a.step(act);
    StepResult rb = b.step(act);
    CHECK(ra.reward == rb.reward);
    CHECK(ra.state.budget_left == rb.state.budget_left);
    CHECK(ra.state.phi_now == rb.state.phi_now);
    CHECK(ra.info.executed == rb.info.executed);
  }
}
