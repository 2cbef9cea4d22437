#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "offload/a2c.hpp"
#include "offload/tracegen.hpp"
#include "test_util.hpp"

using namespace offload;
using namespace offload::testutil;

namespace {

Rollout flat_rollout(std::vector<double> rewards, std::vector<double> values) {
  Rollout r;
  for (size_t t = 0; t < rewards.size(); ++t) {
    RolloutStep s;
    s.reward = rewards[t];
    s.value = values.empty() ? 0.0 : values[t];
    r.steps.push_back(s);
  }
  return r;
}

TrainerConfig tiny_trainer(long episodes) {
  TrainerConfig cfg;
  cfg.episodes = episodes;
  cfg.minibatch_episodes = 5;
  cfg.curve_every = 10;
  cfg.checkpoint_every = 1000000;
  cfg.seed = 31;
  return cfg;
}

GenConfig tiny_gen() {
  GenConfig gen;
  gen.T = 10;
  gen.num_identities = 6;
  gen.num_known = 3;
  gen.coherence_frac_min = 0.2;
  gen.coherence_frac_max = 0.5;
  gen.seed = 900000;
  return gen;
}

}  // namespace

TEST_CASE("returns and advantages") {
  SUBCASE("gamma 0 copies rewards") {
    const Rollout r = flat_rollout({-1.5, -2.0, -0.5}, {0.1, 0.2, 0.3});
    const ReturnsAdvantages ra = returns_and_advantages(r, 0.0);
    CHECK(ra.returns == std::vector<double>{-1.5, -2.0, -0.5});
    CHECK(ra.advantages[1] == doctest::Approx(-2.2));
  }

  SUBCASE("gamma 1 accumulates an arithmetic tail") {
    const Rollout r = flat_rollout({-1.0, -1.0, -1.0}, {});
    const ReturnsAdvantages ra = returns_and_advantages(r, 1.0);
    CHECK(ra.returns == std::vector<double>{-3.0, -2.0, -1.0});
  }

  SUBCASE("defining recursion holds exactly") {
    const auto batch = synthetic_rollouts(3, 9, 4, 77);
    for (const Rollout& r : batch) {
      const ReturnsAdvantages ra = returns_and_advantages(r, 0.99);
      for (size_t t = 0; t + 1 < r.steps.size(); ++t) {
        CHECK(ra.returns[t] == r.steps[t].reward + 0.99 * ra.returns[t + 1]);
      }
      CHECK(ra.returns.back() == r.steps.back().reward);
    }
  }
}

TEST_CASE("greedy and sampled action selection") {
  Eigen::VectorXd probs(4);
  probs << 0.1, 0.2, 0.6, 0.1;
  CHECK(argmax_action(probs) == 2);
  probs << 0.4, 0.4, 0.1, 0.1;
  CHECK(argmax_action(probs) == 0);

  std::mt19937_64 r1(3), r2(3);
  probs << 0.25, 0.25, 0.25, 0.25;
  for (int i = 0; i < 50; ++i) CHECK(sample_action(probs, r1) == sample_action(probs, r2));
}

TEST_CASE("rollout collection is budget-safe and matches batch forward") {
  const GenConfig gen = tiny_gen();
  const Trace trace = generate_trace(gen, gen.seed);
  PolicyNet actor(NetKind::Actor, kActorShape, 4);
  PolicyNet critic(NetKind::Critic, kCriticShape, 5);
  std::mt19937_64 rng(17);

  const Rollout rollout = collect_rollout(actor, critic, trace, 2, RewardParams{}, 1.0, rng, true);
  CHECK(rollout.steps.size() == 10);
  CHECK(rollout.executed_cloud_queries <= 2);
  CHECK(rollout.budget == 2);

  std::vector<Eigen::VectorXd> inputs;
  for (const RolloutStep& s : rollout.steps) {
    inputs.emplace_back(Eigen::Map<const Eigen::VectorXd>(s.state.data(), kStateDim));
  }
  const ForwardPass actor_pass = actor.forward(inputs);
  const ForwardPass critic_pass = critic.forward(inputs);
  for (size_t t = 0; t < rollout.steps.size(); ++t) {
    double prob_sum = 0.0;
    for (int a = 0; a < kNumActions; ++a) {
      CHECK(rollout.steps[t].probs[static_cast<size_t>(a)] == actor_pass.steps[t].output(a));
      prob_sum += rollout.steps[t].probs[static_cast<size_t>(a)];
    }
    CHECK(std::abs(prob_sum - 1.0) < 1e-9);
    CHECK(rollout.steps[t].value == critic_pass.steps[t].output(0));
  }
}

TEST_CASE("a2c update moves parameters and reports stats") {
  const GenConfig gen = tiny_gen();
  PolicyNet actor(NetKind::Actor, kActorShape, 8);
  PolicyNet critic(NetKind::Critic, kCriticShape, 9);
  std::mt19937_64 rng(23);
  TrainerConfig cfg = tiny_trainer(10);

  std::vector<Rollout> batch;
  for (int e = 0; e < 5; ++e) {
    const Trace trace = generate_trace(gen, gen.seed + static_cast<std::uint64_t>(e));
    batch.push_back(collect_rollout(actor, critic, trace, 3, RewardParams{}, 1.0, rng, true));
  }
  const Eigen::VectorXd before_actor = actor.params();
  const Eigen::VectorXd before_critic = critic.params();
  const UpdateStats stats = a2c_update(actor, critic, batch, cfg);

  CHECK(std::isfinite(stats.policy_loss));
  CHECK(stats.value_loss > 0.0);
  CHECK(stats.entropy > 0.0);
  CHECK(stats.entropy <= std::log(4.0) + 1e-9);
  CHECK(stats.actor_grad_norm > 0.0);
  CHECK((actor.params() - before_actor).cwiseAbs().maxCoeff() > 0.0);
  CHECK((critic.params() - before_critic).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("a2c update throws on non-finite parameters") {
  const GenConfig gen = tiny_gen();
  PolicyNet actor(NetKind::Actor, kActorShape, 8);
  PolicyNet critic(NetKind::Critic, kCriticShape, 9);
  std::mt19937_64 rng(23);
  const Trace trace = generate_trace(gen, gen.seed);
  std::vector<Rollout> batch{collect_rollout(actor, critic, trace, 3, RewardParams{}, 1.0, rng, true)};

  critic.params()(0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(a2c_update(actor, critic, batch, tiny_trainer(10)), TrainingDivergence);
}

TEST_CASE("training is deterministic given the config") {
  const TrainerConfig cfg = tiny_trainer(40);
  const GenConfig gen = tiny_gen();
  const RewardParams params;

  TrainResult r1 = train(cfg, gen, params);
  TrainResult r2 = train(cfg, gen, params);
  REQUIRE(r1.curve.size() == r2.curve.size());
  for (size_t i = 0; i < r1.curve.size(); ++i) {
    CHECK(r1.curve[i].episode == r2.curve[i].episode);
    CHECK(r1.curve[i].mean_reward == r2.curve[i].mean_reward);
    CHECK(r1.curve[i].policy_loss == r2.curve[i].policy_loss);
    CHECK(r1.curve[i].value_loss == r2.curve[i].value_loss);
    CHECK(r1.curve[i].entropy == r2.curve[i].entropy);
  }
  CHECK(r1.state.actor.params() == r2.state.actor.params());
  CHECK(r1.audited_episodes == 40);
  CHECK(r1.budget_violations == 0);
}

TEST_CASE("checkpoints round trip bit-exactly") {
  const TrainerConfig cfg = tiny_trainer(25);
  const GenConfig gen = tiny_gen();
  TrainResult result = train(cfg, gen, RewardParams{});

  const std::string path =
      (std::filesystem::temp_directory_path() / "offload_ckpt_test.json").string();
  save_checkpoint(result.state, path);
  TrainerState loaded = load_checkpoint(path);
  std::remove(path.c_str());

  CHECK(loaded.episode == result.state.episode);
  CHECK(loaded.phi_scale == result.state.phi_scale);
  CHECK(loaded.actor.params() == result.state.actor.params());
  CHECK(loaded.actor.rms_acc() == result.state.actor.rms_acc());
  CHECK(loaded.critic.params() == result.state.critic.params());

  std::ostringstream rng_a, rng_b;
  rng_a << result.state.rng;
  rng_b << loaded.rng;
  CHECK(rng_a.str() == rng_b.str());

  // Same rng state and parameters give a bit-identical next rollout.
  const Trace probe = generate_trace(gen, gen.seed + 500);
  Rollout ro1 = collect_rollout(result.state.actor, result.state.critic, probe, 2, RewardParams{},
                                result.state.phi_scale, result.state.rng, true);
  Rollout ro2 = collect_rollout(loaded.actor, loaded.critic, probe, 2, RewardParams{},
                                loaded.phi_scale, loaded.rng, true);
  REQUIRE(ro1.steps.size() == ro2.steps.size());
  for (size_t t = 0; t < ro1.steps.size(); ++t) {
    CHECK(ro1.steps[t].action == ro2.steps[t].action);
    CHECK(ro1.steps[t].reward == ro2.steps[t].reward);
    CHECK(ro1.steps[t].value == ro2.steps[t].value);
  }
}

TEST_CASE("resumed training continues the episode numbering") {
  TrainerConfig cfg = tiny_trainer(30);
  const GenConfig gen = tiny_gen();
  cfg.episodes = 15;
  TrainResult first = train(cfg, gen, RewardParams{});
  CHECK(first.state.episode == 15);

  cfg.episodes = 30;
  TrainerState resume = std::move(first.state);
  TrainResult second = train(cfg, gen, RewardParams{}, &resume);
  CHECK(second.state.episode == 30);
  REQUIRE(!second.curve.empty());
  CHECK(second.curve.front().episode > 15);
  CHECK(second.curve.back().episode == 30);
}

TEST_CASE("pathological entropy coefficient keeps the policy near uniform") {
  TrainerConfig cfg = tiny_trainer(200);
  cfg.entropy_coeff = 10.0;
  const GenConfig gen = tiny_gen();
  TrainResult result = train(cfg, gen, RewardParams{});
  REQUIRE(!result.curve.empty());
  CHECK(result.curve.back().entropy > 1.2);
}

TEST_CASE("phi scale calibration is positive and deterministic") {
  const GenConfig gen = tiny_gen();
  const double a = calibrate_phi_scale(gen, 20);
  const double b = calibrate_phi_scale(gen, 20);
  CHECK(a == b);
  CHECK(a > 0.0);
}
