#include <doctest.h>

#include <random>

#include "offload/a2c.hpp"
#include "offload/net.hpp"
#include "test_util.hpp"

using namespace offload;
using namespace offload::testutil;

namespace {

std::vector<Eigen::VectorXd> random_inputs(int n, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Eigen::VectorXd> xs;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd x(dim);
    for (int j = 0; j < dim; ++j) x(j) = unit(rng);
    xs.push_back(std::move(x));
  }
  return xs;
}

constexpr NetShape kMiniActor{9, 4, 8, 4};
constexpr NetShape kMiniCritic{9, 4, 8, 1};

}  // namespace

TEST_CASE("orthogonal initialization") {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd square = orthogonal_matrix(32, 32, rng);
  CHECK((square * square.transpose() - Eigen::MatrixXd::Identity(32, 32)).cwiseAbs().maxCoeff() <
        1e-6);

  const Eigen::MatrixXd tall = orthogonal_matrix(48, 16, rng);
  CHECK((tall.transpose() * tall - Eigen::MatrixXd::Identity(16, 16)).cwiseAbs().maxCoeff() < 1e-6);

  const Eigen::MatrixXd wide = orthogonal_matrix(16, 48, rng);
  CHECK((wide * wide.transpose() - Eigen::MatrixXd::Identity(16, 16)).cwiseAbs().maxCoeff() < 1e-6);

  // Recurrent gate blocks are square and orthogonal; forget bias is 1.
  PolicyNet net(NetKind::Actor, kActorShape, 44);
  auto v = net.views();
  for (int gate = 0; gate < 4; ++gate) {
    const Eigen::MatrixXd block = v.lstm_wh.middleRows(gate * 64, 64);
    CHECK((block * block.transpose() - Eigen::MatrixXd::Identity(64, 64)).cwiseAbs().maxCoeff() <
          1e-6);
  }
  CHECK(v.lstm_b.segment(64, 64).minCoeff() == 1.0);
  CHECK(v.lstm_b.segment(0, 64).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("initialization is deterministic in the seed") {
  PolicyNet a(NetKind::Actor, kActorShape, 7);
  PolicyNet b(NetKind::Actor, kActorShape, 7);
  PolicyNet c(NetKind::Actor, kActorShape, 8);
  CHECK(a.params() == b.params());
  CHECK(a.params() != c.params());
}

TEST_CASE("head dimensions and zero-parameter softmax") {
  PolicyNet actor(NetKind::Actor, kActorShape, 1);
  PolicyNet critic(NetKind::Critic, kCriticShape, 1);
  CHECK(actor.shape().out == 4);
  CHECK(critic.shape().out == 1);
  CHECK_THROWS_AS(PolicyNet(NetKind::Critic, kActorShape, 1), std::invalid_argument);

  actor.params().setZero();
  LstmState state = actor.zero_state();
  const Eigen::VectorXd probs = actor.step_forward(Eigen::VectorXd::Zero(9), state);
  for (int i = 0; i < 4; ++i) CHECK(probs(i) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("forward pass: normalization, purity, statefulness") {
  PolicyNet actor(NetKind::Actor, kActorShape, 21);
  const auto inputs = random_inputs(12, 9, 5);

  const ForwardPass pass1 = actor.forward(inputs);
  const ForwardPass pass2 = actor.forward(inputs);
  for (size_t t = 0; t < inputs.size(); ++t) {
    CHECK(std::abs(pass1.steps[t].output.sum() - 1.0) < 1e-9);
    CHECK(pass1.steps[t].output.minCoeff() > 0.0);
    CHECK(pass1.steps[t].output == pass2.steps[t].output);
  }

  // Streaming forward equals whole-sequence forward.
  LstmState state = actor.zero_state();
  for (size_t t = 0; t < inputs.size(); ++t) {
    const Eigen::VectorXd out = actor.step_forward(inputs[t], state);
    CHECK((out - pass1.steps[t].output).cwiseAbs().maxCoeff() == 0.0);
  }

  // Recurrence: permuting the sequence changes per-step outputs.
  auto permuted = inputs;
  std::swap(permuted[0], permuted[1]);
  const ForwardPass pass3 = actor.forward(permuted);
  CHECK((pass3.steps[2].output - pass1.steps[2].output).cwiseAbs().maxCoeff() > 0.0);

  CHECK_THROWS_AS(actor.forward({Eigen::VectorXd::Zero(3)}), std::invalid_argument);
}

TEST_CASE("analytic BPTT gradients match central finite differences") {
  const auto batch = synthetic_rollouts(2, 6, 4, 1234);
  std::vector<std::vector<double>> advantages, returns;
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> spread(-2.0, 2.0);
  for (const Rollout& r : batch) {
    std::vector<double> adv, ret;
    for (size_t t = 0; t < r.steps.size(); ++t) {
      adv.push_back(spread(rng));
      ret.push_back(spread(rng));
    }
    advantages.push_back(adv);
    returns.push_back(ret);
  }

  SUBCASE("actor loss") {
    PolicyNet actor(NetKind::Actor, kMiniActor, 99);
    const Eigen::VectorXd analytic = actor_objective_grad(actor, batch, advantages, 0.01);
    const auto outcome = finite_difference_check(
        actor, [&] { return actor_objective(actor, batch, advantages, 0.01); }, analytic, 1e-5,
        1e-4);
    CAPTURE(outcome.worst);
    CHECK(static_cast<double>(outcome.bad) <= 0.01 * static_cast<double>(outcome.total));
  }

  SUBCASE("critic loss") {
    PolicyNet critic(NetKind::Critic, kMiniCritic, 98);
    const Eigen::VectorXd analytic = critic_objective_grad(critic, batch, returns);
    const auto outcome = finite_difference_check(
        critic, [&] { return critic_objective(critic, batch, returns); }, analytic, 1e-5, 1e-4);
    CAPTURE(outcome.worst);
    CHECK(static_cast<double>(outcome.bad) <= 0.01 * static_cast<double>(outcome.total));
  }
}

TEST_CASE("gradient clipping rescales to the threshold") {
  Eigen::VectorXd g = Eigen::VectorXd::Constant(100, 8.0);  // norm 80
  const double pre = clip_global_norm(g, 40.0);
  CHECK(pre == doctest::Approx(80.0));
  CHECK(g.norm() == doctest::Approx(40.0).epsilon(1e-12));

  Eigen::VectorXd small = Eigen::VectorXd::Constant(4, 0.1);
  const Eigen::VectorXd copy = small;
  clip_global_norm(small, 40.0);
  CHECK(small == copy);
}

TEST_CASE("uniform policy entropy is ln 4") {
  const Eigen::VectorXd logits = Eigen::VectorXd::Zero(4);
  const Eigen::VectorXd p = stable_softmax(logits);
  const Eigen::VectorXd logp = log_softmax(logits);
  CHECK(-p.dot(logp) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}
