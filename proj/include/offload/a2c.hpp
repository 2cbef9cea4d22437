#ifndef OFFLOAD_A2C_HPP_
#define OFFLOAD_A2C_HPP_

#include <deque>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "offload/env.hpp"
#include "offload/net.hpp"
#include "offload/tracegen.hpp"
#include "offload/types.hpp"

namespace offload {

struct TrainingDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr NetShape kActorShape{kStateDim, 64, 256, kNumActions};
inline constexpr NetShape kCriticShape{kStateDim, 64, 256, 1};

struct TrainerConfig {
  double actor_lr = 1e-4;
  double critic_lr = 5e-5;
  int minibatch_episodes = 20;
  double entropy_coeff = 0.01;
  double grad_clip_norm = 40.0;
  double gamma = 0.99;
  long episodes = 50000;
  std::vector<double> budget_fractions{0.10, 0.20, 0.50, 0.70, 1.0};
  std::uint64_t seed = 7;
  double phi_scale = 0.0;  // 0: calibrate as the 95th-percentile phi of training traces
  long checkpoint_every = 10000;
  long curve_every = 100;

  void validate() const;  // throws ConfigError
};

struct RolloutStep {
  std::array<double, kStateDim> state;
  Action action = Action::UsePastRobot;  // executed action
  double reward = 0.0;
  std::array<double, kNumActions> probs{};
  double value = 0.0;
};

struct Rollout {
  std::string trace_id;
  int budget = 0;
  std::vector<RolloutStep> steps;
  int executed_cloud_queries = 0;
  double total_reward = 0.0;
};

struct ReturnsAdvantages {
  std::vector<double> returns;
  std::vector<double> advantages;
};

// Discounted Monte-Carlo returns (terminal bootstrap 0) and advantages
// against the rollout's recorded critic values.
ReturnsAdvantages returns_and_advantages(const Rollout& rollout, double gamma);

int argmax_action(const Eigen::VectorXd& probs);  // ties -> smallest code
int sample_action(const Eigen::VectorXd& probs, std::mt19937_64& rng);

// Runs one episode, sampling actions from the actor (or taking the greedy
// argmax). Streams both networks so recorded probabilities and values match
// a whole-sequence forward pass exactly.
Rollout collect_rollout(const PolicyNet& actor, const PolicyNet& critic, const Trace& trace,
                        int budget, const RewardParams& params, double phi_scale,
                        std::mt19937_64& rng, bool sample);

// Policy-gradient objective with entropy bonus, averaged over all steps of
// the batch. Advantages are constants here. The forward-only value and the
// analytic gradient share one code path so finite differences can check it.
double actor_objective(const PolicyNet& actor, std::span<const Rollout> batch,
                       const std::vector<std::vector<double>>& advantages, double entropy_coeff);
Eigen::VectorXd actor_objective_grad(const PolicyNet& actor, std::span<const Rollout> batch,
                                     const std::vector<std::vector<double>>& advantages,
                                     double entropy_coeff, double* pg_loss_out = nullptr,
                                     double* entropy_out = nullptr);

// Mean squared value-regression error against the returns.
double critic_objective(const PolicyNet& critic, std::span<const Rollout> batch,
                        const std::vector<std::vector<double>>& returns);
Eigen::VectorXd critic_objective_grad(const PolicyNet& critic, std::span<const Rollout> batch,
                                      const std::vector<std::vector<double>>& returns,
                                      double* loss_out = nullptr);

// Rescales grad to max_norm when its L2 norm exceeds it; returns the pre-clip norm.
double clip_global_norm(Eigen::VectorXd& grad, double max_norm);

void rmsprop_step(Eigen::VectorXd& theta, Eigen::VectorXd& acc, const Eigen::VectorXd& grad,
                  double lr, double decay = 0.99, double eps = 1e-5);

struct UpdateStats {
  double policy_loss = 0.0;  // -mean log pi(a|s) A, entropy term excluded
  double value_loss = 0.0;
  double entropy = 0.0;  // mean per-step policy entropy, nats
  double actor_grad_norm = 0.0;
  double critic_grad_norm = 0.0;
};

// One synchronous update over a minibatch of rollouts. Throws
// TrainingDivergence on non-finite losses or gradients.
UpdateStats a2c_update(PolicyNet& actor, PolicyNet& critic, std::span<const Rollout> batch,
                       const TrainerConfig& cfg);

struct TrainerState {
  PolicyNet actor;
  PolicyNet critic;
  std::mt19937_64 rng;
  long episode = 0;
  double phi_scale = 1.0;
  std::deque<double> reward_window;  // most recent episode rewards, capacity 1000

  TrainerState(PolicyNet actor_net, PolicyNet critic_net)
      : actor(std::move(actor_net)), critic(std::move(critic_net)) {}
};

struct CurveRow {
  long episode = 0;
  double mean_reward = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

struct TrainResult {
  TrainerState state;
  std::vector<CurveRow> curve;
  long audited_episodes = 0;
  long budget_violations = 0;
};

// 95th-percentile phi over a sample of training traces.
double calibrate_phi_scale(const GenConfig& gen_cfg, int sample_traces = 100);

TrainerState fresh_trainer_state(const TrainerConfig& cfg, const GenConfig& gen_cfg);

// Synchronous A2C over freshly generated traces (seed gen_cfg.seed + episode),
// budget fraction resampled per episode. Deterministic given configs.
// on_checkpoint, when set, fires every cfg.checkpoint_every episodes and at
// the end.
TrainResult train(const TrainerConfig& cfg, const GenConfig& gen_cfg, const RewardParams& params,
                  TrainerState* resume = nullptr,
                  const std::function<void(const TrainerState&)>& on_checkpoint = nullptr);

void save_checkpoint(const TrainerState& state, const std::string& path);
TrainerState load_checkpoint(const std::string& path);

void write_training_curve(const std::vector<CurveRow>& rows, const std::string& path,
                          bool append);

}  // namespace offload

#endif  // OFFLOAD_A2C_HPP_
