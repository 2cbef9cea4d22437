#include "offload/a2c.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "offload/policies.hpp"
#include "offload/util.hpp"

namespace offload {

using nlohmann::json;

void TrainerConfig::validate() const {
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) throw ConfigError("trainer: learning rates must be > 0");
  if (minibatch_episodes < 1) throw ConfigError("trainer: minibatch_episodes must be >= 1");
  if (!(entropy_coeff >= 0.0)) throw ConfigError("trainer: entropy_coeff must be >= 0");
  if (!(grad_clip_norm > 0.0)) throw ConfigError("trainer: grad_clip_norm must be > 0");
  if (gamma < 0.0 || gamma > 1.0) throw ConfigError("trainer: gamma must be in [0, 1]");
  if (episodes < 0) throw ConfigError("trainer: episodes must be >= 0");
  if (budget_fractions.empty()) throw ConfigError("trainer: budget_fractions is empty");
  for (double f : budget_fractions) {
    if (f < 0.0 || f > 1.0) throw ConfigError("trainer: budget fractions must be in [0, 1]");
  }
  if (phi_scale < 0.0) throw ConfigError("trainer: phi_scale must be >= 0");
  if (checkpoint_every < 1 || curve_every < 1) {
    throw ConfigError("trainer: checkpoint_every and curve_every must be >= 1");
  }
}

ReturnsAdvantages returns_and_advantages(const Rollout& rollout, double gamma) {
  const size_t n = rollout.steps.size();
  ReturnsAdvantages out;
  out.returns.resize(n);
  out.advantages.resize(n);
  double g = 0.0;
  for (size_t i = n; i-- > 0;) {
    g = rollout.steps[i].reward + gamma * g;
    out.returns[i] = g;
    out.advantages[i] = g - rollout.steps[i].value;
  }
  return out;
}

int argmax_action(const Eigen::VectorXd& probs) {
  int best = 0;
  for (int i = 1; i < probs.size(); ++i) {
    if (probs(i) > probs(best)) best = i;
  }
  return best;
}

int sample_action(const Eigen::VectorXd& probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double r = unit(rng);
  double cum = 0.0;
  for (int i = 0; i < probs.size(); ++i) {
    cum += probs(i);
    if (r < cum) return i;
  }
  return static_cast<int>(probs.size()) - 1;
}

Rollout collect_rollout(const PolicyNet& actor, const PolicyNet& critic, const Trace& trace,
                        int budget, const RewardParams& params, double phi_scale,
                        std::mt19937_64& rng, bool sample) {
  EpisodeEnv env(trace, budget, params);
  const int T = env.horizon();
  LstmState actor_state = actor.zero_state();
  LstmState critic_state = critic.zero_state();

  Rollout rollout;
  rollout.trace_id = trace.id;
  rollout.budget = budget;
  rollout.steps.reserve(static_cast<size_t>(T));
  while (!env.done()) {
    const auto encoded = encode_state(env.state(), T, budget, phi_scale);
    const Eigen::Map<const Eigen::VectorXd> x(encoded.data(), kStateDim);
    const Eigen::VectorXd probs = actor.step_forward(x, actor_state);
    const double value = critic.step_forward(x, critic_state)(0);
    const int code = sample ? sample_action(probs, rng) : argmax_action(probs);
    const StepResult res = env.step(to_action(code));

    RolloutStep step;
    step.state = encoded;
    step.action = res.info.executed;
    step.reward = res.reward;
    for (int i = 0; i < kNumActions; ++i) step.probs[static_cast<size_t>(i)] = probs(i);
    step.value = value;
    rollout.steps.push_back(step);
    rollout.total_reward += res.reward;
    if (res.info.executed == Action::QueryCloud) rollout.executed_cloud_queries += 1;
  }
  return rollout;
}

namespace {

std::vector<Eigen::VectorXd> rollout_inputs(const Rollout& rollout) {
  std::vector<Eigen::VectorXd> inputs;
  inputs.reserve(rollout.steps.size());
  for (const RolloutStep& step : rollout.steps) {
    inputs.emplace_back(Eigen::Map<const Eigen::VectorXd>(step.state.data(), kStateDim));
  }
  return inputs;
}

size_t batch_step_count(std::span<const Rollout> batch) {
  size_t n = 0;
  for (const Rollout& r : batch) n += r.steps.size();
  return n;
}

// Shared actor forward/backward pass; the objective is
//   mean_t[-log pi(a_t|s_t) A_t] - entropy_coeff * mean_t[H(pi(.|s_t))].
double actor_pass(const PolicyNet& actor, std::span<const Rollout> batch,
                  const std::vector<std::vector<double>>& advantages, double entropy_coeff,
                  Eigen::VectorXd* grad_out, double* pg_loss_out, double* entropy_out) {
  const size_t total = batch_step_count(batch);
  if (total == 0) throw std::invalid_argument("actor objective: empty batch");
  double pg_loss = 0.0;
  double entropy_sum = 0.0;
  if (grad_out) grad_out->setZero(actor.param_count());

  for (size_t ep = 0; ep < batch.size(); ++ep) {
    const Rollout& rollout = batch[ep];
    const ForwardPass pass = actor.forward(rollout_inputs(rollout));
    std::vector<Eigen::VectorXd> dlogits;
    if (grad_out) dlogits.resize(rollout.steps.size());
    for (size_t t = 0; t < rollout.steps.size(); ++t) {
      const Eigen::VectorXd& p = pass.steps[t].output;
      const Eigen::VectorXd logp = log_softmax(pass.steps[t].logits);
      const int a = action_code(rollout.steps[t].action);
      const double adv = advantages[ep][t];
      const double h = -p.dot(logp);
      pg_loss += -logp(a) * adv;
      entropy_sum += h;
      if (grad_out) {
        Eigen::VectorXd d = adv * p;
        d(a) -= adv;
        d += entropy_coeff * p.cwiseProduct((logp.array() + h).matrix());
        dlogits[t] = std::move(d);
      }
    }
    if (grad_out) *grad_out += actor.backward(pass, dlogits);
  }
  const double n = static_cast<double>(total);
  if (grad_out) *grad_out /= n;
  if (pg_loss_out) *pg_loss_out = pg_loss / n;
  if (entropy_out) *entropy_out = entropy_sum / n;
  return pg_loss / n - entropy_coeff * entropy_sum / n;
}

double critic_pass(const PolicyNet& critic, std::span<const Rollout> batch,
                   const std::vector<std::vector<double>>& returns, Eigen::VectorXd* grad_out) {
  const size_t total = batch_step_count(batch);
  if (total == 0) throw std::invalid_argument("critic objective: empty batch");
  double loss = 0.0;
  if (grad_out) grad_out->setZero(critic.param_count());

  for (size_t ep = 0; ep < batch.size(); ++ep) {
    const Rollout& rollout = batch[ep];
    const ForwardPass pass = critic.forward(rollout_inputs(rollout));
    std::vector<Eigen::VectorXd> dvalue;
    if (grad_out) dvalue.resize(rollout.steps.size());
    for (size_t t = 0; t < rollout.steps.size(); ++t) {
      const double diff = pass.steps[t].output(0) - returns[ep][t];
      loss += diff * diff;
      if (grad_out) dvalue[t] = Eigen::VectorXd::Constant(1, 2.0 * diff);
    }
    if (grad_out) *grad_out += critic.backward(pass, dvalue);
  }
  const double n = static_cast<double>(total);
  if (grad_out) *grad_out /= n;
  return loss / n;
}

}  // namespace

double actor_objective(const PolicyNet& actor, std::span<const Rollout> batch,
                       const std::vector<std::vector<double>>& advantages, double entropy_coeff) {
  return actor_pass(actor, batch, advantages, entropy_coeff, nullptr, nullptr, nullptr);
}

Eigen::VectorXd actor_objective_grad(const PolicyNet& actor, std::span<const Rollout> batch,
                                     const std::vector<std::vector<double>>& advantages,
                                     double entropy_coeff, double* pg_loss_out,
                                     double* entropy_out) {
  Eigen::VectorXd grad;
  actor_pass(actor, batch, advantages, entropy_coeff, &grad, pg_loss_out, entropy_out);
  return grad;
}

double critic_objective(const PolicyNet& critic, std::span<const Rollout> batch,
                        const std::vector<std::vector<double>>& returns) {
  return critic_pass(critic, batch, returns, nullptr);
}

Eigen::VectorXd critic_objective_grad(const PolicyNet& critic, std::span<const Rollout> batch,
                                      const std::vector<std::vector<double>>& returns,
                                      double* loss_out) {
  Eigen::VectorXd grad;
  const double loss = critic_pass(critic, batch, returns, &grad);
  if (loss_out) *loss_out = loss;
  return grad;
}

double clip_global_norm(Eigen::VectorXd& grad, double max_norm) {
  const double norm = grad.norm();
  if (norm > max_norm && norm > 0.0) grad *= max_norm / norm;
  return norm;
}

void rmsprop_step(Eigen::VectorXd& theta, Eigen::VectorXd& acc, const Eigen::VectorXd& grad,
                  double lr, double decay, double eps) {
  acc = decay * acc + (1.0 - decay) * grad.cwiseProduct(grad);
  theta -= lr * grad.cwiseQuotient((acc.cwiseSqrt().array() + eps).matrix());
}

UpdateStats a2c_update(PolicyNet& actor, PolicyNet& critic, std::span<const Rollout> batch,
                       const TrainerConfig& cfg) {
  if (batch.empty()) throw std::invalid_argument("a2c_update: empty batch");
  std::vector<std::vector<double>> returns(batch.size());
  std::vector<std::vector<double>> advantages(batch.size());
  for (size_t ep = 0; ep < batch.size(); ++ep) {
    ReturnsAdvantages ra = returns_and_advantages(batch[ep], cfg.gamma);
    returns[ep] = std::move(ra.returns);
    advantages[ep] = std::move(ra.advantages);
  }

  UpdateStats stats;
  Eigen::VectorXd actor_grad =
      actor_objective_grad(actor, batch, advantages, cfg.entropy_coeff, &stats.policy_loss,
                           &stats.entropy);
  Eigen::VectorXd critic_grad = critic_objective_grad(critic, batch, returns, &stats.value_loss);

  if (!std::isfinite(stats.policy_loss) || !std::isfinite(stats.value_loss) ||
      !actor_grad.allFinite() || !critic_grad.allFinite()) {
    throw TrainingDivergence("a2c_update: non-finite loss or gradient (policy_loss=" +
                             format_double(stats.policy_loss) +
                             ", value_loss=" + format_double(stats.value_loss) + ")");
  }

  stats.actor_grad_norm = clip_global_norm(actor_grad, cfg.grad_clip_norm);
  stats.critic_grad_norm = clip_global_norm(critic_grad, cfg.grad_clip_norm);
  rmsprop_step(actor.params(), actor.rms_acc(), actor_grad, cfg.actor_lr);
  rmsprop_step(critic.params(), critic.rms_acc(), critic_grad, cfg.critic_lr);
  return stats;
}

double calibrate_phi_scale(const GenConfig& gen_cfg, int sample_traces) {
  std::vector<double> phis;
  for (int i = 0; i < sample_traces; ++i) {
    const Trace trace = generate_trace(gen_cfg, gen_cfg.seed + static_cast<std::uint64_t>(i));
    for (const TraceStep& step : trace.steps) phis.push_back(step.phi);
  }
  const double p95 = percentile(std::move(phis), 95.0);
  return p95 > 0.0 ? p95 : 1.0;
}

TrainerState fresh_trainer_state(const TrainerConfig& cfg, const GenConfig& gen_cfg) {
  PolicyNet actor(NetKind::Actor, kActorShape, mix_seed(cfg.seed, {0x0ac7}));
  PolicyNet critic(NetKind::Critic, kCriticShape, mix_seed(cfg.seed, {0x0c41}));
  TrainerState state(std::move(actor), std::move(critic));
  state.rng.seed(mix_seed(cfg.seed, {0x7a41}));
  state.phi_scale = cfg.phi_scale > 0.0 ? cfg.phi_scale : calibrate_phi_scale(gen_cfg);
  return state;
}

TrainResult train(const TrainerConfig& cfg, const GenConfig& gen_cfg, const RewardParams& params,
                  TrainerState* resume, const std::function<void(const TrainerState&)>& on_checkpoint) {
  cfg.validate();
  gen_cfg.validate();

  TrainerState state = resume ? std::move(*resume) : fresh_trainer_state(cfg, gen_cfg);
  std::vector<CurveRow> curve;
  long audited = 0;
  long violations = 0;

  std::vector<Rollout> batch;
  batch.reserve(static_cast<size_t>(cfg.minibatch_episodes));
  UpdateStats last{};
  std::uniform_int_distribution<size_t> pick_fraction(0, cfg.budget_fractions.size() - 1);

  while (state.episode < cfg.episodes) {
    const std::uint64_t trace_seed = gen_cfg.seed + static_cast<std::uint64_t>(state.episode);
    const Trace trace = generate_trace(gen_cfg, trace_seed);
    const double fraction = cfg.budget_fractions[pick_fraction(state.rng)];
    const int budget = static_cast<int>(std::lround(fraction * trace.horizon()));

    Rollout rollout = collect_rollout(state.actor, state.critic, trace, budget, params,
                                      state.phi_scale, state.rng, /*sample=*/true);
    audited += 1;
    if (rollout.executed_cloud_queries > budget) violations += 1;

    state.reward_window.push_back(rollout.total_reward);
    if (state.reward_window.size() > 1000) state.reward_window.pop_front();
    batch.push_back(std::move(rollout));
    state.episode += 1;

    if (static_cast<int>(batch.size()) >= cfg.minibatch_episodes ||
        state.episode == cfg.episodes) {
      last = a2c_update(state.actor, state.critic, batch, cfg);
      batch.clear();
    }
    if (state.episode % cfg.curve_every == 0 || state.episode == cfg.episodes) {
      const double mean_reward =
          std::accumulate(state.reward_window.begin(), state.reward_window.end(), 0.0) /
          static_cast<double>(state.reward_window.size());
      curve.push_back({state.episode, mean_reward, last.policy_loss, last.value_loss,
                       last.entropy});
    }
    if (on_checkpoint &&
        (state.episode % cfg.checkpoint_every == 0 || state.episode == cfg.episodes)) {
      on_checkpoint(state);
    }
  }
  return TrainResult{std::move(state), std::move(curve), audited, violations};
}

namespace {

json net_to_json(const PolicyNet& net) {
  const NetShape& s = net.shape();
  return json{{"kind", net.kind() == NetKind::Actor ? "actor" : "critic"},
              {"input", s.input},
              {"hidden", s.hidden},
              {"fc", s.fc},
              {"out", s.out},
              {"params", std::vector<double>(net.params().data(),
                                             net.params().data() + net.params().size())},
              {"rms", std::vector<double>(net.rms_acc().data(),
                                          net.rms_acc().data() + net.rms_acc().size())}};
}

PolicyNet net_from_json(const json& j) {
  const NetShape shape{j.at("input").get<int>(), j.at("hidden").get<int>(), j.at("fc").get<int>(),
                       j.at("out").get<int>()};
  const NetKind kind =
      j.at("kind").get<std::string>() == "actor" ? NetKind::Actor : NetKind::Critic;
  PolicyNet net(kind, shape, 0);
  const auto params = j.at("params").get<std::vector<double>>();
  const auto rms = j.at("rms").get<std::vector<double>>();
  if (static_cast<int>(params.size()) != net.param_count() ||
      static_cast<int>(rms.size()) != net.param_count()) {
    throw std::runtime_error("checkpoint: parameter count does not match network shape");
  }
  net.params() = Eigen::Map<const Eigen::VectorXd>(params.data(), net.param_count());
  net.rms_acc() = Eigen::Map<const Eigen::VectorXd>(rms.data(), net.param_count());
  return net;
}

}  // namespace

void save_checkpoint(const TrainerState& state, const std::string& path) {
  std::ostringstream rng_text;
  rng_text << state.rng;
  json j{{"format", "offload-checkpoint-v1"},
         {"episode", state.episode},
         {"phi_scale", state.phi_scale},
         {"rng", rng_text.str()},
         {"reward_window",
          std::vector<double>(state.reward_window.begin(), state.reward_window.end())},
         {"actor", net_to_json(state.actor)},
         {"critic", net_to_json(state.critic)}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out << j.dump() << '\n';
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

TrainerState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  json j;
  in >> j;
  if (j.value("format", "") != "offload-checkpoint-v1") {
    throw std::runtime_error("load_checkpoint: unrecognized checkpoint format in " + path);
  }
  TrainerState state(net_from_json(j.at("actor")), net_from_json(j.at("critic")));
  state.episode = j.at("episode").get<long>();
  state.phi_scale = j.at("phi_scale").get<double>();
  std::istringstream rng_text(j.at("rng").get<std::string>());
  rng_text >> state.rng;
  for (double r : j.at("reward_window").get<std::vector<double>>()) {
    state.reward_window.push_back(r);
  }
  return state;
}

void write_training_curve(const std::vector<CurveRow>& rows, const std::string& path,
                          bool append) {
  std::ofstream out(path, append ? std::ios::app | std::ios::binary : std::ios::binary);
  if (!out) throw std::runtime_error("write_training_curve: cannot open " + path);
  if (!append) out << "episode,mean_reward,policy_loss,value_loss,entropy\n";
  for (const CurveRow& row : rows) {
    out << row.episode << ',' << format_double(row.mean_reward) << ','
        << format_double(row.policy_loss) << ',' << format_double(row.value_loss) << ','
        << format_double(row.entropy) << '\n';
  }
  if (!out) throw std::runtime_error("write_training_curve: write failed for " + path);
}

}  // namespace offload
