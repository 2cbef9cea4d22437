#ifndef OFFLOAD_NET_HPP_
#define OFFLOAD_NET_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

namespace offload {

enum class NetKind { Actor, Critic };

// Layer dimensions of the recurrent policy/value network:
// input -> LSTM(hidden) -> dense(fc, relu) -> dense(out).
struct NetShape {
  int input = 9;
  int hidden = 64;
  int fc = 256;
  int out = 4;

  int lstm_wx_size() const { return 4 * hidden * input; }
  int lstm_wh_size() const { return 4 * hidden * hidden; }
  int lstm_b_size() const { return 4 * hidden; }
  int fc_w_size() const { return fc * hidden; }
  int fc_b_size() const { return fc; }
  int head_w_size() const { return out * fc; }
  int head_b_size() const { return out; }
  int total() const {
    return lstm_wx_size() + lstm_wh_size() + lstm_b_size() + fc_w_size() + fc_b_size() +
           head_w_size() + head_b_size();
  }
  bool operator==(const NetShape&) const = default;
};

// Mutable matrix views into one flat parameter (or gradient) vector.
struct ParamViews {
  Eigen::Map<Eigen::MatrixXd> lstm_wx, lstm_wh;
  Eigen::Map<Eigen::VectorXd> lstm_b;
  Eigen::Map<Eigen::MatrixXd> fc_w;
  Eigen::Map<Eigen::VectorXd> fc_b;
  Eigen::Map<Eigen::MatrixXd> head_w;
  Eigen::Map<Eigen::VectorXd> head_b;
};
struct ConstParamViews {
  Eigen::Map<const Eigen::MatrixXd> lstm_wx, lstm_wh;
  Eigen::Map<const Eigen::VectorXd> lstm_b;
  Eigen::Map<const Eigen::MatrixXd> fc_w;
  Eigen::Map<const Eigen::VectorXd> fc_b;
  Eigen::Map<const Eigen::MatrixXd> head_w;
  Eigen::Map<const Eigen::VectorXd> head_b;
};

struct LstmState {
  Eigen::VectorXd h;
  Eigen::VectorXd c;
};

// Per-step activations kept for backpropagation through time.
struct StepActivations {
  Eigen::VectorXd x;
  Eigen::VectorXd gate_i, gate_f, gate_g, gate_o;
  Eigen::VectorXd c, tanh_c, h;
  Eigen::VectorXd fc_pre, fc_post;
  Eigen::VectorXd logits;
  Eigen::VectorXd output;  // softmax probabilities (actor) or logits unchanged (critic)
};

struct ForwardPass {
  std::vector<StepActivations> steps;
  LstmState final_state;
};

// Rows of an orthonormal (or column-orthonormal) matrix from the QR
// decomposition of a standard Gaussian draw, gain 1.
Eigen::MatrixXd orthogonal_matrix(int rows, int cols, std::mt19937_64& rng);

Eigen::VectorXd stable_softmax(const Eigen::VectorXd& logits);
Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits);

// Recurrent actor or critic network over flat 64-bit parameters, with the
// RMSprop accumulator stored alongside. Forward passes are const and safe to
// run concurrently from multiple threads on separate LstmState instances.
class PolicyNet {
 public:
  PolicyNet(NetKind kind, NetShape shape, std::uint64_t seed);

  NetKind kind() const { return kind_; }
  const NetShape& shape() const { return shape_; }
  int param_count() const { return shape_.total(); }

  Eigen::VectorXd& params() { return theta_; }
  const Eigen::VectorXd& params() const { return theta_; }
  Eigen::VectorXd& rms_acc() { return rms_; }
  const Eigen::VectorXd& rms_acc() const { return rms_; }

  ParamViews views();
  ConstParamViews views() const;
  static ParamViews map_views(double* data, const NetShape& shape);
  static ConstParamViews map_views(const double* data, const NetShape& shape);

  LstmState zero_state() const;

  // One recurrent step; updates state in place, returns the head output
  // (softmax probabilities for the actor, a 1-vector for the critic).
  Eigen::VectorXd step_forward(const Eigen::Ref<const Eigen::VectorXd>& input,
                               LstmState& state) const;

  // Whole-sequence forward from a zero initial state, keeping activations.
  ForwardPass forward(const std::vector<Eigen::VectorXd>& inputs) const;

  // Backpropagation through time. d_output[t] is dLoss/d(head output) --
  // for the actor dLoss/dlogits, for the critic dLoss/dvalue. Returns the
  // flat gradient, same layout as params().
  Eigen::VectorXd backward(const ForwardPass& pass,
                           const std::vector<Eigen::VectorXd>& d_output) const;

 private:
  void init_params(std::uint64_t seed);
  Eigen::VectorXd head_transform(const Eigen::VectorXd& logits) const;

  NetKind kind_;
  NetShape shape_;
  Eigen::VectorXd theta_;
  Eigen::VectorXd rms_;
};

}  // namespace offload

#endif  // OFFLOAD_NET_HPP_
