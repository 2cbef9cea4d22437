#include "offload/net.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace offload {

Eigen::MatrixXd orthogonal_matrix(int rows, int cols, std::mt19937_64& rng) {
  const bool transpose = rows < cols;
  const int r = transpose ? cols : rows;
  const int c = transpose ? rows : cols;
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd a(r, c);
  for (int j = 0; j < c; ++j) {
    for (int i = 0; i < r; ++i) a(i, j) = gauss(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(r, c);
  // Fix the sign ambiguity so the draw is unique given the Gaussian sample.
  const Eigen::MatrixXd rmat = qr.matrixQR().topRows(c).triangularView<Eigen::Upper>();
  for (int j = 0; j < c; ++j) {
    if (rmat(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return transpose ? Eigen::MatrixXd(q.transpose()) : q;
}

Eigen::VectorXd stable_softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - m).exp();
  return e / e.sum();
}

Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  const double lse = std::log((logits.array() - m).exp().sum());
  return logits.array() - m - lse;
}

namespace {

struct Offsets {
  int lstm_wx, lstm_wh, lstm_b, fc_w, fc_b, head_w, head_b;
};

Offsets layout(const NetShape& s) {
  Offsets o{};
  o.lstm_wx = 0;
  o.lstm_wh = o.lstm_wx + s.lstm_wx_size();
  o.lstm_b = o.lstm_wh + s.lstm_wh_size();
  o.fc_w = o.lstm_b + s.lstm_b_size();
  o.fc_b = o.fc_w + s.fc_w_size();
  o.head_w = o.fc_b + s.fc_b_size();
  o.head_b = o.head_w + s.head_w_size();
  return o;
}

}  // namespace

ParamViews PolicyNet::map_views(double* p, const NetShape& s) {
  const Offsets o = layout(s);
  return ParamViews{
      {p + o.lstm_wx, 4 * s.hidden, s.input}, {p + o.lstm_wh, 4 * s.hidden, s.hidden},
      {p + o.lstm_b, 4 * s.hidden},           {p + o.fc_w, s.fc, s.hidden},
      {p + o.fc_b, s.fc},                     {p + o.head_w, s.out, s.fc},
      {p + o.head_b, s.out}};
}

ConstParamViews PolicyNet::map_views(const double* p, const NetShape& s) {
  const Offsets o = layout(s);
  return ConstParamViews{
      {p + o.lstm_wx, 4 * s.hidden, s.input}, {p + o.lstm_wh, 4 * s.hidden, s.hidden},
      {p + o.lstm_b, 4 * s.hidden},           {p + o.fc_w, s.fc, s.hidden},
      {p + o.fc_b, s.fc},                     {p + o.head_w, s.out, s.fc},
      {p + o.head_b, s.out}};
}

ParamViews PolicyNet::views() { return map_views(theta_.data(), shape_); }
ConstParamViews PolicyNet::views() const { return map_views(theta_.data(), shape_); }

PolicyNet::PolicyNet(NetKind kind, NetShape shape, std::uint64_t seed)
    : kind_(kind), shape_(shape) {
  if (kind == NetKind::Critic && shape_.out != 1) {
    throw std::invalid_argument("PolicyNet: critic head must have one output");
  }
  theta_ = Eigen::VectorXd::Zero(shape_.total());
  rms_ = Eigen::VectorXd::Zero(shape_.total());
  init_params(seed);
}

void PolicyNet::init_params(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParamViews v = views();
  const int h = shape_.hidden;
  v.lstm_wx = orthogonal_matrix(4 * h, shape_.input, rng);
  // The hidden-to-hidden weights are orthogonal per gate block.
  for (int gate = 0; gate < 4; ++gate) {
    v.lstm_wh.middleRows(gate * h, h) = orthogonal_matrix(h, h, rng);
  }
  v.lstm_b.setZero();
  v.lstm_b.segment(h, h).setOnes();  // forget gate bias 1
  v.fc_w = orthogonal_matrix(shape_.fc, h, rng);
  v.fc_b.setZero();
  v.head_w = orthogonal_matrix(shape_.out, shape_.fc, rng);
  v.head_b.setZero();
}

LstmState PolicyNet::zero_state() const {
  return LstmState{Eigen::VectorXd::Zero(shape_.hidden), Eigen::VectorXd::Zero(shape_.hidden)};
}

Eigen::VectorXd PolicyNet::head_transform(const Eigen::VectorXd& logits) const {
  return kind_ == NetKind::Actor ? stable_softmax(logits) : logits;
}

Eigen::VectorXd PolicyNet::step_forward(const Eigen::Ref<const Eigen::VectorXd>& input,
                                        LstmState& state) const {
  if (input.size() != shape_.input) {
    throw std::invalid_argument("step_forward: input has " + std::to_string(input.size()) +
                                " entries, expected " + std::to_string(shape_.input));
  }
  ConstParamViews v = views();
  const int h = shape_.hidden;
  Eigen::VectorXd z = v.lstm_wx * input + v.lstm_wh * state.h + v.lstm_b;
  const auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  Eigen::VectorXd gi = z.segment(0, h).unaryExpr(sigmoid);
  Eigen::VectorXd gf = z.segment(h, h).unaryExpr(sigmoid);
  Eigen::VectorXd gg = z.segment(2 * h, h).array().tanh();
  Eigen::VectorXd go = z.segment(3 * h, h).unaryExpr(sigmoid);
  state.c = gf.cwiseProduct(state.c) + gi.cwiseProduct(gg);
  Eigen::VectorXd tc = state.c.array().tanh();
  state.h = go.cwiseProduct(tc);
  Eigen::VectorXd fc_pre = v.fc_w * state.h + v.fc_b;
  Eigen::VectorXd fc_post = fc_pre.cwiseMax(0.0);
  Eigen::VectorXd logits = v.head_w * fc_post + v.head_b;
  return head_transform(logits);
}

ForwardPass PolicyNet::forward(const std::vector<Eigen::VectorXd>& inputs) const {
  ConstParamViews v = views();
  const int h = shape_.hidden;
  const auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };

  ForwardPass pass;
  pass.steps.reserve(inputs.size());
  LstmState state = zero_state();
  for (const Eigen::VectorXd& x : inputs) {
    if (x.size() != shape_.input) {
      throw std::invalid_argument("forward: input has " + std::to_string(x.size()) +
                                  " entries, expected " + std::to_string(shape_.input));
    }
    StepActivations act;
    act.x = x;
    Eigen::VectorXd z = v.lstm_wx * x + v.lstm_wh * state.h + v.lstm_b;
    act.gate_i = z.segment(0, h).unaryExpr(sigmoid);
    act.gate_f = z.segment(h, h).unaryExpr(sigmoid);
    act.gate_g = z.segment(2 * h, h).array().tanh();
    act.gate_o = z.segment(3 * h, h).unaryExpr(sigmoid);
    act.c = act.gate_f.cwiseProduct(state.c) + act.gate_i.cwiseProduct(act.gate_g);
    act.tanh_c = act.c.array().tanh();
    act.h = act.gate_o.cwiseProduct(act.tanh_c);
    act.fc_pre = v.fc_w * act.h + v.fc_b;
    act.fc_post = act.fc_pre.cwiseMax(0.0);
    act.logits = v.head_w * act.fc_post + v.head_b;
    act.output = head_transform(act.logits);
    state.h = act.h;
    state.c = act.c;
    pass.steps.push_back(std::move(act));
  }
  pass.final_state = state;
  return pass;
}

Eigen::VectorXd PolicyNet::backward(const ForwardPass& pass,
                                    const std::vector<Eigen::VectorXd>& d_output) const {
  if (pass.steps.size() != d_output.size()) {
    throw std::invalid_argument("backward: activation/gradient length mismatch");
  }
  ConstParamViews v = views();
  const int h = shape_.hidden;

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(shape_.total());
  ParamViews g = map_views(grad.data(), shape_);

  Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(h);
  Eigen::VectorXd dc_next = Eigen::VectorXd::Zero(h);
  for (int t = static_cast<int>(pass.steps.size()) - 1; t >= 0; --t) {
    const StepActivations& act = pass.steps[static_cast<size_t>(t)];
    const Eigen::VectorXd& dlogits = d_output[static_cast<size_t>(t)];

    g.head_w += dlogits * act.fc_post.transpose();
    g.head_b += dlogits;
    Eigen::VectorXd dy = v.head_w.transpose() * dlogits;
    Eigen::VectorXd du =
        dy.cwiseProduct((act.fc_pre.array() > 0.0).cast<double>().matrix());
    g.fc_w += du * act.h.transpose();
    g.fc_b += du;

    Eigen::VectorXd dh = v.fc_w.transpose() * du + dh_next;
    Eigen::VectorXd do_ = dh.cwiseProduct(act.tanh_c);
    Eigen::VectorXd dc =
        dh.cwiseProduct(act.gate_o)
            .cwiseProduct((1.0 - act.tanh_c.array().square()).matrix()) +
        dc_next;

    const Eigen::VectorXd c_prev =
        t > 0 ? pass.steps[static_cast<size_t>(t - 1)].c : Eigen::VectorXd::Zero(h);
    const Eigen::VectorXd h_prev =
        t > 0 ? pass.steps[static_cast<size_t>(t - 1)].h : Eigen::VectorXd::Zero(h);

    Eigen::VectorXd di = dc.cwiseProduct(act.gate_g);
    Eigen::VectorXd df = dc.cwiseProduct(c_prev);
    Eigen::VectorXd dg = dc.cwiseProduct(act.gate_i);
    dc_next = dc.cwiseProduct(act.gate_f);

    Eigen::VectorXd dz(4 * h);
    dz.segment(0, h) =
        di.cwiseProduct(act.gate_i).cwiseProduct((1.0 - act.gate_i.array()).matrix());
    dz.segment(h, h) =
        df.cwiseProduct(act.gate_f).cwiseProduct((1.0 - act.gate_f.array()).matrix());
    dz.segment(2 * h, h) = dg.cwiseProduct((1.0 - act.gate_g.array().square()).matrix());
    dz.segment(3 * h, h) =
        do_.cwiseProduct(act.gate_o).cwiseProduct((1.0 - act.gate_o.array()).matrix());

    g.lstm_wx += dz * act.x.transpose();
    g.lstm_wh += dz * h_prev.transpose();
    g.lstm_b += dz;
    dh_next = v.lstm_wh.transpose() * dz;
  }
  return grad;
}

}  // namespace offload
