#include "kofn/marl/mixer.hpp"

#include <cmath>
#include <stdexcept>

namespace kofn::marl {

MonotonicMixer::MonotonicMixer(int n_agents, int state_dim, int embed)
    : n_agents_(n_agents), state_dim_(state_dim), embed_(embed),
      nets_{nn::MlpD({state_dim, n_agents * embed}), nn::MlpD({state_dim, embed}),
            nn::MlpD({state_dim, embed}), nn::MlpD({state_dim, embed, 1})} {}

int MonotonicMixer::n_params() const {
  int n = 0;
  for (const auto& net : nets_) n += net.n_params();
  return n;
}

void MonotonicMixer::init_uniform(RandomEngine& rng) {
  for (auto& net : nets_) net.init_uniform(rng);
}

Eigen::RowVectorXd MonotonicMixer::forward(const MatrixXd& utilities, const MatrixXd& states) const {
  Tape tape;
  return forward(utilities, states, tape);
}

Eigen::RowVectorXd MonotonicMixer::forward(const MatrixXd& utilities, const MatrixXd& states,
                                           Tape& tape) const {
  if (utilities.rows() != n_agents_ || states.rows() != state_dim_ || utilities.cols() != states.cols())
    throw std::invalid_argument("MonotonicMixer::forward: shape mismatch");
  tape.q = utilities;
  tape.w1_raw = nets_[0].forward(states, tape.nets[0]);
  tape.b1 = nets_[1].forward(states, tape.nets[1]);
  tape.w2_raw = nets_[2].forward(states, tape.nets[2]);
  tape.v = nets_[3].forward(states, tape.nets[3]);
  tape.z = tape.b1;
  for (int m = 0; m < n_agents_; ++m)
    tape.z.array() += tape.w1_raw.middleRows(m * embed_, embed_).array().abs() *
                      utilities.row(m).replicate(embed_, 1).array();
  tape.h = tape.z.unaryExpr([](double x) { return x > 0.0 ? x : std::expm1(x); });
  Eigen::RowVectorXd out = (tape.h.cwiseProduct(tape.w2_raw.cwiseAbs())).colwise().sum();
  out += tape.v.row(0);
  return out;
}

MatrixXd MonotonicMixer::backward(const Tape& tape, const Eigen::RowVectorXd& out_grad,
                                  std::array<VectorXd, 4>& grads) const {
  const Eigen::Index batch = tape.q.cols();
  auto sign = [](double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); };
  MatrixXd g_w2 = tape.h.cwiseProduct(tape.w2_raw.unaryExpr(sign));
  g_w2.array().rowwise() *= out_grad.array();
  MatrixXd g_h = tape.w2_raw.cwiseAbs();
  g_h.array().rowwise() *= out_grad.array();
  MatrixXd g_z = g_h.cwiseProduct(tape.z.unaryExpr([](double x) { return x > 0.0 ? 1.0 : std::exp(x); }));
  MatrixXd g_w1(tape.w1_raw.rows(), batch);
  MatrixXd g_q(n_agents_, batch);
  for (int m = 0; m < n_agents_; ++m) {
    const auto w1 = tape.w1_raw.middleRows(m * embed_, embed_).array();
    g_w1.middleRows(m * embed_, embed_).array() =
        g_z.array() * tape.q.row(m).replicate(embed_, 1).array() * w1.unaryExpr(sign);
    g_q.row(m) = (w1.abs() * g_z.array()).colwise().sum();
  }
  nets_[0].backward(tape.nets[0], g_w1, grads[0]);
  nets_[1].backward(tape.nets[1], g_z, grads[1]);
  nets_[2].backward(tape.nets[2], g_w2, grads[2]);
  nets_[3].backward(tape.nets[3], out_grad, grads[3]);
  return g_q;
}

void MonotonicMixer::save(nn::Checkpoint& c, const std::string& prefix) const {
  for (std::size_t i = 0; i < nets_.size(); ++i)
    c.put_vector(prefix + "hyper" + std::to_string(i), nets_[i].params());
}

void MonotonicMixer::load(const nn::Checkpoint& c, const std::string& prefix) {
  for (std::size_t i = 0; i < nets_.size(); ++i)
    nets_[i].params() = c.vector(prefix + "hyper" + std::to_string(i), nets_[i].n_params());
}

}  // namespace kofn::marl
