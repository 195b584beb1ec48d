#include "kofn/marl/learn.hpp"

#include "kofn/nn/softmax.hpp"

#include <stdexcept>

namespace kofn::marl {

std::vector<int> greedy_decentralized(const std::vector<VectorXd>& utilities) {
  std::vector<int> a;
  a.reserve(utilities.size());
  for (const auto& u : utilities) a.push_back(argmax_first(u));
  return a;
}

int encode_joint(std::span<const int> actions, int n_actions) {
  int j = 0;
  for (std::size_t m = actions.size(); m-- > 0;) j = j * n_actions + actions[m];
  return j;
}

void decode_joint(int joint, int n_actions, std::span<int> actions) {
  for (auto& a : actions) {
    a = joint % n_actions;
    joint /= n_actions;
  }
}

VectorXd q_targets_double(const MatrixXd& q_online_next, const MatrixXd& q_target_next,
                          const VectorXd& rewards, double gamma) {
  if (q_online_next.rows() != q_target_next.rows() || q_online_next.cols() != q_target_next.cols() ||
      q_online_next.cols() != rewards.size())
    throw std::invalid_argument("q_targets_double: shape mismatch");
  VectorXd y(rewards.size());
  for (Eigen::Index i = 0; i < rewards.size(); ++i)
    y(i) = rewards(i) + gamma * q_target_next(argmax_first(q_online_next.col(i)), i);
  return y;
}

MatrixXd policy_logit_grad(const MatrixXd& logits, const MatrixXi& actions, const VectorXd& weights,
                           int heads) {
  const Eigen::Index width = logits.rows() / heads;
  if (width * heads != logits.rows() || actions.rows() != heads || actions.cols() != logits.cols() ||
      weights.size() != logits.cols())
    throw std::invalid_argument("policy_logit_grad: shape mismatch");
  MatrixXd g(logits.rows(), logits.cols());
  for (int h = 0; h < heads; ++h) {
    MatrixXd p = nn::softmax(logits.middleRows(h * width, width));
    for (Eigen::Index i = 0; i < logits.cols(); ++i) p(actions(h, i), i) -= 1.0;
    g.middleRows(h * width, width) = p * weights.asDiagonal();
  }
  return g;
}

VectorXd policy_gradient(const nn::MlpD& actor, const MatrixXd& inputs, const MatrixXi& actions,
                         const VectorXd& weights, int heads) {
  nn::MlpD::Tape tape;
  const MatrixXd logits = actor.forward(inputs, tape);
  VectorXd grad = VectorXd::Zero(actor.n_params());
  actor.backward(tape, policy_logit_grad(logits, actions, weights, heads), grad);
  return grad;
}

GaeResult gae(const VectorXd& rewards, const VectorXd& values, const VectorXd& next_values,
              const std::vector<bool>& ends, double gamma, double lambda) {
  const Eigen::Index n = rewards.size();
  if (values.size() != n || next_values.size() != n || static_cast<Eigen::Index>(ends.size()) != n)
    throw std::invalid_argument("gae: length mismatch");
  GaeResult r{VectorXd(n), VectorXd(n)};
  double running = 0.0;
  for (Eigen::Index t = n; t-- > 0;) {
    const double delta = rewards(t) + gamma * next_values(t) - values(t);
    const bool last = t + 1 == n || ends[static_cast<std::size_t>(t)];
    running = delta + (last ? 0.0 : gamma * lambda * running);
    r.advantages(t) = running;
  }
  r.returns = r.advantages + values;
  return r;
}

}  // namespace kofn::marl
