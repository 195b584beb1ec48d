#pragma once

#include "kofn/nn/mlp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <span>
#include <vector>

namespace kofn::marl {

using Eigen::MatrixXd;
using Eigen::MatrixXi;
using Eigen::VectorXd;

/// Index of the first maximum.
inline int argmax_first(const Eigen::Ref<const VectorXd>& v) {
  Eigen::Index i = 0;
  v.maxCoeff(&i);
  return static_cast<int>(i);
}

/// Per-agent argmax (lowest index among ties); the joint action is the tuple.
std::vector<int> greedy_decentralized(const std::vector<VectorXd>& utilities);

/// Joint index with agent 0 as the least significant digit.
int encode_joint(std::span<const int> actions, int n_actions);
void decode_joint(int joint, int n_actions, std::span<int> actions);

/// y_i = r_i + gamma * Q_target(s'_i, argmax_a Q_online(s'_i, a)). Columns are samples.
VectorXd q_targets_double(const MatrixXd& q_online_next, const MatrixXd& q_target_next,
                          const VectorXd& rewards, double gamma);

/// d/dlogits of -sum_i w_i log pi(a_i | x_i). The output rows are split into `heads`
/// equal softmax groups; actions(h, i) is the choice of head h in column i.
MatrixXd policy_logit_grad(const MatrixXd& logits, const MatrixXi& actions, const VectorXd& weights,
                           int heads);

/// Parameter gradient of -sum_i w_i log pi(a_i | x_i) for a softmax actor.
VectorXd policy_gradient(const nn::MlpD& actor, const MatrixXd& inputs, const MatrixXi& actions,
                         const VectorXd& weights, int heads);

/// Clipped surrogate term min(r A, clip(r, 1-eps, 1+eps) A).
inline double ppo_clip_term(double ratio, double advantage, double eps) {
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage);
}

struct GaeResult {
  VectorXd advantages;
  VectorXd returns;
};

/// Generalized advantage estimation over one trajectory segment. next_values[t] is the
/// value of the state reached after step t; ends[t] stops the recursion after step t
/// (the bootstrap through next_values[t] is kept, since episodes end by truncation).
GaeResult gae(const VectorXd& rewards, const VectorXd& values, const VectorXd& next_values,
              const std::vector<bool>& ends, double gamma, double lambda);

}  // namespace kofn::marl
