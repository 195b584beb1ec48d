#pragma once

#include "kofn/nn/checkpoint.hpp"
#include "kofn/nn/mlp.hpp"

#include <Eigen/Dense>

#include <array>
#include <string>

namespace kofn::marl {

using Eigen::MatrixXd;
using Eigen::MatrixXi;
using Eigen::VectorXd;

/// Sum of agent utilities. utilities: n_agents x batch.
inline Eigen::RowVectorXd linear_sum(const MatrixXd& utilities) { return utilities.colwise().sum(); }

/// Monotonic mixing network. Hypernetworks map the global input s to
///   W1 = |hw1(s)| (n x embed), b1 = hb1(s), w2 = |hw2(s)|, V(s) through one hidden layer;
///   Q_tot = elu(q^T W1 + b1) . w2 + V(s).
class MonotonicMixer {
 public:
  struct Tape {
    std::array<nn::MlpD::Tape, 4> nets;
    MatrixXd w1_raw, b1, w2_raw, v, z, h, q;
  };

  MonotonicMixer() = default;
  MonotonicMixer(int n_agents, int state_dim, int embed = 32);

  int n_agents() const { return n_agents_; }
  int state_dim() const { return state_dim_; }
  int embed() const { return embed_; }
  int n_params() const;

  void init_uniform(RandomEngine& rng);

  /// utilities: n_agents x batch, states: state_dim x batch.
  Eigen::RowVectorXd forward(const MatrixXd& utilities, const MatrixXd& states) const;
  Eigen::RowVectorXd forward(const MatrixXd& utilities, const MatrixXd& states, Tape& tape) const;
  /// Adds parameter gradients (one vector per hypernetwork) and returns dL/dutilities.
  MatrixXd backward(const Tape& tape, const Eigen::RowVectorXd& out_grad,
                    std::array<VectorXd, 4>& grads) const;

  std::array<nn::MlpD, 4>& nets() { return nets_; }
  const std::array<nn::MlpD, 4>& nets() const { return nets_; }

  void save(nn::Checkpoint& c, const std::string& prefix) const;
  void load(const nn::Checkpoint& c, const std::string& prefix);

 private:
  int n_agents_ = 0;
  int state_dim_ = 0;
  int embed_ = 0;
  // hw1, hb1, hw2, hv
  std::array<nn::MlpD, 4> nets_;
};

}  // namespace kofn::marl
