#pragma once

#include "kofn/nn/checkpoint.hpp"
#include "kofn/util/random.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace kofn::marl {

/// Ring buffer of transitions. Inputs are stored column-wise; local inputs of
/// transition i occupy columns i*n .. i*n+n-1.
class ReplayBuffer {
 public:
  ReplayBuffer() = default;
  ReplayBuffer(long capacity, int n_agents, int global_dim, int local_dim);

  struct Batch {
    Eigen::MatrixXd s, s_next;  // global_dim x B
    Eigen::MatrixXd o, o_next;  // local_dim x (n*B)
    Eigen::MatrixXi actions;    // n x B
    Eigen::VectorXd rewards;
    Eigen::MatrixXd behaviour;  // n x B, per-agent behaviour probabilities
    Eigen::VectorXd behaviour_joint;
    std::vector<bool> truncated;
  };

  void push(const Eigen::VectorXd& s, const Eigen::MatrixXd& o, std::span<const int> actions,
            double reward, const Eigen::VectorXd& s_next, const Eigen::MatrixXd& o_next,
            const Eigen::VectorXd& behaviour, double behaviour_joint, bool truncated);

  /// Uniform sampling with replacement.
  void sample(int batch, RandomEngine& rng, Batch& out) const;

  long size() const { return size_; }
  long capacity() const { return capacity_; }

  void save(nn::Checkpoint& c, const std::string& prefix) const;
  void load(const nn::Checkpoint& c, const std::string& prefix);

 private:
  long capacity_ = 0;
  int n_ = 0;
  long size_ = 0;
  long head_ = 0;
  Eigen::MatrixXd s_, s_next_, o_, o_next_, behaviour_;
  Eigen::MatrixXi actions_;
  Eigen::VectorXd rewards_, behaviour_joint_;
  std::vector<std::int64_t> truncated_;
};

}  // namespace kofn::marl
