#pragma once

#include "kofn/core/model.hpp"
#include "kofn/env/kofn_env.hpp"
#include "kofn/nn/checkpoint.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>

namespace kofn::marl {

/// Cooperative multi-agent task as seen by the learners. Rewards are returned raw
/// (return = -cost for maintenance tasks); scaling happens in the learner.
class MarlEnv {
 public:
  virtual ~MarlEnv() = default;

  virtual int n_agents() const = 0;
  virtual int n_actions() const = 0;
  /// Width of the centralized input.
  virtual int global_dim() const = 0;
  /// Width of one agent's input, agent one-hot included.
  virtual int local_dim() const = 0;
  virtual int truncation() const = 0;
  /// Discount used by the learners.
  virtual double gamma() const = 0;

  virtual void reset(std::uint64_t episode_seed) = 0;
  /// Executes local actions a_m in {0, .., n_actions-1}; returns the shared reward.
  virtual double step(std::span<const int> actions) = 0;
  virtual int t() const = 0;
  bool truncated() const { return t() >= truncation(); }

  virtual void global_input(Eigen::Ref<Eigen::VectorXd> out) const = 0;
  virtual void local_input(int agent, Eigen::Ref<Eigen::VectorXd> out) const = 0;

  virtual std::unique_ptr<MarlEnv> clone() const = 0;
  virtual void save(nn::Checkpoint& c, const std::string& prefix) const = 0;
  virtual void load(const nn::Checkpoint& c, const std::string& prefix) = 0;
};

/// k-out-of-n maintenance: inputs are beliefs (concatenated, or own belief + one-hot id).
class KofnMarlEnv final : public MarlEnv {
 public:
  explicit KofnMarlEnv(SystemModel model, int truncation = kTrainTruncation);

  int n_agents() const override { return model_.n(); }
  int n_actions() const override { return kComponentActions; }
  int global_dim() const override { return 3 * model_.n(); }
  int local_dim() const override { return 3 + model_.n(); }
  int truncation() const override { return truncation_; }
  double gamma() const override { return model_.gamma; }

  void reset(std::uint64_t episode_seed) override;
  double step(std::span<const int> actions) override;
  int t() const override { return state_ ? state_->t : 0; }

  void global_input(Eigen::Ref<Eigen::VectorXd> out) const override;
  void local_input(int agent, Eigen::Ref<Eigen::VectorXd> out) const override;

  std::unique_ptr<MarlEnv> clone() const override { return std::make_unique<KofnMarlEnv>(*this); }
  void save(nn::Checkpoint& c, const std::string& prefix) const override;
  void load(const nn::Checkpoint& c, const std::string& prefix) override;

  const SystemModel& model() const { return model_; }

 private:
  SystemModel model_;
  int truncation_;
  std::optional<EnvState> state_;
};

/// Repeated Climb Game: constant zero input, plus the agent one-hot for local inputs.
/// Learners use gamma = 0 because every step is the same stateless game.
class ClimbMarlEnv final : public MarlEnv {
 public:
  int n_agents() const override { return 2; }
  int n_actions() const override { return 3; }
  int global_dim() const override { return 1; }
  int local_dim() const override { return 3; }
  int truncation() const override;
  double gamma() const override { return 0.0; }

  void reset(std::uint64_t) override { t_ = 0; }
  double step(std::span<const int> actions) override;
  int t() const override { return t_; }

  void global_input(Eigen::Ref<Eigen::VectorXd> out) const override { out.setZero(); }
  void local_input(int agent, Eigen::Ref<Eigen::VectorXd> out) const override;

  std::unique_ptr<MarlEnv> clone() const override { return std::make_unique<ClimbMarlEnv>(*this); }
  void save(nn::Checkpoint& c, const std::string& prefix) const override;
  void load(const nn::Checkpoint& c, const std::string& prefix) override;

 private:
  int t_ = 0;
};

/// Global and local inputs of a per-component belief matrix, as used by KofnMarlEnv.
void belief_global_input(const Belief& b, Eigen::Ref<Eigen::VectorXd> out);
void belief_local_input(const Belief& b, int agent, Eigen::Ref<Eigen::VectorXd> out);

}  // namespace kofn::marl
