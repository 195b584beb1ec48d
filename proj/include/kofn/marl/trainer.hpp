#pragma once

#include "kofn/env/policy.hpp"
#include "kofn/marl/envs.hpp"
#include "kofn/marl/mixer.hpp"
#include "kofn/marl/replay.hpp"
#include "kofn/marl/spec.hpp"
#include "kofn/nn/checkpoint.hpp"
#include "kofn/nn/mlp.hpp"
#include "kofn/nn/optim.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace kofn::marl {

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything needed to act: the networks of one agent specification.
class AgentNetworks {
 public:
  AgentNetworks() = default;
  AgentNetworks(const AgentSpec& spec, int n_agents, int n_actions, int global_dim, int local_dim);

  Algorithm algorithm() const { return algorithm_; }
  int n_agents() const { return n_agents_; }
  int n_actions() const { return n_actions_; }
  int global_dim() const { return global_dim_; }
  int local_dim() const { return local_dim_; }
  bool has_actor() const { return actor.n_params() > 0; }
  bool has_mixer() const { return mixer.n_agents() > 0; }

  void init(RandomEngine& rng);

  /// Action probabilities (actor-critic): n_actions x (n_agents * B), agent-major per sample.
  /// For JAC the result is the joint distribution, n_actions^n_agents x B.
  MatrixXd probabilities(const MatrixXd& global, const MatrixXd& local) const;

  /// Evaluation actions: greedy for value-based methods, sampled from the policy otherwise
  /// (one draw per agent from rngs[i], or one joint draw for JAC). actions: n_agents x B.
  void act(const MatrixXd& global, const MatrixXd& local, std::span<RandomEngine> rngs,
           MatrixXi& actions) const;

  /// Agent utilities of value-decomposition methods: n_actions x (n_agents * B).
  MatrixXd utilities(const MatrixXd& local) const { return critic.forward(local); }

  void save(nn::Checkpoint& c, const std::string& prefix) const;
  void load(const nn::Checkpoint& c, const std::string& prefix);

  nn::MlpD actor;
  nn::MlpD critic;
  MonotonicMixer mixer;

 private:
  Algorithm algorithm_ = Algorithm::DDQN;
  int n_agents_ = 0;
  int n_actions_ = 0;
  int global_dim_ = 0;
  int local_dim_ = 0;
};

/// Inputs of a k-out-of-n belief batch in the layout the networks expect.
void belief_inputs(std::span<const Belief> beliefs, MatrixXd& global, MatrixXd& local);

/// Executes trained networks on the maintenance environment.
class AgentPolicy final : public Policy {
 public:
  explicit AgentPolicy(std::shared_ptr<const AgentNetworks> nets) : nets_(std::move(nets)) {}
  std::string name() const override { return to_string(nets_->algorithm()); }
  void act(std::span<const Belief> beliefs, int t, std::span<RandomEngine> rngs,
           std::span<JointAction> out) override;

 private:
  std::shared_ptr<const AgentNetworks> nets_;
  MatrixXd global_, local_;
  MatrixXi actions_;
};

/// Expected undiscounted return of the policy over the Climb Game horizon, exact.
double climb_expected_return(const AgentNetworks& nets);

/// One training run. Progress is counted in episodes (off-policy) or environment
/// steps (on-policy); evaluation hooks fire at 0 and at every eval_interval.
class Trainer {
 public:
  Trainer(AgentSpec spec, const MarlEnv& env, std::uint64_t seed);

  using Hook = std::function<void(const Trainer&)>;

  /// Trains until progress() >= target (capped by the budget).
  void run(long target, const Hook& on_eval = {});
  void run_budget(const Hook& on_eval = {}) { run(spec_.budget, on_eval); }

  long progress() const;
  long episodes() const { return episodes_; }
  long env_steps() const { return env_steps_; }
  long updates() const { return updates_; }
  double last_loss() const { return last_loss_; }
  const AgentSpec& spec() const { return spec_; }
  std::uint64_t seed() const { return seed_; }
  const AgentNetworks& networks() const { return nets_; }

  /// Networks only, plus identifying metadata.
  nn::Checkpoint policy_checkpoint() const;
  /// Complete state; restore() continues bit-identically.
  nn::Checkpoint state() const;
  void restore(const nn::Checkpoint& c);

 private:
  void train_episode();
  void train_rollout();
  void update_value(const ReplayBuffer::Batch& b);
  void update_actor_critic(const ReplayBuffer::Batch& b);
  void select_training_actions(const Eigen::VectorXd& s, const MatrixXd& o, std::vector<int>& a,
                               Eigen::VectorXd& behaviour, double& behaviour_joint);
  void maybe_eval(const Hook& on_eval);
  void check_finite(double loss);

  AgentSpec spec_;
  std::uint64_t seed_;
  AgentNetworks nets_;
  AgentNetworks target_;
  std::vector<std::unique_ptr<MarlEnv>> envs_;
  ReplayBuffer buffer_;
  nn::AdamState<double> actor_opt_, critic_opt_;
  std::array<nn::AdamState<double>, 4> mixer_opt_;
  RandomEngine explore_rng_, replay_rng_;
  long episodes_ = 0;
  long env_steps_ = 0;
  long updates_ = 0;
  long next_eval_ = 0;
  double last_loss_ = 0.0;
};

/// Policy snapshot restored from Trainer::policy_checkpoint().
AgentNetworks networks_from_checkpoint(const nn::Checkpoint& c);

}  // namespace kofn::marl
