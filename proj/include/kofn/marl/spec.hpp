#pragma once

#include "kofn/nn/optim.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace kofn::marl {

enum class Algorithm { DDQN, JAC, DCMAC, IACC_PS, MAPPO_PS, VDN_PS, QMIX_PS, IAC_PS, IPPO_PS };

inline constexpr Algorithm kAllAlgorithms[] = {
    Algorithm::DDQN,     Algorithm::JAC,    Algorithm::DCMAC,   Algorithm::IACC_PS, Algorithm::MAPPO_PS,
    Algorithm::VDN_PS,   Algorithm::QMIX_PS, Algorithm::IAC_PS, Algorithm::IPPO_PS};

std::string to_string(Algorithm a);
/// Accepts "ddqn", "vdn-ps", "VDN_PS", ...
Algorithm parse_algorithm(std::string_view s);

inline bool is_value_based(Algorithm a) {
  return a == Algorithm::DDQN || a == Algorithm::VDN_PS || a == Algorithm::QMIX_PS;
}
inline bool is_on_policy(Algorithm a) { return a == Algorithm::MAPPO_PS || a == Algorithm::IPPO_PS; }
/// Actor (or Q network) that outputs joint actions or joint heads from the global input.
inline bool has_central_actor(Algorithm a) {
  return a == Algorithm::DDQN || a == Algorithm::JAC || a == Algorithm::DCMAC;
}
/// Critic that consumes the global input.
inline bool has_central_critic(Algorithm a) {
  return a == Algorithm::JAC || a == Algorithm::DCMAC || a == Algorithm::IACC_PS ||
         a == Algorithm::MAPPO_PS;
}

struct PpoOptions {
  double clip = 0.2;
  double gae_lambda = 0.95;
  int epochs = 4;
  int minibatches = 4;
  int n_envs = 4;
  int rollout_steps = 128;
  double vf_coef = 0.5;
  double ent_coef = 0.01;
  double max_grad_norm = 0.5;
  bool clip_value = true;
};

struct AgentSpec {
  Algorithm algorithm = Algorithm::DDQN;
  std::vector<int> actor_hidden;
  /// Q network for value-based methods, value network otherwise.
  std::vector<int> critic_hidden;
  int mixer_embed = 32;

  nn::LinearSchedule actor_lr;
  nn::LinearSchedule critic_lr;
  nn::LinearSchedule epsilon;

  int batch_size = 64;
  long buffer_capacity = 20000;
  int target_reset_episodes = 100;
  PpoOptions ppo;

  /// Rewards seen by the learner are -cost * reward_scale.
  double reward_scale = 1.0;

  /// Training budget: episodes for off-policy methods, environment steps for PPO.
  long budget = 50000;
  long eval_interval = 5000;

  /// Multiplies the exploration decay span; learning-rate schedules are untouched.
  void scale_exploration(double factor);
};

/// Tabulated hyperparameters for the k-out-of-n environments.
AgentSpec default_spec(Algorithm a);
/// Same networks and rates; budgets of the repeated Climb Game.
AgentSpec climb_spec(Algorithm a);

struct NetworkLayout {
  std::vector<int> actor;   // empty when absent
  std::vector<int> critic;  // Q network or value network
  int mixer_params = 0;
  int total_params() const;
};

/// Layer sizes for an environment with the given input widths.
NetworkLayout network_layout(const AgentSpec& spec, int n_agents, int n_actions, int global_dim,
                             int local_dim);

}  // namespace kofn::marl
