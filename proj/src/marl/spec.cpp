#include "kofn/marl/spec.hpp"

#include "kofn/nn/mlp.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace kofn::marl {

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::DDQN: return "ddqn";
    case Algorithm::JAC: return "jac";
    case Algorithm::DCMAC: return "dcmac";
    case Algorithm::IACC_PS: return "iacc-ps";
    case Algorithm::MAPPO_PS: return "mappo-ps";
    case Algorithm::VDN_PS: return "vdn-ps";
    case Algorithm::QMIX_PS: return "qmix-ps";
    case Algorithm::IAC_PS: return "iac-ps";
    case Algorithm::IPPO_PS: return "ippo-ps";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view s) {
  std::string norm;
  for (char c : s) norm += c == '_' ? '-' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (Algorithm a : kAllAlgorithms)
    if (to_string(a) == norm) return a;
  throw std::invalid_argument("unknown algorithm '" + std::string(s) + "'");
}

void AgentSpec::scale_exploration(double factor) {
  if (epsilon.span > 0) epsilon.span = std::max(1L, std::lround(static_cast<double>(epsilon.span) * factor));
}

AgentSpec default_spec(Algorithm a) {
  using nn::LinearSchedule;
  AgentSpec s;
  s.algorithm = a;
  s.reward_scale = 0.01;
  switch (a) {
    case Algorithm::DDQN:
      s.critic_hidden = {64, 64};
      s.critic_lr = {1e-3, 1e-4, 10000};
      s.epsilon = {1.0, 0.01, 10000};
      s.buffer_capacity = 20000;
      break;
    case Algorithm::JAC:
      s.actor_hidden = {64, 64};
      s.critic_hidden = {64, 64};
      s.actor_lr = {1e-4, 1e-5, 10000};
      s.critic_lr = {5e-3, 5e-4, 10000};
      s.epsilon = {1.0, 0.01, 10000};
      s.buffer_capacity = 20000;
      break;
    case Algorithm::DCMAC:
      s.actor_hidden = {32, 32};
      s.critic_hidden = {64, 64};
      s.actor_lr = {1e-4, 1e-5, 10000};
      s.critic_lr = {5e-3, 5e-4, 10000};
      s.epsilon = {1.0, 0.001, 20000};
      s.buffer_capacity = 10000;
      break;
    case Algorithm::IACC_PS:
      s.actor_hidden = {32, 32};
      s.critic_hidden = {64, 64};
      s.actor_lr = {5e-4, 1e-5, 20000};
      s.critic_lr = {1e-3, 1e-4, 20000};
      s.epsilon = {1.0, 0.01, 10000};
      s.buffer_capacity = 10000;
      break;
    case Algorithm::VDN_PS:
    case Algorithm::QMIX_PS:
      s.critic_hidden = {64, 64};
      s.critic_lr = {1e-3, 1e-4, 10000};
      s.epsilon = {1.0, 0.005, 10000};
      s.buffer_capacity = 20000;
      break;
    case Algorithm::IAC_PS:
      s.actor_hidden = {32, 32};
      s.critic_hidden = {64, 64};
      s.actor_lr = {5e-4, 1e-5, 10000};
      s.critic_lr = {1e-3, 1e-4, 10000};
      s.epsilon = {1.0, 0.01, 20000};
      s.buffer_capacity = 10000;
      break;
    case Algorithm::MAPPO_PS:
    case Algorithm::IPPO_PS:
      s.actor_hidden = {64, 64};
      s.critic_hidden = {64, 64};
      s.actor_lr = LinearSchedule::constant(2.5e-4);
      s.critic_lr = LinearSchedule::constant(2.5e-4);
      s.epsilon = LinearSchedule::constant(0.0);
      s.batch_size = s.ppo.n_envs * s.ppo.rollout_steps;
      s.buffer_capacity = 0;
      s.target_reset_episodes = 0;
      s.budget = 20'000'000;
      s.eval_interval = 1'000'000;
      break;
  }
  if (!is_value_based(a)) s.target_reset_episodes = 0;
  return s;
}

AgentSpec climb_spec(Algorithm a) {
  AgentSpec s = default_spec(a);
  s.reward_scale = 1.0;
  if (is_on_policy(a)) {
    s.budget = 10'000'000;
    s.eval_interval = 1'000'000;
  } else {
    s.budget = 100000;
    s.eval_interval = 5000;
  }
  return s;
}

int NetworkLayout::total_params() const {
  int n = mixer_params;
  if (!actor.empty()) n += nn::parameter_count(actor);
  if (!critic.empty()) n += nn::parameter_count(critic);
  return n;
}

NetworkLayout network_layout(const AgentSpec& spec, int n_agents, int n_actions, int global_dim,
                             int local_dim) {
  const Algorithm a = spec.algorithm;
  int joint = 1;
  for (int m = 0; m < n_agents; ++m) joint *= n_actions;
  auto build = [](int in, const std::vector<int>& hidden, int out) {
    std::vector<int> sizes{in};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(out);
    return sizes;
  };
  NetworkLayout l;
  switch (a) {
    case Algorithm::DDQN: l.critic = build(global_dim, spec.critic_hidden, joint); break;
    case Algorithm::VDN_PS: l.critic = build(local_dim, spec.critic_hidden, n_actions); break;
    case Algorithm::QMIX_PS: {
      l.critic = build(local_dim, spec.critic_hidden, n_actions);
      const int e = spec.mixer_embed, g = global_dim;
      l.mixer_params = (g * n_agents * e + n_agents * e) + 3 * (g * e + e) + (e + 1);
      break;
    }
    case Algorithm::JAC:
      l.actor = build(global_dim, spec.actor_hidden, joint);
      l.critic = build(global_dim, spec.critic_hidden, 1);
      break;
    case Algorithm::DCMAC:
      l.actor = build(global_dim, spec.actor_hidden, n_agents * n_actions);
      l.critic = build(global_dim, spec.critic_hidden, 1);
      break;
    case Algorithm::IACC_PS:
    case Algorithm::MAPPO_PS:
      l.actor = build(local_dim, spec.actor_hidden, n_actions);
      l.critic = build(global_dim, spec.critic_hidden, 1);
      break;
    case Algorithm::IAC_PS:
    case Algorithm::IPPO_PS:
      l.actor = build(local_dim, spec.actor_hidden, n_actions);
      l.critic = build(local_dim, spec.critic_hidden, 1);
      break;
  }
  return l;
}

}  // namespace kofn::marl
