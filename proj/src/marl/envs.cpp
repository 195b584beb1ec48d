#include "kofn/marl/envs.hpp"

#include "kofn/env/climb_game.hpp"

#include <stdexcept>

namespace kofn::marl {

void belief_global_input(const Belief& b, Eigen::Ref<Eigen::VectorXd> out) {
  for (Eigen::Index m = 0; m < b.cols(); ++m) out.segment<3>(3 * m) = b.col(m);
}

void belief_local_input(const Belief& b, int agent, Eigen::Ref<Eigen::VectorXd> out) {
  out.setZero();
  out.head<3>() = b.col(agent);
  out(3 + agent) = 1.0;
}

KofnMarlEnv::KofnMarlEnv(SystemModel model, int truncation)
    : model_(std::move(model)), truncation_(truncation) {
  model_.validate();
}

void KofnMarlEnv::reset(std::uint64_t episode_seed) {
  state_.emplace(env_reset(model_, episode_seed, truncation_));
}

double KofnMarlEnv::step(std::span<const int> actions) {
  if (!state_) throw std::logic_error("KofnMarlEnv::step before reset");
  if (static_cast<int>(actions.size()) != n_agents())
    throw std::invalid_argument("KofnMarlEnv::step: one action per agent expected");
  JointAction joint;
  for (int a : actions) {
    if (a < 0 || a >= kComponentActions) throw std::out_of_range("KofnMarlEnv::step: bad action");
    joint.push_back(static_cast<ComponentAction>(a));
  }
  return -env_step(*state_, joint, model_).cost;
}

void KofnMarlEnv::global_input(Eigen::Ref<Eigen::VectorXd> out) const {
  belief_global_input(state_->beliefs, out);
}

void KofnMarlEnv::local_input(int agent, Eigen::Ref<Eigen::VectorXd> out) const {
  belief_local_input(state_->beliefs, agent, out);
}

void KofnMarlEnv::save(nn::Checkpoint& c, const std::string& prefix) const {
  if (!state_) {
    c.put_integer(prefix + "active", 0);
    return;
  }
  c.put_integer(prefix + "active", 1);
  c.put_integer(prefix + "t", state_->t);
  std::vector<std::int64_t> s(state_->true_states.begin(), state_->true_states.end());
  c.put_integers(prefix + "states", s);
  c.put_reals(prefix + "beliefs",
              std::span<const double>(state_->beliefs.data(), static_cast<std::size_t>(state_->beliefs.size())));
  c.put_rng(prefix + "rng.init", state_->rng.init);
  c.put_rng(prefix + "rng.transition", state_->rng.transition);
  c.put_rng(prefix + "rng.observation", state_->rng.observation);
}

void KofnMarlEnv::load(const nn::Checkpoint& c, const std::string& prefix) {
  if (c.integer(prefix + "active") == 0) {
    state_.reset();
    return;
  }
  EnvState s(0);
  s.truncation_limit = truncation_;
  s.t = static_cast<int>(c.integer(prefix + "t"));
  for (auto v : c.integers(prefix + "states")) s.true_states.push_back(static_cast<int>(v));
  const auto b = c.reals(prefix + "beliefs");
  if (static_cast<int>(b.size()) != 3 * n_agents() || static_cast<int>(s.true_states.size()) != n_agents())
    throw nn::CheckpointError("checkpoint: environment size mismatch");
  s.beliefs.resize(3, n_agents());
  for (std::size_t i = 0; i < b.size(); ++i) s.beliefs.data()[i] = b[i];
  s.rng.init = c.rng(prefix + "rng.init");
  s.rng.transition = c.rng(prefix + "rng.transition");
  s.rng.observation = c.rng(prefix + "rng.observation");
  state_.emplace(std::move(s));
}

int ClimbMarlEnv::truncation() const { return ClimbGame::kHorizon; }

double ClimbMarlEnv::step(std::span<const int> actions) {
  if (actions.size() != 2) throw std::invalid_argument("ClimbMarlEnv::step: two actions expected");
  ++t_;
  return climb_step(actions[0], actions[1]);
}

void ClimbMarlEnv::local_input(int agent, Eigen::Ref<Eigen::VectorXd> out) const {
  out.setZero();
  out(1 + agent) = 1.0;
}

void ClimbMarlEnv::save(nn::Checkpoint& c, const std::string& prefix) const {
  c.put_integer(prefix + "t", t_);
}

void ClimbMarlEnv::load(const nn::Checkpoint& c, const std::string& prefix) {
  t_ = static_cast<int>(c.integer(prefix + "t"));
}

}  // namespace kofn::marl
