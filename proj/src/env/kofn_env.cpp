#include "kofn/env/kofn_env.hpp"

#include "kofn/core/belief.hpp"
#include "kofn/core/cost.hpp"

namespace kofn {

EnvState env_reset(const SystemModel& model, std::uint64_t episode_seed, int truncation_limit) {
  EnvState state(episode_seed);
  const int n = model.n();
  state.true_states.resize(static_cast<std::size_t>(n));
  for (int m = 0; m < n; ++m)
    state.true_states[m] = sample_categorical(model.b0, uniform01(state.rng.init));
  state.beliefs = initial_belief(model);
  state.t = 0;
  state.truncation_limit = truncation_limit;
  return state;
}

StepResult env_step(EnvState& state, std::span<const ComponentAction> joint_action,
                    const SystemModel& model) {
  if (state.t >= state.truncation_limit)
    throw StepAfterTruncation("env_step called at t = " + std::to_string(state.t) +
                              " past the truncation limit");
  const int n = model.n();
  StepResult result;
  result.cost = step_cost(std::span<const int>(state.true_states.data(), state.true_states.size()),
                          joint_action, model);
  result.observations.resize(static_cast<std::size_t>(n));
  result.next_beliefs.resize(3, n);
  for (int m = 0; m < n; ++m) {
    const ComponentModel& comp = model.components[m];
    const ComponentAction a = joint_action[m];
    const int next = sample_categorical(comp.transition(a).row(state.true_states[m]),
                                        uniform01(state.rng.transition));
    // One observation draw per component per step keeps the streams aligned across policies.
    const int obs = sample_categorical(comp.observation(a).row(next), uniform01(state.rng.observation));
    state.true_states[m] = next;
    result.observations[m] = obs;
    result.next_beliefs.col(m) = belief_update(state.beliefs.col(m), a, obs, comp);
  }
  state.beliefs = result.next_beliefs;
  ++state.t;
  result.truncated = state.t >= state.truncation_limit;
  return result;
}

}  // namespace kofn
