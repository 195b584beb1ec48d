#pragma once

#include "kofn/core/model.hpp"
#include "kofn/util/random.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>

namespace kofn {

inline constexpr int kTrainTruncation = 50;
inline constexpr int kEvalHorizon = 20;

class StepAfterTruncation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Random substreams of one episode: state initialization, transitions, observations.
struct EpisodeStreams {
  RandomEngine init;
  RandomEngine transition;
  RandomEngine observation;

  explicit EpisodeStreams(std::uint64_t episode_seed)
      : init(make_stream(episode_seed, StreamPurpose::StateInit)),
        transition(make_stream(episode_seed, StreamPurpose::Transition)),
        observation(make_stream(episode_seed, StreamPurpose::Observation)) {}
};

struct EnvState {
  ComponentStates true_states;
  Belief beliefs;
  int t = 0;
  int truncation_limit = kTrainTruncation;
  EpisodeStreams rng;

  explicit EnvState(std::uint64_t episode_seed) : rng(episode_seed) {}
};

struct StepResult {
  double cost = 0.0;
  Belief next_beliefs;
  Observations observations;
  bool truncated = false;
};

/// Samples hidden states from b0 and sets every belief to b0.
EnvState env_reset(const SystemModel& model, std::uint64_t episode_seed,
                   int truncation_limit = kTrainTruncation);

/// Applies a joint action: charges the cost on the current state, advances hidden
/// states, draws observations and updates the tracked beliefs.
StepResult env_step(EnvState& state, std::span<const ComponentAction> joint_action,
                    const SystemModel& model);

inline StepResult env_step(EnvState& state, const JointAction& joint_action,
                           const SystemModel& model) {
  return env_step(state, std::span<const ComponentAction>(joint_action.data(), joint_action.size()),
                  model);
}

}  // namespace kofn
