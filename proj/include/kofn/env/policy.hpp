#pragma once

#include "kofn/core/model.hpp"
#include "kofn/util/random.hpp"

#include <span>
#include <string>

namespace kofn {

/// A joint policy executed over a batch of concurrent rollouts. Rollout i
/// always sees beliefs[i], rngs[i] and writes out[i].
class Policy {
 public:
  virtual ~Policy() = default;

  virtual std::string name() const = 0;

  /// Starts `batch` fresh rollouts.
  virtual void reset(int batch) { (void)batch; }

  virtual void act(std::span<const Belief> beliefs, int t, std::span<RandomEngine> rngs,
                   std::span<JointAction> out) = 0;

  /// Called after every step with the executed actions and drawn observations.
  virtual void observe(std::span<const JointAction> actions, std::span<const Observations> obs) {
    (void)actions;
    (void)obs;
  }
};

/// Every component does nothing forever.
class DoNothingPolicy final : public Policy {
 public:
  std::string name() const override { return "do-nothing"; }
  void act(std::span<const Belief> beliefs, int, std::span<RandomEngine>,
           std::span<JointAction> out) override {
    for (std::size_t i = 0; i < beliefs.size(); ++i)
      out[i].assign(static_cast<std::size_t>(beliefs[i].cols()), ComponentAction::DoNothing);
  }
};

/// Repairs every component every `period` steps (t = period-1, 2*period-1, ...).
class PeriodicRepairPolicy final : public Policy {
 public:
  explicit PeriodicRepairPolicy(int period) : period_(period) {}
  std::string name() const override { return "periodic-repair"; }
  void act(std::span<const Belief> beliefs, int t, std::span<RandomEngine>,
           std::span<JointAction> out) override {
    const bool repair = (t + 1) % period_ == 0;
    for (std::size_t i = 0; i < beliefs.size(); ++i)
      out[i].assign(static_cast<std::size_t>(beliefs[i].cols()),
                    repair ? ComponentAction::Repair : ComponentAction::DoNothing);
  }

 private:
  int period_;
};

}  // namespace kofn
