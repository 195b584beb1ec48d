#pragma once

#include "kofn/core/model.hpp"
#include "kofn/env/kofn_env.hpp"
#include "kofn/env/policy.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace kofn {

/// Sample mean with a normal-approximation 95% interval.
struct Estimate {
  double mean = 0.0;
  double std_dev = 0.0;  ///< sample standard deviation
  double half_width = 0.0;
  long count = 0;

  double lower() const { return mean - half_width; }
  double upper() const { return mean + half_width; }
  double std_error() const { return count > 0 ? std_dev / std::sqrt(static_cast<double>(count)) : 0.0; }
};

/// Fixed-order two-pass reduction (bit-reproducible for a given input order).
Estimate estimate(std::span<const double> samples);

struct EvalOptions {
  int horizon = kEvalHorizon;
  long rollouts = 100000;
  std::uint64_t seed = 0;
  int batch = 1024;
  int workers = 1;
};

/// Seed of rollout i; policies evaluated with the same base seed see identical dynamics.
inline std::uint64_t rollout_seed(std::uint64_t base, long i) {
  return derive_seed(base, static_cast<std::uint64_t>(StreamPurpose::Episode),
                     static_cast<std::uint64_t>(i));
}

/// Discounted cost of every rollout, in rollout order.
std::vector<double> rollout_costs(Policy& policy, const SystemModel& model, const EvalOptions& opts,
                                  long first = 0, long count = -1);

Estimate evaluate_policy(Policy& policy, const SystemModel& model, const EvalOptions& opts);

using PolicyFactory = std::function<std::unique_ptr<Policy>()>;

/// Splits the rollouts over opts.workers threads, one policy instance per thread.
/// The result does not depend on the worker count.
Estimate evaluate_policy(const PolicyFactory& factory, const SystemModel& model,
                         const EvalOptions& opts);

/// Worker count from KOFN_WORKERS when set, otherwise `fallback`.
int worker_count(int fallback);

}  // namespace kofn
