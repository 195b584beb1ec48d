#include "kofn/eval/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>

namespace kofn {

Estimate estimate(std::span<const double> samples) {
  Estimate e;
  e.count = static_cast<long>(samples.size());
  if (samples.empty()) return e;
  double sum = 0.0;
  for (double x : samples) sum += x;
  e.mean = sum / static_cast<double>(e.count);
  if (e.count > 1) {
    double ss = 0.0;
    for (double x : samples) ss += (x - e.mean) * (x - e.mean);
    e.std_dev = std::sqrt(ss / static_cast<double>(e.count - 1));
  }
  e.half_width = 1.96 * e.std_error();
  return e;
}

std::vector<double> rollout_costs(Policy& policy, const SystemModel& model, const EvalOptions& opts,
                                  long first, long count) {
  if (count < 0) count = opts.rollouts - first;
  std::vector<double> costs(static_cast<std::size_t>(count), 0.0);
  const int batch_cap = std::max(1, opts.batch);
  std::vector<EnvState> envs;
  std::vector<Belief> beliefs;
  std::vector<RandomEngine> rngs;
  std::vector<JointAction> actions;
  std::vector<Observations> observations;
  for (long start = 0; start < count; start += batch_cap) {
    const int b = static_cast<int>(std::min<long>(batch_cap, count - start));
    envs.clear();
    rngs.clear();
    for (int i = 0; i < b; ++i) {
      const std::uint64_t seed = rollout_seed(opts.seed, first + start + i);
      envs.push_back(env_reset(model, seed, opts.horizon));
      rngs.push_back(make_stream(seed, StreamPurpose::Policy));
    }
    beliefs.resize(static_cast<std::size_t>(b));
    actions.resize(static_cast<std::size_t>(b));
    observations.resize(static_cast<std::size_t>(b));
    policy.reset(b);
    double discount = 1.0;
    for (int t = 0; t < opts.horizon; ++t) {
      for (int i = 0; i < b; ++i) beliefs[static_cast<std::size_t>(i)] = envs[static_cast<std::size_t>(i)].beliefs;
      policy.act(beliefs, t, rngs, actions);
      for (int i = 0; i < b; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        const StepResult r = env_step(envs[idx], actions[idx], model);
        costs[static_cast<std::size_t>(start) + idx] += discount * r.cost;
        observations[idx] = r.observations;
      }
      policy.observe(actions, observations);
      discount *= model.gamma;
    }
  }
  return costs;
}

Estimate evaluate_policy(Policy& policy, const SystemModel& model, const EvalOptions& opts) {
  const std::vector<double> costs = rollout_costs(policy, model, opts);
  return estimate(costs);
}

Estimate evaluate_policy(const PolicyFactory& factory, const SystemModel& model,
                         const EvalOptions& opts) {
  const int workers = static_cast<int>(std::clamp<long>(opts.workers, 1, std::max(1L, opts.rollouts)));
  if (workers == 1) {
    auto policy = factory();
    return evaluate_policy(*policy, model, opts);
  }
  std::vector<double> costs(static_cast<std::size_t>(opts.rollouts));
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  const long chunk = (opts.rollouts + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        const long first = w * chunk;
        const long count = std::min(chunk, opts.rollouts - first);
        if (count <= 0) return;
        auto policy = factory();
        const auto part = rollout_costs(*policy, model, opts, first, count);
        std::copy(part.begin(), part.end(), costs.begin() + first);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return estimate(costs);
}

int worker_count(int fallback) {
  if (const char* env = std::getenv("KOFN_WORKERS")) {
    try {
      const int v = std::stoi(env);
      if (v >= 1) return v;
    } catch (const std::exception&) {
    }
    throw std::invalid_argument(std::string("KOFN_WORKERS must be a positive integer, got '") + env + "'");
  }
  return std::max(1, fallback);
}

}  // namespace kofn
