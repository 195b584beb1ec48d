#pragma once

#include "kofn/eval/evaluate.hpp"
#include "kofn/marl/envs.hpp"
#include "kofn/marl/spec.hpp"
#include "kofn/marl/trainer.hpp"
#include "kofn/nn/checkpoint.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace kofn {

enum class Objective { MinimizeCost, MaximizeReturn };

/// True when a is strictly better than b under the objective.
inline bool better(double a, double b, Objective o) { return o == Objective::MinimizeCost ? a < b : a > b; }

struct EvalPoint {
  long progress = 0;
  Estimate value;
};

/// Index of the best point (earliest among ties), or -1 when nothing is eligible.
int select_best(std::span<const EvalPoint> curve, Objective objective, bool exclude_initial);

struct SeedRun {
  std::uint64_t seed = 0;
  std::vector<EvalPoint> curve;
  int best = -1;
  nn::Checkpoint best_policy;
  bool failed = false;
  std::string error;

  const EvalPoint* best_point() const { return best >= 0 ? &curve[static_cast<std::size_t>(best)] : nullptr; }
};

struct EvalReport {
  std::string system;
  marl::Algorithm algorithm = marl::Algorithm::DDQN;
  Objective objective = Objective::MinimizeCost;
  std::vector<SeedRun> seeds;

  /// Seed whose best checkpoint is best overall (earliest seed among ties); nullptr if all failed.
  const SeedRun* best_seed() const;
  int failed_count() const;
};

/// Scores the networks of one checkpoint.
using NetworkEvaluator = std::function<Estimate(const marl::AgentNetworks&)>;

/// Monte Carlo discounted cost of the trained policy on a maintenance system.
NetworkEvaluator kofn_evaluator(const SystemModel& model, EvalOptions opts);
/// Exact expected Climb Game return (zero-width estimate).
NetworkEvaluator climb_evaluator();

struct ProtocolOptions {
  Objective objective = Objective::MinimizeCost;
  bool exclude_initial = false;
  /// Parallel training runs (seeds); evaluation inside a run is single-threaded when > 1.
  int workers = 1;
  /// Called after every evaluation with the policy checkpoint (e.g. to persist it).
  std::function<void(std::uint64_t seed, const EvalPoint&, const nn::Checkpoint&)> on_checkpoint;
};

/// Trains one run per seed, evaluates at every interval and keeps the best checkpoint.
/// Diverged runs are recorded as failed seeds.
EvalReport run_protocol(const marl::AgentSpec& spec, const marl::MarlEnv& env,
                        std::span<const std::uint64_t> seeds, const NetworkEvaluator& evaluate,
                        const ProtocolOptions& opts = {});

/// Best value divided by the baseline mean (1 means on par with the baseline).
inline double normalized(double value, double baseline_mean) { return value / baseline_mean; }

/// Linear-interpolation quantile (q in [0,1]) of unsorted values.
double quantile(std::vector<double> values, double q);

struct TableRow {
  std::string system;
  std::string method;
  Estimate value;
};

/// system, method, mean, ci_lower, ci_upper, std_dev, rollouts
void write_summary_table(std::ostream& out, std::span<const TableRow> rows);
/// One row per seed: system, algorithm, seed, best_progress, mean, ci_lower, ci_upper, status
void write_seed_table(std::ostream& out, std::span<const EvalReport> reports);
/// One row per seed: system, algorithm, seed, normalized best value
void write_box_data(std::ostream& out, std::span<const EvalReport> reports, double baseline_mean);
/// Median and interquartile range across non-failed seeds at each evaluation point.
void write_learning_curve(std::ostream& out, const EvalReport& report);
/// Full curve of one run: progress, mean, ci_lower, ci_upper, count
void write_run_metrics(std::ostream& out, const SeedRun& run);

}  // namespace kofn
