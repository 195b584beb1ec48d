#pragma once

#include "kofn/env/policy.hpp"
#include "kofn/eval/evaluate.hpp"

#include <array>
#include <iosfwd>
#include <vector>

namespace kofn {

struct HeuristicParams {
  int inspect_interval = 1;  ///< [1, 20]
  int n_inspect = 1;         ///< [1, n]
  int repair_threshold = 1;  ///< minimum observed damage state index triggering repair, {1, 2}

  void validate(int n) const;
};

/// Inspection round when t % interval == 0: the n_inspect components with the largest
/// failure mass are inspected (lowest index among ties). On the following step every
/// inspected component whose observation reached the threshold is repaired.
/// `pending` marks components due for repair this step.
JointAction heuristic_act(const HeuristicParams& params, const Belief& beliefs, int t,
                          std::span<const bool> pending = {});

class HeuristicPolicy final : public Policy {
 public:
  explicit HeuristicPolicy(HeuristicParams params) : params_(params) {}

  std::string name() const override { return "heuristic"; }
  void reset(int batch) override;
  void act(std::span<const Belief> beliefs, int t, std::span<RandomEngine> rngs,
           std::span<JointAction> out) override;
  void observe(std::span<const JointAction> actions, std::span<const Observations> obs) override;

  const HeuristicParams& params() const { return params_; }

 private:
  HeuristicParams params_;
  std::vector<std::array<bool, kMaxComponents>> pending_;
};

struct GridCell {
  HeuristicParams params;
  Estimate value;
};

struct GridResult {
  std::vector<GridCell> cells;  ///< in enumeration order (interval, n_inspect, threshold)
  int best = -1;                ///< lowest mean cost, earliest cell among ties

  const GridCell& best_cell() const { return cells.at(static_cast<std::size_t>(best)); }
};

/// Every admissible parameter combination with `max_interval` as the interval cap.
std::vector<HeuristicParams> heuristic_grid(int n, int max_interval = 20);

/// Evaluates every combination with common random seeds (opts.seed) and returns the
/// minimizer of the mean discounted cost.
GridResult grid_search(const SystemModel& model, const EvalOptions& opts, int max_interval = 20);

void write_grid_csv(std::ostream& out, const GridResult& grid);

}  // namespace kofn
