#include "kofn/heuristic/heuristic.hpp"

#include "kofn/util/csv.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

namespace kofn {

void HeuristicParams::validate(int n) const {
  if (inspect_interval < 1 || inspect_interval > 20)
    throw std::invalid_argument("heuristic: inspect_interval must be in [1, 20]");
  if (n_inspect < 1 || n_inspect > n)
    throw std::invalid_argument("heuristic: n_inspect must be in [1, " + std::to_string(n) + "]");
  if (repair_threshold < 1 || repair_threshold > 2)
    throw std::invalid_argument("heuristic: repair_threshold must be 1 or 2");
}

JointAction heuristic_act(const HeuristicParams& params, const Belief& beliefs, int t,
                          std::span<const bool> pending) {
  const int n = static_cast<int>(beliefs.cols());
  JointAction action(static_cast<std::size_t>(n), ComponentAction::DoNothing);
  if (t % params.inspect_interval == 0) {
    std::array<int, kMaxComponents> order{};
    std::iota(order.begin(), order.begin() + n, 0);
    std::stable_sort(order.begin(), order.begin() + n,
                     [&](int a, int b) { return beliefs(kFailed, a) > beliefs(kFailed, b); });
    for (int i = 0; i < std::min(params.n_inspect, n); ++i)
      action[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = ComponentAction::Inspect;
  }
  for (std::size_t m = 0; m < pending.size() && m < action.size(); ++m)
    if (pending[m]) action[m] = ComponentAction::Repair;
  return action;
}

void HeuristicPolicy::reset(int batch) {
  pending_.assign(static_cast<std::size_t>(batch), {});
}

void HeuristicPolicy::act(std::span<const Belief> beliefs, int t, std::span<RandomEngine>,
                          std::span<JointAction> out) {
  for (std::size_t i = 0; i < beliefs.size(); ++i) {
    const auto n = static_cast<std::size_t>(beliefs[i].cols());
    out[i] = heuristic_act(params_, beliefs[i], t, std::span<const bool>(pending_[i].data(), n));
  }
}

void HeuristicPolicy::observe(std::span<const JointAction> actions, std::span<const Observations> obs) {
  for (std::size_t i = 0; i < actions.size(); ++i) {
    auto& pending = pending_[i];
    pending.fill(false);
    for (std::size_t m = 0; m < actions[i].size(); ++m)
      pending[m] = actions[i][m] == ComponentAction::Inspect && obs[i][m] >= params_.repair_threshold;
  }
}

std::vector<HeuristicParams> heuristic_grid(int n, int max_interval) {
  std::vector<HeuristicParams> grid;
  for (int interval = 1; interval <= max_interval; ++interval)
    for (int count = 1; count <= n; ++count)
      for (int threshold = 1; threshold <= 2; ++threshold)
        grid.push_back(HeuristicParams{interval, count, threshold});
  return grid;
}

GridResult grid_search(const SystemModel& model, const EvalOptions& opts, int max_interval) {
  if (opts.rollouts < 1) throw std::invalid_argument("grid_search: rollouts must be >= 1");
  GridResult result;
  for (const HeuristicParams& p : heuristic_grid(model.n(), max_interval)) {
    p.validate(model.n());
    const Estimate e = evaluate_policy([p] { return std::make_unique<HeuristicPolicy>(p); }, model, opts);
    result.cells.push_back(GridCell{p, e});
    if (result.best < 0 || e.mean < result.cells[static_cast<std::size_t>(result.best)].value.mean)
      result.best = static_cast<int>(result.cells.size()) - 1;
  }
  return result;
}

void write_grid_csv(std::ostream& out, const GridResult& grid) {
  CsvWriter csv(out);
  csv.row({"inspect_interval", "n_inspect", "repair_threshold", "mean_cost", "ci_low", "ci_high",
           "std_dev", "rollouts", "best"});
  for (std::size_t i = 0; i < grid.cells.size(); ++i) {
    const GridCell& c = grid.cells[i];
    csv.row({std::to_string(c.params.inspect_interval), std::to_string(c.params.n_inspect),
             std::to_string(c.params.repair_threshold), format_number(c.value.mean),
             format_number(c.value.lower()), format_number(c.value.upper()),
             format_number(c.value.std_dev), std::to_string(c.value.count),
             static_cast<int>(i) == grid.best ? "1" : "0"});
  }
}

}  // namespace kofn
