#include "kofn/env/trace.hpp"

#include "kofn/util/csv.hpp"

#include <ostream>

namespace kofn {

std::vector<TraceRow> record_episode(const SystemModel& model, Policy& policy,
                                     std::uint64_t episode_seed, int horizon) {
  EnvState state = env_reset(model, episode_seed, horizon);
  RandomEngine policy_rng = make_stream(episode_seed, StreamPurpose::Policy);
  std::vector<TraceRow> rows;
  policy.reset(1);
  JointAction action;
  while (state.t < horizon) {
    const Belief current = state.beliefs;
    policy.act(std::span<const Belief>(&current, 1), state.t, std::span<RandomEngine>(&policy_rng, 1),
               std::span<JointAction>(&action, 1));
    TraceRow row;
    row.t = state.t;
    row.actions = action;
    row.true_states = state.true_states;
    row.beliefs = current;
    const StepResult r = env_step(state, action, model);
    row.cost = r.cost;
    rows.push_back(std::move(row));
    policy.observe(std::span<const JointAction>(&action, 1),
                   std::span<const Observations>(&r.observations, 1));
  }
  return rows;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows) {
  CsvWriter csv(out);
  const std::size_t n = rows.empty() ? 0 : rows.front().actions.size();
  std::vector<std::string> header{"t"};
  for (std::size_t m = 1; m <= n; ++m) header.push_back("action_" + std::to_string(m));
  for (std::size_t m = 1; m <= n; ++m) header.push_back("state_" + std::to_string(m));
  for (std::size_t m = 1; m <= n; ++m)
    for (int s = 0; s < 3; ++s) header.push_back("b_" + std::to_string(m) + "_" + std::to_string(s));
  header.push_back("cost");
  csv.row(header);
  for (const TraceRow& r : rows) {
    std::vector<std::string> f{std::to_string(r.t)};
    for (ComponentAction a : r.actions) f.push_back(to_string(a));
    for (int s : r.true_states) f.push_back(std::to_string(s));
    for (Eigen::Index m = 0; m < r.beliefs.cols(); ++m)
      for (int s = 0; s < 3; ++s) f.push_back(format_number(r.beliefs(s, m)));
    f.push_back(format_number(r.cost));
    csv.row(f);
  }
}

}  // namespace kofn
