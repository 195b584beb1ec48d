#pragma once

#include "kofn/env/kofn_env.hpp"
#include "kofn/env/policy.hpp"

#include <iosfwd>
#include <vector>

namespace kofn {

struct TraceRow {
  int t = 0;
  JointAction actions;
  ComponentStates true_states;
  Belief beliefs;
  double cost = 0.0;
};

/// Runs one episode of `policy` and records the state before every step.
std::vector<TraceRow> record_episode(const SystemModel& model, Policy& policy,
                                     std::uint64_t episode_seed, int horizon = kEvalHorizon);

/// Columns: t, action_m, state_m, b_m_0..2 (per component, 1-based), cost.
void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows);

}  // namespace kofn
