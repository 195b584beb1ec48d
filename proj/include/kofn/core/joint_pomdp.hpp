#pragma once

#include "kofn/core/model.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <vector>

namespace kofn {

/// Centralized POMDP over the flattened joint state, action and observation spaces.
/// Joint indices are mixed-radix base 3 with component 1 most significant.
struct JointPomdp {
  int n_components = 0;
  int n_states = 0;
  int n_actions = 0;
  int n_obs = 0;
  /// transition[a](s, s') = P(s' | s, a)
  std::vector<Eigen::MatrixXd> transition;
  /// observation[a](s', o) = P(o | s', a)
  std::vector<Eigen::MatrixXd> observation;
  /// reward(s, a) = -step_cost(s, a)
  Eigen::MatrixXd reward;
  double gamma = 0.8;
  Eigen::VectorXd b0;

  void validate(double tol = 1e-10) const;
};

int encode_joint(std::span<const int> digits);
ComponentStates decode_joint(int index, int n);
int encode_joint_action(std::span<const ComponentAction> actions);
JointAction decode_joint_action(int index, int n);

int pow3(int n);

/// Flattens a factored system. Rejects n > 6.
JointPomdp flatten_to_pomdp(const SystemModel& model);

/// Writes the dense textual POMDP format used by external point-based solvers.
void write_pomdp_text(std::ostream& out, const JointPomdp& pomdp);

}  // namespace kofn
