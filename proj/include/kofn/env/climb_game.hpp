#pragma once

#include <Eigen/Dense>

#include <stdexcept>

namespace kofn {

/// Repeated two-agent Climb Game. Stateless; no observations.
struct ClimbGame {
  static constexpr int kActions = 3;
  static constexpr int kHorizon = 25;

  /// payoff(agent-2 action, agent-1 action)
  static Eigen::Matrix3d payoff() {
    Eigen::Matrix3d p;
    p << 11, -30, 0,
         -30, 7, 6,
         0, 0, 5;
    return p;
  }

  static double optimal_return() { return 11.0 * kHorizon; }
};

/// Reward of the joint action (agent-1 action, agent-2 action).
inline double climb_step(int action_1, int action_2) {
  if (action_1 < 0 || action_1 >= 3 || action_2 < 0 || action_2 >= 3)
    throw std::out_of_range("climb_step: actions must be in {0, 1, 2}");
  static const Eigen::Matrix3d table = ClimbGame::payoff();
  return table(action_2, action_1);
}

}  // namespace kofn
