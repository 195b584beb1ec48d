#pragma once

#include "kofn/core/joint_pomdp.hpp"
#include "kofn/core/model.hpp"

#include <Eigen/Dense>

#include <vector>

namespace kofn::testing {

/// The first benchmark component on its own as a 1-out-of-1 system.
inline SystemModel single_component_system() {
  return make_system({reference_component(0)}, 1, 4.0, 3.0);
}

/// Point-based value iteration on a fixed regular grid of the 2-simplex
/// (resolution r gives (r+1)(r+2)/2 points). Backs up every grid point until the
/// alpha-set value at every point moves by less than tol; returns the value at b.
inline double grid_value_iteration(const JointPomdp& p, int resolution, const Eigen::VectorXd& b,
                                   double tol = 1e-9) {
  const int S = p.n_states;
  std::vector<Eigen::VectorXd> grid;
  for (int i = 0; i <= resolution; ++i)
    for (int j = 0; i + j <= resolution; ++j) {
      Eigen::VectorXd g(3);
      g << i, j, resolution - i - j;
      grid.push_back(g / resolution);
    }
  grid.push_back(b);
  const int P = static_cast<int>(grid.size());
  Eigen::MatrixXd points(S, P);
  for (int i = 0; i < P; ++i) points.col(i) = grid[static_cast<std::size_t>(i)];
  Eigen::MatrixXd alphas = Eigen::MatrixXd::Constant(S, 1, p.reward.minCoeff() / (1.0 - p.gamma));
  Eigen::VectorXd values = Eigen::VectorXd::Constant(P, -1e300);
  for (int sweep = 0; sweep < 10000; ++sweep) {
    Eigen::MatrixXd next(S, P);
    Eigen::VectorXd next_values = Eigen::VectorXd::Constant(P, -1e300);
    for (int a = 0; a < p.n_actions; ++a) {
      Eigen::MatrixXd backed = p.reward.col(a).replicate(1, P);
      for (int o = 0; o < p.n_obs; ++o) {
        // g(s) = sum_s' T(s,s') O(s',o) alpha(s') for every alpha, scored at every point
        const Eigen::MatrixXd g = p.transition[a] * (p.observation[a].col(o).asDiagonal() * alphas);
        const Eigen::MatrixXd score = g.transpose() * points;
        for (int i = 0; i < P; ++i) {
          Eigen::Index best = 0;
          score.col(i).maxCoeff(&best);
          backed.col(i) += p.gamma * g.col(best);
        }
      }
      for (int i = 0; i < P; ++i) {
        const double v = backed.col(i).dot(points.col(i));
        if (v > next_values(i)) {
          next_values(i) = v;
          next.col(i) = backed.col(i);
        }
      }
    }
    const double change = (next_values - values).cwiseAbs().maxCoeff();
    alphas = next;
    values = next_values;
    if (change < tol) break;
  }
  return (alphas.transpose() * b).maxCoeff();
}

}  // namespace kofn::testing
