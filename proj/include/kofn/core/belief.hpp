#pragma once

#include "kofn/core/model.hpp"

#include <Eigen/Dense>

namespace kofn {

class DegenerateObservation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Prediction step b' = T^T b, valid for any scalar type.
template <typename Derived, typename TransitionDerived>
auto predict_belief(const Eigen::MatrixBase<Derived>& b,
                    const Eigen::MatrixBase<TransitionDerived>& transition) {
  return (transition.transpose() * b).eval();
}

/// Bayes update of a single component belief after action `a` and observation `o`.
/// Throws DegenerateObservation when o has zero probability under (b, a).
Vector3 belief_update(const Vector3& b, ComponentAction a, int o, const ComponentModel& m);

/// Pr(o | b, a) for each observation o.
Vector3 obs_likelihood(const Vector3& b, ComponentAction a, const ComponentModel& m);

/// True if every entry is >= -tol and the entries sum to 1 within tol.
template <typename Derived>
bool on_simplex(const Eigen::MatrixBase<Derived>& b, double tol = 1e-9) {
  return (b.array() >= -tol).all() && std::abs(b.sum() - 1.0) <= tol;
}

/// Joint belief over the flattened state space (component 1 most significant).
Eigen::VectorXd joint_belief(const Belief& beliefs);

}  // namespace kofn
