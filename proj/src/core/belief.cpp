#include "kofn/core/belief.hpp"

namespace kofn {

Vector3 belief_update(const Vector3& b, ComponentAction a, int o, const ComponentModel& m) {
  if (o < 0 || o >= kComponentObservations) throw ModelError("observation index out of range");
  const Vector3 predicted = predict_belief(b, m.transition(a));
  const Vector3 unnormalized = m.observation(a).col(o).cwiseProduct(predicted);
  const double evidence = unnormalized.sum();
  if (!(evidence > 0.0))
    throw DegenerateObservation("observation " + std::to_string(o) +
                                " has zero probability under " + to_string(a));
  return unnormalized / evidence;
}

Vector3 obs_likelihood(const Vector3& b, ComponentAction a, const ComponentModel& m) {
  return m.observation(a).transpose() * predict_belief(b, m.transition(a));
}

Eigen::VectorXd joint_belief(const Belief& beliefs) {
  Eigen::VectorXd joint = Eigen::VectorXd::Ones(1);
  for (int m = 0; m < beliefs.cols(); ++m) {
    Eigen::VectorXd next(joint.size() * 3);
    for (Eigen::Index i = 0; i < joint.size(); ++i) next.segment<3>(3 * i) = joint(i) * beliefs.col(m);
    joint = std::move(next);
  }
  return joint;
}

}  // namespace kofn
