#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <stdexcept>

namespace kofn::nn {

template <typename Scalar>
struct AdamState {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Vector m;
  Vector v;
  long step = 0;
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar eps = Scalar(1e-8);

  AdamState() = default;
  explicit AdamState(Eigen::Index n) : m(Vector::Zero(n)), v(Vector::Zero(n)) {}
};

/// Bias-corrected Adam update in place.
template <typename Scalar>
void adam_step(Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& params,
               const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& grad, AdamState<Scalar>& s,
               Scalar lr) {
  if (grad.size() != params.size() || s.m.size() != params.size() || s.v.size() != params.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  ++s.step;
  s.m = s.beta1 * s.m + (Scalar(1) - s.beta1) * grad;
  s.v = s.beta2 * s.v + (Scalar(1) - s.beta2) * grad.cwiseAbs2();
  const Scalar c1 = Scalar(1) - std::pow(s.beta1, static_cast<Scalar>(s.step));
  const Scalar c2 = Scalar(1) - std::pow(s.beta2, static_cast<Scalar>(s.step));
  params.array() -= lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + s.eps);
}

/// Rescales all gradients jointly so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
template <typename Scalar>
Scalar clip_grad_norm(std::initializer_list<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>*> grads,
                      Scalar max_norm) {
  Scalar sq = 0;
  for (auto* g : grads) sq += g->squaredNorm();
  const Scalar norm = std::sqrt(sq);
  if (norm > max_norm) {
    const Scalar scale = max_norm / (norm + Scalar(1e-6));
    for (auto* g : grads) *g *= scale;
  }
  return norm;
}

/// Linear interpolation from start to end over `span` steps, constant afterwards.
struct LinearSchedule {
  double start = 0.0;
  double end = 0.0;
  long span = 0;

  static LinearSchedule constant(double v) { return {v, v, 0}; }

  double operator()(long t) const {
    if (span <= 0 || t >= span) return end;
    if (t <= 0) return start;
    return start + (end - start) * static_cast<double>(t) / static_cast<double>(span);
  }
};

}  // namespace kofn::nn
