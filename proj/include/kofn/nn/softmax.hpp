#pragma once

#include <Eigen/Dense>

#include <limits>

namespace kofn::nn {

/// Column-wise log-softmax. Entries where mask is zero get -inf and no mass.
template <typename Derived>
auto log_softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out = logits;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    const Scalar m = out.col(c).maxCoeff();
    const Scalar lse = m + std::log((out.col(c).array() - m).exp().sum());
    out.col(c).array() -= lse;
  }
  return out;
}

template <typename Derived, typename MaskDerived>
auto log_softmax(const Eigen::MatrixBase<Derived>& logits, const Eigen::DenseBase<MaskDerived>& mask) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> masked = logits;
  for (Eigen::Index c = 0; c < masked.cols(); ++c)
    for (Eigen::Index r = 0; r < masked.rows(); ++r)
      if (!mask(r, c)) masked(r, c) = -std::numeric_limits<Scalar>::infinity();
  return log_softmax(masked);
}

template <typename Derived>
auto softmax(const Eigen::MatrixBase<Derived>& logits) {
  return log_softmax(logits).array().exp().matrix().eval();
}

template <typename Derived, typename MaskDerived>
auto softmax(const Eigen::MatrixBase<Derived>& logits, const Eigen::DenseBase<MaskDerived>& mask) {
  return log_softmax(logits, mask).array().exp().matrix().eval();
}

}  // namespace kofn::nn
