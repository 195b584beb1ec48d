#pragma once

#include "kofn/util/random.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace kofn::nn {

/// Closed-form parameter count: sum over layers of in*out + out.
inline int parameter_count(std::span<const int> sizes) {
  int n = 0;
  for (std::size_t l = 1; l < sizes.size(); ++l) n += sizes[l - 1] * sizes[l] + sizes[l];
  return n;
}

inline int parameter_count(const std::vector<int>& sizes) {
  return parameter_count(std::span<const int>(sizes));
}

/// Fully connected network: ReLU on hidden layers, identity output.
/// Parameters live in one flat vector; each layer stores W (out x in, column-major)
/// followed by b. Inputs and outputs are column-batched.
template <typename Scalar>
class Mlp {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  struct Tape {
    std::vector<Matrix> activations;  // input, hidden (post-ReLU)..., output
  };

  Mlp() = default;

  explicit Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output sizes");
    for (int s : sizes_)
      if (s <= 0) throw std::invalid_argument("Mlp: layer sizes must be positive");
    offsets_.push_back(0);
    for (std::size_t l = 1; l < sizes_.size(); ++l)
      offsets_.push_back(offsets_.back() + sizes_[l - 1] * sizes_[l] + sizes_[l]);
    params_ = Vector::Zero(offsets_.back());
  }

  const std::vector<int>& layer_sizes() const { return sizes_; }
  int n_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  int n_params() const { return static_cast<int>(params_.size()); }

  Vector& params() { return params_; }
  const Vector& params() const { return params_; }

  Eigen::Map<Matrix> weight(int l) {
    return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
  }
  Eigen::Map<const Matrix> weight(int l) const {
    return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
  }
  Eigen::Map<Vector> bias(int l) {
    return {params_.data() + offsets_[l] + sizes_[l] * sizes_[l + 1], sizes_[l + 1]};
  }
  Eigen::Map<const Vector> bias(int l) const {
    return {params_.data() + offsets_[l] + sizes_[l] * sizes_[l + 1], sizes_[l + 1]};
  }

  /// Weights and biases uniform in +-1/sqrt(fan_in).
  void init_uniform(RandomEngine& rng) {
    for (int l = 0; l < n_layers(); ++l) {
      const Scalar r = Scalar(1) / std::sqrt(static_cast<Scalar>(sizes_[l]));
      const int begin = offsets_[l], end = offsets_[l + 1];
      for (int i = begin; i < end; ++i)
        params_(i) = static_cast<Scalar>((2.0 * uniform01(rng) - 1.0)) * r;
    }
  }

  Matrix forward(const Eigen::Ref<const Matrix>& x) const {
    check_input(x);
    Matrix h = x;
    for (int l = 0; l < n_layers(); ++l) {
      Matrix z = weight(l) * h;
      z.colwise() += bias(l);
      if (l + 1 < n_layers()) z = z.cwiseMax(Scalar(0));
      h = std::move(z);
    }
    return h;
  }

  Matrix forward(const Eigen::Ref<const Matrix>& x, Tape& tape) const {
    check_input(x);
    tape.activations.resize(static_cast<std::size_t>(n_layers()) + 1);
    tape.activations[0] = x;
    for (int l = 0; l < n_layers(); ++l) {
      Matrix& z = tape.activations[static_cast<std::size_t>(l) + 1];
      z.noalias() = weight(l) * tape.activations[static_cast<std::size_t>(l)];
      z.colwise() += bias(l);
      if (l + 1 < n_layers()) z = z.cwiseMax(Scalar(0));
    }
    return tape.activations.back();
  }

  /// Adds dL/dparams to `grad` and returns dL/dinput.
  Matrix backward(const Tape& tape, const Eigen::Ref<const Matrix>& out_grad, Vector& grad) const {
    if (static_cast<int>(tape.activations.size()) != n_layers() + 1)
      throw std::invalid_argument("Mlp::backward: tape does not belong to this network");
    if (out_grad.rows() != output_size() || out_grad.cols() != tape.activations.back().cols())
      throw std::invalid_argument("Mlp::backward: output gradient shape mismatch");
    if (grad.size() != params_.size()) grad = Vector::Zero(params_.size());
    Matrix g = out_grad;
    for (int l = n_layers() - 1; l >= 0; --l) {
      const Matrix& a = tape.activations[static_cast<std::size_t>(l)];
      Eigen::Map<Matrix> gw(grad.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
      Eigen::Map<Vector> gb(grad.data() + offsets_[l] + sizes_[l] * sizes_[l + 1], sizes_[l + 1]);
      gw.noalias() += g * a.transpose();
      gb += g.rowwise().sum();
      Matrix prev = weight(l).transpose() * g;
      if (l > 0) prev = prev.cwiseProduct((a.array() > Scalar(0)).template cast<Scalar>().matrix());
      g = std::move(prev);
    }
    return g;
  }

 private:
  void check_input(const Eigen::Ref<const Matrix>& x) const {
    if (x.rows() != input_size())
      throw std::invalid_argument("Mlp::forward: input has " + std::to_string(x.rows()) +
                                  " rows, expected " + std::to_string(input_size()));
  }

  std::vector<int> sizes_;
  std::vector<int> offsets_;
  Vector params_;
};

using MlpD = Mlp<double>;

}  // namespace kofn::nn
