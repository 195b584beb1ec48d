#pragma once

#include <Eigen/Dense>

#include <unordered_map>
#include <vector>

namespace kofn {

/// Labeled alpha-vectors stored column-wise; the lower bound is max_i alpha_i . b.
class AlphaSet {
 public:
  AlphaSet() = default;
  explicit AlphaSet(int n_states) : n_states_(n_states) {}

  int n_states() const { return n_states_; }
  int size() const { return static_cast<int>(actions_.size()); }
  bool empty() const { return actions_.empty(); }

  void add(const Eigen::VectorXd& alpha, int action);
  /// Keeps only the vectors whose flag is set, preserving order.
  void retain(const std::vector<bool>& keep);

  auto vectors() const { return storage_.leftCols(size()); }
  auto vector(int i) const { return storage_.col(i); }
  int action(int i) const { return actions_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& actions() const { return actions_; }

  /// Max value and the index of the first maximizing vector.
  std::pair<double, int> best(const Eigen::Ref<const Eigen::VectorXd>& b) const;
  double value(const Eigen::Ref<const Eigen::VectorXd>& b) const { return best(b).first; }

 private:
  int n_states_ = 0;
  Eigen::MatrixXd storage_;
  std::vector<int> actions_;
};

/// Sawtooth upper bound: corner values plus interior belief/value points, optionally
/// capped by a set of upper hyperplanes (the bound is the min of both).
class SawtoothBound {
 public:
  struct Point {
    Eigen::VectorXd belief;
    double value = 0.0;
    double corner_value = 0.0;  // belief . corners
    std::vector<int> support;
    std::vector<double> inverse;  // 1 / belief(s) on the support
  };

  SawtoothBound() = default;
  explicit SawtoothBound(Eigen::VectorXd corners) : corners_(std::move(corners)) {}
  /// planes: one column per hyperplane; every max_j planes_j . b must be an upper bound.
  SawtoothBound(Eigen::VectorXd corners, Eigen::MatrixXd planes)
      : corners_(std::move(corners)), planes_(std::move(planes)) {}

  const Eigen::VectorXd& corners() const { return corners_; }
  const std::vector<Point>& points() const { return points_; }
  int n_states() const { return static_cast<int>(corners_.size()); }

  double value(const Eigen::Ref<const Eigen::VectorXd>& b) const { return value_excluding(b, -1); }

  /// Drops interior points that no longer tighten the bound at their own belief.
  int prune();

  /// Records value v at b if it tightens the bound there. Returns true when stored.
  bool update(const Eigen::Ref<const Eigen::VectorXd>& b, double v);

 private:
  double value_excluding(const Eigen::Ref<const Eigen::VectorXd>& b, int skip) const;
  void rebuild_index();

  Eigen::VectorXd corners_;
  Eigen::MatrixXd planes_;
  std::vector<Point> points_;
  std::unordered_map<std::size_t, std::vector<int>> index_;
};

struct BoundPair {
  AlphaSet lower;
  SawtoothBound upper;
  double lower_at_b0 = 0.0;
  double upper_at_b0 = 0.0;

  double gap_at_b0() const { return upper_at_b0 - lower_at_b0; }
};

/// Hash of a belief quantized to 1e-9; equal beliefs within L1 1e-9 usually collide.
std::size_t belief_key(const Eigen::Ref<const Eigen::VectorXd>& b);

}  // namespace kofn
