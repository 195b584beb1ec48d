#include "kofn/solver/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kofn {

void AlphaSet::add(const Eigen::VectorXd& alpha, int action) {
  if (n_states_ == 0) n_states_ = static_cast<int>(alpha.size());
  const int n = size();
  if (storage_.cols() <= n) {
    const Eigen::Index capacity = std::max<Eigen::Index>(16, 2 * storage_.cols());
    storage_.conservativeResize(n_states_, capacity);
  }
  storage_.col(n) = alpha;
  actions_.push_back(action);
}

void AlphaSet::retain(const std::vector<bool>& keep) {
  int w = 0;
  for (int r = 0; r < size(); ++r) {
    if (!keep[static_cast<std::size_t>(r)]) continue;
    if (w != r) {
      storage_.col(w) = storage_.col(r);
      actions_[static_cast<std::size_t>(w)] = actions_[static_cast<std::size_t>(r)];
    }
    ++w;
  }
  actions_.resize(static_cast<std::size_t>(w));
}

std::pair<double, int> AlphaSet::best(const Eigen::Ref<const Eigen::VectorXd>& b) const {
  if (empty()) return {-std::numeric_limits<double>::infinity(), -1};
  const Eigen::VectorXd values = vectors().transpose() * b;
  Eigen::Index idx = 0;
  const double v = values.maxCoeff(&idx);
  return {v, static_cast<int>(idx)};
}

double SawtoothBound::value_excluding(const Eigen::Ref<const Eigen::VectorXd>& b, int skip) const {
  const double base = b.dot(corners_);
  double correction = 0.0;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (static_cast<int>(i) == skip) continue;
    const Point& p = points_[i];
    const double delta = p.value - p.corner_value;
    if (delta >= correction) continue;
    double phi = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < p.support.size(); ++j) {
      phi = std::min(phi, b(p.support[j]) * p.inverse[j]);
      if (phi <= 0.0) break;
    }
    correction = std::min(correction, phi * delta);
  }
  double v = base + correction;
  if (planes_.size() > 0) v = std::min(v, (planes_.transpose() * b).maxCoeff());
  return v;
}

int SawtoothBound::prune() {
  int removed = 0;
  for (std::size_t i = points_.size(); i-- > 0;) {
    if (value_excluding(points_[i].belief, static_cast<int>(i)) <= points_[i].value + 1e-12) {
      points_.erase(points_.begin() + static_cast<std::ptrdiff_t>(i));
      ++removed;
    }
  }
  if (removed) rebuild_index();
  return removed;
}

void SawtoothBound::rebuild_index() {
  index_.clear();
  for (std::size_t i = 0; i < points_.size(); ++i)
    index_[belief_key(points_[i].belief)].push_back(static_cast<int>(i));
}

bool SawtoothBound::update(const Eigen::Ref<const Eigen::VectorXd>& b, double v) {
  const std::size_t key = belief_key(b);
  auto& bucket = index_[key];
  for (int i : bucket) {
    Point& p = points_[static_cast<std::size_t>(i)];
    if ((p.belief - b).lpNorm<1>() <= 1e-9) {
      if (v < p.value) {
        p.value = v;
        return true;
      }
      return false;
    }
  }
  if (v >= value(b)) return false;
  Point p;
  p.belief = b;
  p.value = v;
  p.corner_value = b.dot(corners_);
  for (Eigen::Index s = 0; s < b.size(); ++s) {
    if (b(s) > 0.0) {
      p.support.push_back(static_cast<int>(s));
      p.inverse.push_back(1.0 / b(s));
    }
  }
  bucket.push_back(static_cast<int>(points_.size()));
  points_.push_back(std::move(p));
  return true;
}

std::size_t belief_key(const Eigen::Ref<const Eigen::VectorXd>& b) {
  std::size_t h = 1469598103934665603ull;
  for (Eigen::Index s = 0; s < b.size(); ++s) {
    const auto q = static_cast<long long>(std::llround(b(s) * 1e9));
    h ^= static_cast<std::size_t>(q);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace kofn
