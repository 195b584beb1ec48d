#include "kofn/solver/solver.hpp"

#include "kofn/core/belief.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <map>
#include <stdexcept>

namespace kofn {

BeliefExpander::BeliefExpander(const JointPomdp& pomdp) : pomdp_(&pomdp) {
  offsets_.push_back(0);
  for (int a = 0; a < pomdp.n_actions; ++a) {
    const Eigen::MatrixXd& obs = pomdp.observation[static_cast<std::size_t>(a)];
    std::map<std::vector<double>, int> seen;
    for (int o = 0; o < pomdp.n_obs; ++o) {
      std::vector<double> key(obs.col(o).data(), obs.col(o).data() + obs.rows());
      if (std::all_of(key.begin(), key.end(), [](double v) { return v == 0.0; })) continue;
      auto [it, inserted] = seen.emplace(std::move(key), static_cast<int>(obs_columns_.size()));
      if (inserted) {
        obs_columns_.push_back(obs.col(o));
        multiplicity_.push_back(1.0);
      } else {
        multiplicity_[static_cast<std::size_t>(it->second)] += 1.0;
      }
    }
    offsets_.push_back(static_cast<int>(obs_columns_.size()));
  }
}

void BeliefExpander::expand(const Eigen::Ref<const Eigen::VectorXd>& b, Expansion& out) const {
  const JointPomdp& p = *pomdp_;
  out.successors.resize(p.n_states, n_classes());
  out.prob.resize(n_classes());
  out.immediate = p.reward.transpose() * b;
  Eigen::VectorXd pred(p.n_states);
  for (int a = 0; a < p.n_actions; ++a) {
    pred.noalias() = p.transition[static_cast<std::size_t>(a)].transpose() * b;
    for (int c = class_begin(a); c < class_end(a); ++c) {
      out.successors.col(c) = pred.cwiseProduct(obs_columns_[static_cast<std::size_t>(c)]);
      out.prob(c) = out.successors.col(c).sum();
    }
  }
}

Eigen::VectorXd BeliefExpander::lower_q(const Expansion& e, const AlphaSet& lower,
                                        std::vector<int>* best_alpha) const {
  const Eigen::MatrixXd g = lower.vectors().transpose() * e.successors;
  Eigen::VectorXd q = e.immediate;
  if (best_alpha) best_alpha->assign(static_cast<std::size_t>(n_classes()), 0);
  for (int a = 0; a < n_actions(); ++a) {
    double future = 0.0;
    for (int c = class_begin(a); c < class_end(a); ++c) {
      Eigen::Index idx = 0;
      const double v = g.col(c).maxCoeff(&idx);
      if (best_alpha) (*best_alpha)[static_cast<std::size_t>(c)] = static_cast<int>(idx);
      if (e.prob(c) > 0.0) future += multiplicity(c) * v;
    }
    q(a) += gamma() * future;
  }
  return q;
}

namespace {

using Clock = std::chrono::steady_clock;

int argmax_first(const Eigen::VectorXd& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return best;
}

class BeliefStore {
 public:
  int insert(const Eigen::VectorXd& b) {
    auto& bucket = index_[belief_key(b)];
    for (int i : bucket)
      if ((beliefs_[static_cast<std::size_t>(i)] - b).lpNorm<1>() <= 1e-9) return i;
    bucket.push_back(static_cast<int>(beliefs_.size()));
    beliefs_.push_back(b);
    return bucket.back();
  }
  const std::vector<Eigen::VectorXd>& all() const { return beliefs_; }

 private:
  std::vector<Eigen::VectorXd> beliefs_;
  std::unordered_map<std::size_t, std::vector<int>> index_;
};

class Search {
 public:
  Search(const JointPomdp& pomdp, const SolverOptions& opts)
      : pomdp_(pomdp), opts_(opts), ex_(pomdp), start_(Clock::now()) {}

  SolveResult run();

 private:
  struct ChildBounds {
    Eigen::VectorXd q_upper;
    Eigen::VectorXd child_upper;  // normalized values, per class
    Eigen::VectorXd child_lower;
  };

  void initialize();
  void upper_children(const BeliefExpander::Expansion& e, ChildBounds& out, bool with_lower);
  void backup(const Eigen::VectorXd& b);
  void trial();
  void prune();
  void record();
  double elapsed() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }
  bool out_of_budget() const {
    if (opts_.max_backups > 0 && result_.backups >= opts_.max_backups) return true;
    return elapsed() >= opts_.timeout_seconds;
  }

  const JointPomdp& pomdp_;
  SolverOptions opts_;
  BeliefExpander ex_;
  Clock::time_point start_;
  SolveResult result_;
  AlphaSet& lower() { return result_.bounds.lower; }
  SawtoothBound& upper() { return result_.bounds.upper; }
  BeliefStore sampled_;
  BeliefExpander::Expansion scratch_;
  std::vector<int> best_alpha_;
  int last_prune_size_ = 0;
  double last_trace_ = -1e300;
  double best_lower_b0_ = -std::numeric_limits<double>::infinity();
  double best_upper_b0_ = std::numeric_limits<double>::infinity();
};

void Search::initialize() {
  const int S = pomdp_.n_states;
  const double gamma = pomdp_.gamma;
  result_.bounds.lower = AlphaSet(S);
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(S, S);
  for (int a = 0; a < pomdp_.n_actions; ++a) {
    const Eigen::MatrixXd m = identity - gamma * pomdp_.transition[static_cast<std::size_t>(a)];
    lower().add(m.partialPivLu().solve(pomdp_.reward.col(a)), a);
  }

  Eigen::VectorXd v = Eigen::VectorXd::Zero(S);
  Eigen::VectorXd next(S);
  for (int it = 0; it < 100000; ++it) {
    next.setConstant(-std::numeric_limits<double>::infinity());
    for (int a = 0; a < pomdp_.n_actions; ++a)
      next = next.cwiseMax(pomdp_.reward.col(a) +
                           gamma * pomdp_.transition[static_cast<std::size_t>(a)] * v);
    const double delta = (next - v).cwiseAbs().maxCoeff();
    v = next;
    if (delta * gamma / (1.0 - gamma) < 1e-10) {
      v.array() += delta * gamma / (1.0 - gamma);
      break;
    }
  }
  // Fast informed bound, iterated down from the MDP values; every iterate is an upper bound.
  Eigen::MatrixXd q(S, pomdp_.n_actions);
  for (int a = 0; a < pomdp_.n_actions; ++a)
    q.col(a) = pomdp_.reward.col(a) + gamma * pomdp_.transition[static_cast<std::size_t>(a)] * v;
  std::vector<Eigen::MatrixXd> weighted;
  for (int a = 0; a < pomdp_.n_actions; ++a)
    for (int c = ex_.class_begin(a); c < ex_.class_end(a); ++c)
      weighted.push_back(ex_.multiplicity(c) * pomdp_.transition[static_cast<std::size_t>(a)] *
                         ex_.obs_column(c).asDiagonal());
  Eigen::MatrixXd q_next(S, pomdp_.n_actions);
  for (int it = 0; it < opts_.informed_bound_iterations; ++it) {
    for (int a = 0; a < pomdp_.n_actions; ++a) {
      Eigen::VectorXd future = Eigen::VectorXd::Zero(S);
      for (int c = ex_.class_begin(a); c < ex_.class_end(a); ++c)
        future += (weighted[static_cast<std::size_t>(c)] * q).rowwise().maxCoeff();
      q_next.col(a) = pomdp_.reward.col(a) + gamma * future;
    }
    q_next = q_next.cwiseMin(q);
    const double delta = (q - q_next).cwiseAbs().maxCoeff();
    q.swap(q_next);
    if (delta < 1e-9) break;
  }
  result_.bounds.upper = SawtoothBound(q.rowwise().maxCoeff(), q);
  last_prune_size_ = lower().size();
}

void Search::upper_children(const BeliefExpander::Expansion& e, ChildBounds& out, bool with_lower) {
  const int n_classes = ex_.n_classes();
  out.child_upper.setZero(n_classes);
  out.child_lower.setZero(n_classes);
  if (with_lower) {
    const Eigen::MatrixXd g = lower().vectors().transpose() * e.successors;
    for (int c = 0; c < n_classes; ++c)
      if (e.prob(c) > 0.0) out.child_lower(c) = g.col(c).maxCoeff() / e.prob(c);
  }
  out.q_upper = e.immediate;
  Eigen::VectorXd normalized(pomdp_.n_states);
  for (int a = 0; a < ex_.n_actions(); ++a) {
    double future = 0.0;
    for (int c = ex_.class_begin(a); c < ex_.class_end(a); ++c) {
      const double p = e.prob(c);
      if (p <= 0.0) continue;
      normalized = e.successors.col(c) / p;
      out.child_upper(c) = upper().value(normalized);
      future += ex_.multiplicity(c) * p * out.child_upper(c);
    }
    out.q_upper(a) += pomdp_.gamma * future;
  }
}

void Search::backup(const Eigen::VectorXd& b) {
  sampled_.insert(b);
  ex_.expand(b, scratch_);
  const Eigen::VectorXd q_low = ex_.lower_q(scratch_, lower(), &best_alpha_);
  const int a = argmax_first(q_low);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(pomdp_.n_states);
  for (int c = ex_.class_begin(a); c < ex_.class_end(a); ++c)
    acc += ex_.multiplicity(c) *
           ex_.obs_column(c).cwiseProduct(lower().vector(best_alpha_[static_cast<std::size_t>(c)]));
  Eigen::VectorXd alpha =
      pomdp_.reward.col(a) + pomdp_.gamma * (pomdp_.transition[static_cast<std::size_t>(a)] * acc);
  if (alpha.dot(b) > lower().value(b) + 1e-12) lower().add(alpha, a);

  ChildBounds cb;
  upper_children(scratch_, cb, false);
  upper().update(b, cb.q_upper.maxCoeff());
  ++result_.backups;

  const double crossing = lower().value(b) - upper().value(b);
  result_.max_bound_crossing = std::max(result_.max_bound_crossing, crossing);
}

void Search::trial() {
  std::vector<Eigen::VectorXd> path;
  Eigen::VectorXd b = pomdp_.b0;
  const double eps = opts_.precision;
  ChildBounds cb;
  for (int depth = 0;; ++depth) {
    path.push_back(b);
    if (depth >= opts_.max_depth) break;
    const double gap = upper().value(b) - lower().value(b);
    if (gap <= eps * std::pow(pomdp_.gamma, -depth)) break;
    ex_.expand(b, scratch_);
    upper_children(scratch_, cb, true);
    const int a = argmax_first(cb.q_upper);
    const double threshold = eps * std::pow(pomdp_.gamma, -(depth + 1));
    int best_c = -1;
    double best_score = 0.0;
    for (int c = ex_.class_begin(a); c < ex_.class_end(a); ++c) {
      const double p = scratch_.prob(c);
      if (p <= 0.0) continue;
      const double score = ex_.multiplicity(c) * p * (cb.child_upper(c) - cb.child_lower(c) - threshold);
      if (best_c < 0 || score > best_score) {
        best_c = c;
        best_score = score;
      }
    }
    if (best_c < 0 || best_score <= 0.0) break;
    b = scratch_.successors.col(best_c) / scratch_.prob(best_c);
  }
  for (auto it = path.rbegin(); it != path.rend(); ++it) backup(*it);
  ++result_.trials;
}

void Search::prune() {
  const int n = lower().size();
  std::vector<bool> keep(static_cast<std::size_t>(n), false);
  const auto& beliefs = sampled_.all();
  Eigen::MatrixXd bm(pomdp_.n_states, static_cast<Eigen::Index>(beliefs.size()));
  for (std::size_t i = 0; i < beliefs.size(); ++i) bm.col(static_cast<Eigen::Index>(i)) = beliefs[i];
  const Eigen::MatrixXd values = lower().vectors().transpose() * bm;
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    Eigen::Index idx = 0;
    values.col(j).maxCoeff(&idx);
    keep[static_cast<std::size_t>(idx)] = true;
  }
  if (opts_.audit_pruning) {
    Eigen::VectorXd survivor =
        Eigen::VectorXd::Constant(values.cols(), -std::numeric_limits<double>::infinity());
    for (int k = 0; k < n; ++k)
      if (keep[static_cast<std::size_t>(k)]) survivor = survivor.cwiseMax(values.row(k).transpose());
    for (int i = 0; i < n; ++i) {
      if (keep[static_cast<std::size_t>(i)]) continue;
      if ((values.row(i).transpose() - survivor).maxCoeff() > 1e-9) ++result_.prune_violations;
    }
  }
  lower().retain(keep);
  last_prune_size_ = lower().size();
  upper().prune();
}

void Search::record() {
  TracePoint p;
  p.seconds = elapsed();
  p.lower = best_lower_b0_;
  p.upper = best_upper_b0_;
  p.alpha_count = lower().size();
  result_.trace.push_back(p);
  last_trace_ = p.seconds;
}

SolveResult Search::run() {
  if (!(opts_.precision > 0.0)) throw std::invalid_argument("solve: precision must be positive");
  pomdp_.validate();
  if (!(pomdp_.gamma < 1.0)) throw std::invalid_argument("solve: discount must be below 1");
  initialize();
  auto refresh = [&] {
    best_lower_b0_ = std::max(best_lower_b0_, lower().value(pomdp_.b0));
    best_upper_b0_ = std::min(best_upper_b0_, upper().value(pomdp_.b0));
  };
  refresh();
  record();
  while (true) {
    if (best_upper_b0_ - best_lower_b0_ <= opts_.precision) {
      result_.status = SolveStatus::Converged;
      break;
    }
    if (out_of_budget()) break;
    trial();
    bool traced = false;
    if (lower().size() > std::max(64, last_prune_size_ + last_prune_size_ / 2)) {
      prune();
      refresh();
      record();
      traced = true;
    }
    refresh();
    if (!traced && elapsed() - last_trace_ >= opts_.trace_interval) record();
  }
  refresh();
  record();
  result_.bounds.lower_at_b0 = best_lower_b0_;
  result_.bounds.upper_at_b0 = best_upper_b0_;
  result_.seconds = elapsed();
  result_.sampled_beliefs = static_cast<int>(sampled_.all().size());
  return result_;
}

}  // namespace

SolveResult solve(const JointPomdp& pomdp, const SolverOptions& options) {
  Search search(pomdp, options);
  return search.run();
}

SolveResult solve(const JointPomdp& pomdp, double precision, double timeout_seconds) {
  SolverOptions opts;
  opts.precision = precision;
  opts.timeout_seconds = timeout_seconds;
  return solve(pomdp, opts);
}

int greedy_action(const AlphaSet& lower, const Eigen::Ref<const Eigen::VectorXd>& b) {
  if (lower.empty()) throw std::invalid_argument("greedy_policy: empty alpha set");
  const Eigen::VectorXd values = lower.vectors().transpose() * b;
  const double best = values.maxCoeff();
  int action = -1;
  for (int i = 0; i < values.size(); ++i)
    if (values(i) == best && (action < 0 || lower.action(i) < action)) action = lower.action(i);
  return action;
}

int greedy_policy(const BoundPair& bounds, const Eigen::Ref<const Eigen::VectorXd>& b) {
  return greedy_action(bounds.lower, b);
}

LookaheadPlanner::LookaheadPlanner(const JointPomdp& pomdp, const AlphaSet& lower)
    : expander_(pomdp), lower_(&lower) {
  if (lower.empty()) throw std::invalid_argument("lookahead_policy: empty alpha set");
}

Eigen::VectorXd LookaheadPlanner::q_values(const Eigen::Ref<const Eigen::VectorXd>& b) const {
  expander_.expand(b, scratch_);
  return expander_.lower_q(scratch_, *lower_);
}

int LookaheadPlanner::act(const Eigen::Ref<const Eigen::VectorXd>& b) const {
  return argmax_first(q_values(b));
}

int lookahead_policy(const BoundPair& bounds, const JointPomdp& pomdp,
                     const Eigen::Ref<const Eigen::VectorXd>& b) {
  return LookaheadPlanner(pomdp, bounds.lower).act(b);
}

AlphaVectorPolicy::AlphaVectorPolicy(std::shared_ptr<const JointPomdp> pomdp,
                                     std::shared_ptr<const AlphaSet> lower, Mode mode)
    : pomdp_(std::move(pomdp)), lower_(std::move(lower)), mode_(mode) {
  if (mode_ == Mode::Lookahead) planner_ = std::make_unique<LookaheadPlanner>(*pomdp_, *lower_);
}

int AlphaVectorPolicy::decide(const Belief& belief) {
  std::size_t key = 1469598103934665603ull;
  for (Eigen::Index i = 0; i < belief.size(); ++i) {
    std::uint64_t bits;
    const double v = belief.data()[i];
    std::memcpy(&bits, &v, sizeof bits);
    key ^= bits;
    key *= 1099511628211ull;
  }
  auto& bucket = cache_[key];
  for (const auto& [b, a] : bucket)
    if (b.cols() == belief.cols() && b == belief) return a;
  const Eigen::VectorXd joint = joint_belief(belief);
  const int a = mode_ == Mode::Greedy ? greedy_action(*lower_, joint) : planner_->act(joint);
  if (cache_.size() < 2000000) bucket.emplace_back(belief, a);
  return a;
}

void AlphaVectorPolicy::act(std::span<const Belief> beliefs, int, std::span<RandomEngine>,
                            std::span<JointAction> out) {
  for (std::size_t i = 0; i < beliefs.size(); ++i)
    out[i] = decode_joint_action(decide(beliefs[i]), static_cast<int>(beliefs[i].cols()));
}

std::string to_string(SolveStatus status) {
  return status == SolveStatus::Converged ? "converged" : "non-convergence";
}

}  // namespace kofn
