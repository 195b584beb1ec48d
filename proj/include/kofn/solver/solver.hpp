#pragma once

#include "kofn/core/joint_pomdp.hpp"
#include "kofn/env/policy.hpp"
#include "kofn/solver/bounds.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <limits>
#include <memory>
#include <unordered_map>
#include <vector>

namespace kofn {

enum class SolveStatus { Converged, NonConvergence };

struct TracePoint {
  double seconds = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  int alpha_count = 0;
};

struct SolverOptions {
  double precision = 1e-2;
  double timeout_seconds = 3600.0;
  /// Deterministic work cap; 0 disables it.
  long max_backups = 0;
  int max_depth = 200;
  /// Sweeps of the informed upper-bound initialization.
  int informed_bound_iterations = 200;
  /// Seconds between trace points (a point is always written per prune and at exit).
  double trace_interval = 1.0;
  /// Re-checks every pruned vector against the surviving set at all sampled beliefs.
  bool audit_pruning = false;
};

struct SolveResult {
  BoundPair bounds;
  SolveStatus status = SolveStatus::NonConvergence;
  std::vector<TracePoint> trace;
  long backups = 0;
  long trials = 0;
  double seconds = 0.0;
  int sampled_beliefs = 0;
  /// Pruned vectors that were not dominated at some sampled belief (audit only).
  int prune_violations = 0;
  /// Largest lower - upper over backed-up beliefs.
  double max_bound_crossing = -std::numeric_limits<double>::infinity();
};

/// Successor-belief machinery for one POMDP. Observations with identical likelihood
/// columns under an action are merged into one class with a multiplicity.
class BeliefExpander {
 public:
  explicit BeliefExpander(const JointPomdp& pomdp);

  struct Expansion {
    /// Unnormalized successor beliefs, one column per (action, observation class).
    Eigen::MatrixXd successors;
    /// Probability of one observation of the class.
    Eigen::VectorXd prob;
    /// Expected immediate reward per action.
    Eigen::VectorXd immediate;
  };

  void expand(const Eigen::Ref<const Eigen::VectorXd>& b, Expansion& out) const;

  int n_actions() const { return pomdp_->n_actions; }
  int n_states() const { return pomdp_->n_states; }
  double gamma() const { return pomdp_->gamma; }
  int class_begin(int a) const { return offsets_[static_cast<std::size_t>(a)]; }
  int class_end(int a) const { return offsets_[static_cast<std::size_t>(a) + 1]; }
  int n_classes() const { return offsets_.back(); }
  double multiplicity(int c) const { return multiplicity_[static_cast<std::size_t>(c)]; }
  const Eigen::VectorXd& obs_column(int c) const { return obs_columns_[static_cast<std::size_t>(c)]; }
  const JointPomdp& pomdp() const { return *pomdp_; }

  /// Lower-bound Q values for every action: immediate + gamma * sum over classes.
  Eigen::VectorXd lower_q(const Expansion& e, const AlphaSet& lower,
                          std::vector<int>* best_alpha = nullptr) const;

 private:
  const JointPomdp* pomdp_;
  std::vector<int> offsets_;
  std::vector<Eigen::VectorXd> obs_columns_;
  std::vector<double> multiplicity_;
};

/// Point-based search from b0: gap-guided trials, alpha-vector backups on the lower
/// bound, sawtooth updates on the upper bound, pruning of unused vectors.
SolveResult solve(const JointPomdp& pomdp, const SolverOptions& options);
SolveResult solve(const JointPomdp& pomdp, double precision, double timeout_seconds);

/// Action label of the first maximizing vector (lowest index among ties).
int greedy_action(const AlphaSet& lower, const Eigen::Ref<const Eigen::VectorXd>& b);
int greedy_policy(const BoundPair& bounds, const Eigen::Ref<const Eigen::VectorXd>& b);

/// One-step look-ahead over the lower bound; lowest action index among ties.
int lookahead_policy(const BoundPair& bounds, const JointPomdp& pomdp,
                     const Eigen::Ref<const Eigen::VectorXd>& b);

class LookaheadPlanner {
 public:
  LookaheadPlanner(const JointPomdp& pomdp, const AlphaSet& lower);
  int act(const Eigen::Ref<const Eigen::VectorXd>& b) const;
  Eigen::VectorXd q_values(const Eigen::Ref<const Eigen::VectorXd>& b) const;

 private:
  BeliefExpander expander_;
  const AlphaSet* lower_;
  mutable BeliefExpander::Expansion scratch_;
};

/// Executes an alpha-vector policy on factored beliefs. Decisions are cached per
/// belief because rollouts revisit the same beliefs constantly.
class AlphaVectorPolicy final : public Policy {
 public:
  enum class Mode { Greedy, Lookahead };

  AlphaVectorPolicy(std::shared_ptr<const JointPomdp> pomdp, std::shared_ptr<const AlphaSet> lower,
                    Mode mode);

  std::string name() const override { return mode_ == Mode::Greedy ? "greedy" : "lookahead"; }
  void act(std::span<const Belief> beliefs, int t, std::span<RandomEngine> rngs,
           std::span<JointAction> out) override;

  int decide(const Belief& belief);

 private:
  std::shared_ptr<const JointPomdp> pomdp_;
  std::shared_ptr<const AlphaSet> lower_;
  Mode mode_;
  std::unique_ptr<LookaheadPlanner> planner_;
  std::unordered_map<std::size_t, std::vector<std::pair<Belief, int>>> cache_;
};

/// Policy file: a text header followed by a binary block with the vectors.
void write_policy_file(std::ostream& out, const AlphaSet& lower, const std::string& header_text);
AlphaSet read_policy_file(std::istream& in, std::string* header_text = nullptr);

void write_trace_csv(std::ostream& out, const std::vector<TracePoint>& trace);

std::string to_string(SolveStatus status);

}  // namespace kofn
