#pragma once

#include "kofn/marl/trainer.hpp"

#include <Eigen/Dense>

#include <array>
#include <ostream>
#include <string>
#include <vector>

namespace kofn::analysis {

/// Local actions of the two-component game: 0 = do nothing, 1 = repair.
inline constexpr int kDN = 0;
inline constexpr int kRep = 1;
std::string game_action_name(int a);

/// Two-agent single-step game; reward(a1, a2).
struct MatrixGame2x2 {
  std::string name = "custom";
  Eigen::Matrix2d reward = Eigen::Matrix2d::Zero();

  static MatrixGame2x2 parallel(double c1, double c2, double c_f);
  static MatrixGame2x2 series(double c1, double c2, double c_f);
  /// Failure cost kappa * (c1 + c2).
  static MatrixGame2x2 parallel_kappa(double c1, double c2, double kappa) { return parallel(c1, c2, kappa * (c1 + c2)); }
  static MatrixGame2x2 series_kappa(double c1, double c2, double kappa) { return series(c1, c2, kappa * (c1 + c2)); }

  /// Maximizing joint action (first in (a1, a2) row-major order among ties) and whether it is unique.
  std::array<int, 2> optimum() const;
  bool unique_optimum() const;
};

/// Additive fit Q1(a1) + Q2(a2) of the reward table under uniform weights.
struct VdnDecomposition {
  std::array<double, 2> gap{};  ///< Q_m(DN) - Q_m(Rep)
  std::array<int, 2> greedy{};  ///< per-agent argmax, DN on ties
  Eigen::Vector2d q1 = Eigen::Vector2d::Zero(), q2 = Eigen::Vector2d::Zero();  ///< minimum-norm utilities
  Eigen::Matrix2d fitted = Eigen::Matrix2d::Zero();
  double residual = 0.0;  ///< sum of squared errors
};

/// Closed-form least-squares gaps (half the row / column contrast).
VdnDecomposition vdn_closed_form(const MatrixGame2x2& game);
/// Same fit by a minimum-norm least-squares solve of the 4x4 design system.
VdnDecomposition vdn_least_squares(const MatrixGame2x2& game);

enum class Representability { Representable, NotRepresentable };
std::string to_string(Representability r);

/// Best monotone fit for one pair of strict per-agent preferences (p1, p2): the fitted table
/// must satisfy Q(p1,b) >= Q(!p1,b) and Q(a,p2) >= Q(a,!p2), so its greedy action is (p1, p2).
struct OrderingFit {
  std::array<int, 2> preferred{};
  Eigen::Matrix2d fitted = Eigen::Matrix2d::Zero();
  double residual = 0.0;
  /// Reward comparisons forced by the ordering that the true table contradicts, as cell pairs.
  std::vector<std::array<std::array<int, 2>, 2>> violations;
};

struct QmixVerdict {
  Representability verdict = Representability::NotRepresentable;
  std::array<int, 2> optimum{};
  std::array<OrderingFit, 4> fits;  ///< every (p1, p2)
  int best = 0;                     ///< fit with the smallest residual (first among ties)
};

/// Monotone factorization represents the game when the ordering of the optimal joint action
/// fits the table at least as well as any other ordering (exhaustive over the 4 orderings).
QmixVerdict qmix_representability(const MatrixGame2x2& game);

/// Least-squares fit of the table subject to the order constraints of (p1, p2).
OrderingFit monotone_fit(const MatrixGame2x2& game, std::array<int, 2> preferred);

/// Joint values a trained VDN-PS/QMIX-PS agent assigns to the Climb Game cells.
struct ClimbDecomposition {
  marl::Algorithm algorithm = marl::Algorithm::VDN_PS;
  Eigen::Matrix3d q_tot = Eigen::Matrix3d::Zero();  ///< (a1, a2)
  Eigen::Matrix3d payoff = Eigen::Matrix3d::Zero();
  std::array<Eigen::Vector3d, 2> utilities;
  std::array<int, 2> greedy{};
  double max_abs_error = 0.0;
  /// QMIX only: cells x agents where raising the utility by 1 lowered Q_tot.
  int monotonicity_violations = 0;
};

ClimbDecomposition climb_decomposition_report(const marl::AgentNetworks& nets);

/// Aligned text tables: reward table and fitted values.
void render_game_report(std::ostream& out, const MatrixGame2x2& game, const VdnDecomposition& vdn,
                        const QmixVerdict& qmix);
void render_climb_report(std::ostream& out, const ClimbDecomposition& d);
/// CSV: a1, a2, q_tot, payoff, greedy
void write_climb_csv(std::ostream& out, const ClimbDecomposition& d);

}  // namespace kofn::analysis
