#include "kofn/analysis/factorization.hpp"

#include "kofn/env/climb_game.hpp"
#include "kofn/marl/learn.hpp"
#include "kofn/util/csv.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace kofn::analysis {

std::string game_action_name(int a) { return a == kDN ? "DN" : "Rep"; }

MatrixGame2x2 MatrixGame2x2::parallel(double c1, double c2, double c_f) {
  MatrixGame2x2 g;
  g.name = "parallel";
  g.reward << -c_f, -c2, -c1, -(c1 + c2);
  return g;
}

MatrixGame2x2 MatrixGame2x2::series(double c1, double c2, double c_f) {
  MatrixGame2x2 g;
  g.name = "series";
  g.reward << -c_f, -(c_f + c2), -(c_f + c1), -(c1 + c2);
  return g;
}

std::array<int, 2> MatrixGame2x2::optimum() const {
  std::array<int, 2> best{0, 0};
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      if (reward(a, b) > reward(best[0], best[1])) best = {a, b};
  return best;
}

bool MatrixGame2x2::unique_optimum() const {
  const auto o = optimum();
  int count = 0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) count += reward(a, b) == reward(o[0], o[1]);
  return count == 1;
}

namespace {

void finish(VdnDecomposition& d, const Eigen::Matrix2d& r) {
  d.gap = {d.q1(0) - d.q1(1), d.q2(0) - d.q2(1)};
  d.greedy = {d.gap[0] >= 0.0 ? kDN : kRep, d.gap[1] >= 0.0 ? kDN : kRep};
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) d.fitted(a, b) = d.q1(a) + d.q2(b);
  d.residual = (d.fitted - r).squaredNorm();
}

}  // namespace

VdnDecomposition vdn_closed_form(const MatrixGame2x2& game) {
  const Eigen::Matrix2d& r = game.reward;
  VdnDecomposition d;
  const double g1 = 0.5 * (r(0, 0) + r(0, 1) - r(1, 0) - r(1, 1));
  const double g2 = 0.5 * (r(0, 0) + r(1, 0) - r(0, 1) - r(1, 1));
  // Minimum-norm representative: both agents share the mean equally.
  const double level = r.mean() / 2.0;
  d.q1 << level + g1 / 2, level - g1 / 2;
  d.q2 << level + g2 / 2, level - g2 / 2;
  finish(d, r);
  return d;
}

VdnDecomposition vdn_least_squares(const MatrixGame2x2& game) {
  Eigen::Matrix4d design = Eigen::Matrix4d::Zero();
  Eigen::Vector4d target;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const int row = 2 * a + b;
      design(row, a) = 1.0;
      design(row, 2 + b) = 1.0;
      target(row) = game.reward(a, b);
    }
  const Eigen::Vector4d x = design.completeOrthogonalDecomposition().solve(target);
  VdnDecomposition d;
  d.q1 = x.head<2>();
  d.q2 = x.tail<2>();
  finish(d, game.reward);
  return d;
}

std::string to_string(Representability r) {
  return r == Representability::Representable ? "Representable" : "NotRepresentable";
}

OrderingFit monotone_fit(const MatrixGame2x2& game, std::array<int, 2> preferred) {
  const int p1 = preferred[0], p2 = preferred[1];
  auto idx = [](int a, int b) { return 2 * a + b; };
  // Pairs (hi, lo): hi must be >= lo.
  const std::array<std::array<int, 2>, 4> order{{{idx(p1, p2), idx(1 - p1, p2)},
                                                 {idx(p1, p2), idx(p1, 1 - p2)},
                                                 {idx(p1, 1 - p2), idx(1 - p1, 1 - p2)},
                                                 {idx(1 - p1, p2), idx(1 - p1, 1 - p2)}}};
  std::array<double, 4> r{};
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) r[static_cast<std::size_t>(idx(a, b))] = game.reward(a, b);

  OrderingFit fit;
  fit.preferred = preferred;
  fit.residual = std::numeric_limits<double>::infinity();
  // The constrained optimum pools the cells joined by some set of active constraints.
  for (int active = 0; active < 16; ++active) {
    std::array<int, 4> parent{0, 1, 2, 3};
    auto find = [&](int x) {
      while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)];
      return x;
    };
    for (int c = 0; c < 4; ++c)
      if (active >> c & 1) parent[static_cast<std::size_t>(find(order[static_cast<std::size_t>(c)][0]))] =
          find(order[static_cast<std::size_t>(c)][1]);
    std::array<double, 4> sum{}, count{}, value{};
    for (int i = 0; i < 4; ++i) {
      sum[static_cast<std::size_t>(find(i))] += r[static_cast<std::size_t>(i)];
      count[static_cast<std::size_t>(find(i))] += 1.0;
    }
    for (int i = 0; i < 4; ++i) value[static_cast<std::size_t>(i)] = sum[static_cast<std::size_t>(find(i))] / count[static_cast<std::size_t>(find(i))];
    bool feasible = true;
    for (const auto& pr : order)
      feasible = feasible && value[static_cast<std::size_t>(pr[0])] >= value[static_cast<std::size_t>(pr[1])] - 1e-12;
    if (!feasible) continue;
    double sse = 0.0;
    for (int i = 0; i < 4; ++i) sse += std::pow(value[static_cast<std::size_t>(i)] - r[static_cast<std::size_t>(i)], 2);
    if (sse < fit.residual - 1e-12) {
      fit.residual = sse;
      for (int i = 0; i < 4; ++i) fit.fitted(i / 2, i % 2) = value[static_cast<std::size_t>(i)];
    }
  }
  for (const auto& pr : order)
    if (r[static_cast<std::size_t>(pr[0])] < r[static_cast<std::size_t>(pr[1])])
      fit.violations.push_back({{{pr[0] / 2, pr[0] % 2}, {pr[1] / 2, pr[1] % 2}}});
  return fit;
}

QmixVerdict qmix_representability(const MatrixGame2x2& game) {
  QmixVerdict v;
  v.optimum = game.optimum();
  for (int k = 0; k < 4; ++k) {
    v.fits[static_cast<std::size_t>(k)] = monotone_fit(game, {k / 2, k % 2});
    if (v.fits[static_cast<std::size_t>(k)].residual < v.fits[static_cast<std::size_t>(v.best)].residual - 1e-9) v.best = k;
  }
  const OrderingFit& at_opt = v.fits[static_cast<std::size_t>(2 * v.optimum[0] + v.optimum[1])];
  const bool fits_best = at_opt.residual <= v.fits[static_cast<std::size_t>(v.best)].residual + 1e-9;
  v.verdict = game.unique_optimum() && fits_best ? Representability::Representable : Representability::NotRepresentable;
  return v;
}

ClimbDecomposition climb_decomposition_report(const marl::AgentNetworks& nets) {
  const marl::Algorithm alg = nets.algorithm();
  if (alg != marl::Algorithm::VDN_PS && alg != marl::Algorithm::QMIX_PS)
    throw std::invalid_argument("climb_decomposition_report: needs VDN-PS or QMIX-PS networks");
  if (nets.n_agents() != 2 || nets.n_actions() != 3 || nets.local_dim() != 3)
    throw std::invalid_argument("climb_decomposition_report: networks are not Climb Game networks");
  ClimbDecomposition d;
  d.algorithm = alg;
  marl::ClimbMarlEnv env;
  env.reset(0);
  Eigen::MatrixXd local(3, 2);
  Eigen::VectorXd s(1);
  env.local_input(0, local.col(0));
  env.local_input(1, local.col(1));
  env.global_input(s);
  const Eigen::MatrixXd u = nets.utilities(local);
  d.utilities = {u.col(0), u.col(1)};
  d.greedy = {marl::argmax_first(u.col(0)), marl::argmax_first(u.col(1))};
  auto q_tot = [&](double u1, double u2) {
    if (alg == marl::Algorithm::VDN_PS) return u1 + u2;
    Eigen::MatrixXd q(2, 1);
    q << u1, u2;
    return nets.mixer.forward(q, s)(0);
  };
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      d.q_tot(a, b) = q_tot(u(a, 0), u(b, 1));
      d.payoff(a, b) = climb_step(a, b);
      if (alg == marl::Algorithm::QMIX_PS) {
        d.monotonicity_violations += q_tot(u(a, 0) + 1.0, u(b, 1)) < d.q_tot(a, b) - 1e-12;
        d.monotonicity_violations += q_tot(u(a, 0), u(b, 1) + 1.0) < d.q_tot(a, b) - 1e-12;
      }
    }
  d.max_abs_error = (d.q_tot - d.payoff).cwiseAbs().maxCoeff();
  return d;
}

namespace {

void table2(std::ostream& out, const Eigen::Matrix2d& m, const std::string& title) {
  out << title << '\n' << std::setw(8) << "";
  for (int b = 0; b < 2; ++b) out << std::setw(10) << game_action_name(b);
  out << '\n';
  for (int a = 0; a < 2; ++a) {
    out << std::setw(8) << game_action_name(a);
    for (int b = 0; b < 2; ++b) out << std::setw(10) << format_fixed(m(a, b), 2);
    out << '\n';
  }
}

}  // namespace

void render_game_report(std::ostream& out, const MatrixGame2x2& game, const VdnDecomposition& vdn,
                        const QmixVerdict& qmix) {
  const auto opt = game.optimum();
  table2(out, game.reward, game.name + " game rewards (rows agent 1, columns agent 2)");
  out << "optimum: (" << game_action_name(opt[0]) << ", " << game_action_name(opt[1]) << ")\n\n";
  table2(out, vdn.fitted, "VDN least-squares fit");
  out << "gaps Q(DN)-Q(Rep): (" << format_fixed(vdn.gap[0], 4) << ", " << format_fixed(vdn.gap[1], 4)
      << ")  greedy: (" << game_action_name(vdn.greedy[0]) << ", " << game_action_name(vdn.greedy[1]) << ")"
      << (vdn.greedy == opt ? "" : "  SUBOPTIMAL") << "\n\n";
  const OrderingFit& best = qmix.fits[static_cast<std::size_t>(qmix.best)];
  table2(out, best.fitted, "best monotone fit");
  out << "monotone greedy: (" << game_action_name(best.preferred[0]) << ", "
      << game_action_name(best.preferred[1]) << ")  verdict: " << to_string(qmix.verdict) << '\n';
  for (const OrderingFit& f : qmix.fits) {
    out << "  ordering (" << game_action_name(f.preferred[0]) << ", " << game_action_name(f.preferred[1])
        << "): residual " << format_fixed(f.residual, 2) << ", contradicted pairs " << f.violations.size() << '\n';
  }
}

void render_climb_report(std::ostream& out, const ClimbDecomposition& d) {
  out << marl::to_string(d.algorithm) << " joint values (rows agent 1, columns agent 2; * greedy)\n";
  out << std::setw(6) << "";
  for (int b = 0; b < 3; ++b) out << std::setw(10) << ("a" + std::to_string(b + 1)) << std::setw(9) << "";
  out << "  Q1\n";
  for (int a = 0; a < 3; ++a) {
    out << std::setw(6) << ("a" + std::to_string(a + 1));
    for (int b = 0; b < 3; ++b) {
      const bool g = d.greedy[0] == a && d.greedy[1] == b;
      out << std::setw(10) << format_fixed(d.q_tot(a, b), 2) << (g ? "*" : " ") << std::setw(8)
          << ("(" + format_fixed(d.payoff(a, b), 0) + ")");
    }
    out << "  " << format_fixed(d.utilities[0](a), 2) << '\n';
  }
  out << std::setw(6) << "Q2";
  for (int b = 0; b < 3; ++b) out << std::setw(10) << format_fixed(d.utilities[1](b), 2) << std::setw(9) << "";
  out << "\nmax |Q_tot - payoff| = " << format_fixed(d.max_abs_error, 3);
  if (d.algorithm == marl::Algorithm::QMIX_PS) out << ", monotonicity violations " << d.monotonicity_violations;
  out << '\n';
}

void write_climb_csv(std::ostream& out, const ClimbDecomposition& d) {
  CsvWriter w(out);
  w.row({"algorithm", "a1", "a2", "q_tot", "payoff", "greedy"});
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      w.row({marl::to_string(d.algorithm), std::to_string(a + 1), std::to_string(b + 1), format_number(d.q_tot(a, b)),
             format_number(d.payoff(a, b)), d.greedy[0] == a && d.greedy[1] == b ? "1" : "0"});
}

}  // namespace kofn::analysis
