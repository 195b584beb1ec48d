#include "kofn/core/model.hpp"

#include <array>
#include <cmath>
#include <numeric>

namespace kofn {
namespace {

constexpr double kRowTol = 1e-12;

void check_row_stochastic(const Matrix3& m, const char* what) {
  if ((m.array() < 0.0).any()) throw ModelError(std::string(what) + " has negative entries");
  for (int r = 0; r < 3; ++r) {
    if (std::abs(m.row(r).sum() - 1.0) > kRowTol)
      throw ModelError(std::string(what) + " row " + std::to_string(r) + " does not sum to 1");
  }
}

Matrix3 uniform3() { return Matrix3::Constant(1.0 / 3.0); }

struct ComponentData {
  std::array<double, 4> nominal;  // p(s1->s1), p(s1->s2), p(s2->s2), p(s2->s3)
  double repair_success;
  double inspect_accuracy;
  double failure_accuracy;
  double cost_repair;
  double cost_inspect;
};

// Component 2 and 4 share the deterioration matrix; component 4 repairs with certainty.
constexpr std::array<ComponentData, 4> kReferenceComponents{{
    {{0.82, 0.18, 0.87, 0.13}, 0.95, 0.80, 0.95, 50.0, 5.0},
    {{0.72, 0.28, 0.78, 0.22}, 0.90, 0.85, 0.90, 30.0, 3.0},
    {{0.79, 0.21, 0.85, 0.15}, 0.98, 0.90, 0.98, 80.0, 8.0},
    {{0.72, 0.28, 0.78, 0.22}, 1.00, 0.90, 1.00, 90.0, 4.0},
}};

}  // namespace

ComponentModel ComponentModel::make(const Matrix3& t_nominal, const Matrix3& t_repair_effect,
                                    const Matrix3& o_inspect, double cost_repair,
                                    double cost_inspect) {
  ComponentModel m;
  m.t_nominal = t_nominal;
  m.t_repair_effect = t_repair_effect;
  m.t_repair = t_repair_effect * t_nominal;
  m.o_inspect = o_inspect;
  m.o_null = uniform3();
  m.cost_repair = cost_repair;
  m.cost_inspect = cost_inspect;
  m.validate();
  return m;
}

void ComponentModel::validate() const {
  check_row_stochastic(t_nominal, "t_nominal");
  check_row_stochastic(t_repair_effect, "t_repair_effect");
  check_row_stochastic(t_repair, "t_repair");
  check_row_stochastic(o_inspect, "o_inspect");
  check_row_stochastic(o_null, "o_null");
  for (int r = 1; r < 3; ++r)
    for (int c = 0; c < r; ++c)
      if (t_nominal(r, c) != 0.0) throw ModelError("t_nominal must be upper-triangular");
  if (t_nominal(2, 2) != 1.0) throw ModelError("failure must be absorbing under t_nominal");
  if ((o_null.array() != o_null(0, 0)).any()) throw ModelError("o_null must be uniform");
  if (!(cost_repair >= 0.0) || !(cost_inspect >= 0.0))
    throw ModelError("component costs must be nonnegative");
}

void SystemModel::validate() const {
  if (components.empty() || n() > kMaxComponents)
    throw ModelError("number of components must be in [1, 6]");
  if (k < 1 || k > n()) throw ModelError("k must satisfy 1 <= k <= n");
  if (!(c_mob >= 0.0)) throw ModelError("c_mob must be nonnegative");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ModelError("gamma must lie in (0, 1)");
  if ((b0.array() < 0.0).any() || std::abs(b0.sum() - 1.0) > 1e-12)
    throw ModelError("b0 must lie on the probability simplex");
  double repair_sum = 0.0;
  for (const auto& c : components) {
    c.validate();
    repair_sum += c.cost_repair;
  }
  if (c_f != kappa * repair_sum) throw ModelError("c_f must equal kappa * sum of repair costs");
}

SystemModel make_system(std::vector<ComponentModel> components, int k, double c_mob, double kappa,
                        double gamma, Vector3 b0, RiskMode risk_mode) {
  SystemModel s;
  s.components = std::move(components);
  s.k = k;
  s.c_mob = c_mob;
  s.kappa = kappa;
  double repair_sum = 0.0;
  for (const auto& c : s.components) repair_sum += c.cost_repair;
  s.c_f = kappa * repair_sum;
  s.gamma = gamma;
  s.b0 = b0;
  s.risk_mode = risk_mode;
  s.validate();
  return s;
}

ComponentModel reference_component(int m) {
  if (m < 0 || m >= 4) throw ModelError("benchmark component index must be in [0, 4)");
  const auto& d = kReferenceComponents[static_cast<std::size_t>(m)];
  Matrix3 nominal;
  nominal << d.nominal[0], d.nominal[1], 0.0,
             0.0, d.nominal[2], d.nominal[3],
             0.0, 0.0, 1.0;
  const double p = d.repair_success;
  Matrix3 repair;
  repair << 1.0, 0.0, 0.0,
            p, 1.0 - p, 0.0,
            p, 0.0, 1.0 - p;
  const double acc = d.inspect_accuracy;
  const double fa = d.failure_accuracy;
  Matrix3 inspect;
  inspect << acc, 1.0 - acc, 0.0,
             (1.0 - acc) / 2.0, acc, (1.0 - acc) / 2.0,
             0.0, 1.0 - fa, fa;
  return ComponentModel::make(nominal, repair, inspect, d.cost_repair, d.cost_inspect);
}

SystemModel build_reference_system(int n, int k, Variant variant) {
  if (n < 2 || n > 4) throw ModelError("benchmark systems have n in {2, 3, 4}");
  if (k < 1 || k > n) throw ModelError("k must satisfy 1 <= k <= n");
  double c_mob = 0.0;
  double kappa = 3.0;
  switch (variant) {
    case Variant::Base:
      if (n != 4) throw ModelError("the base variant is defined for n = 4 only");
      c_mob = 4.0;
      break;
    case Variant::NoMobilization:
      break;
    case Variant::LowKappa:
      kappa = 1.5;
      break;
    case Variant::Custom:
      throw ModelError("custom systems are built with make_system");
  }
  std::vector<ComponentModel> comps;
  for (int m = 0; m < n; ++m) comps.push_back(reference_component(m));
  SystemModel s = make_system(std::move(comps), k, c_mob, kappa);
  s.variant = variant;
  return s;
}

Belief initial_belief(const SystemModel& model) {
  Belief b(3, model.n());
  for (int m = 0; m < model.n(); ++m) b.col(m) = model.b0;
  return b;
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Base: return "base";
    case Variant::NoMobilization: return "no-mob";
    case Variant::LowKappa: return "low-kappa";
    case Variant::Custom: return "custom";
  }
  return "custom";
}

std::string to_string(RiskMode r) {
  return r == RiskMode::NextStateClosedForm ? "next-state" : "current-state";
}

std::string to_string(ComponentAction a) {
  switch (a) {
    case ComponentAction::DoNothing: return "do-nothing";
    case ComponentAction::Repair: return "repair";
    case ComponentAction::Inspect: return "inspect";
  }
  return "?";
}

Variant parse_variant(std::string_view s) {
  if (s == "base") return Variant::Base;
  if (s == "no-mob" || s == "nomob" || s == "no-mobilization") return Variant::NoMobilization;
  if (s == "low-kappa" || s == "lowkappa") return Variant::LowKappa;
  if (s == "custom") return Variant::Custom;
  throw ModelError("unknown variant '" + std::string(s) + "'");
}

RiskMode parse_risk_mode(std::string_view s) {
  if (s == "next-state") return RiskMode::NextStateClosedForm;
  if (s == "current-state") return RiskMode::CurrentStateIndicator;
  throw ModelError("unknown risk mode '" + std::string(s) + "'");
}

}  // namespace kofn
