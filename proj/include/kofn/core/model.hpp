#pragma once

#include <Eigen/Dense>
#include <boost/container/static_vector.hpp>

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kofn {

/// Damage states of a single component.
inline constexpr int kNoDamage = 0;
inline constexpr int kMajorDamage = 1;
inline constexpr int kFailed = 2;

inline constexpr int kComponentStates = 3;
inline constexpr int kComponentActions = 3;
inline constexpr int kComponentObservations = 3;

/// Largest system the flattened (joint) representation accepts.
inline constexpr int kMaxComponents = 6;

enum class ComponentAction : int { DoNothing = 0, Repair = 1, Inspect = 2 };

using Matrix3 = Eigen::Matrix3d;
using Vector3 = Eigen::Vector3d;

using JointAction = boost::container::static_vector<ComponentAction, kMaxComponents>;
using ComponentStates = boost::container::static_vector<int, kMaxComponents>;
using Observations = boost::container::static_vector<int, kMaxComponents>;

/// Per-component beliefs, one column per component.
using Belief = Eigen::Matrix<double, 3, Eigen::Dynamic, Eigen::ColMajor, 3, kMaxComponents>;

class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Deterioration, repair and observation model of one component.
struct ComponentModel {
  Matrix3 t_nominal;        ///< do-nothing / inspect transition
  Matrix3 t_repair_effect;  ///< instantaneous effect of repair
  Matrix3 t_repair;         ///< t_repair_effect * t_nominal
  Matrix3 o_inspect;        ///< P(o | s') under inspection
  Matrix3 o_null;           ///< uninformative observation
  double cost_repair = 0.0;
  double cost_inspect = 0.0;

  static ComponentModel make(const Matrix3& t_nominal, const Matrix3& t_repair_effect,
                             const Matrix3& o_inspect, double cost_repair, double cost_inspect);

  const Matrix3& transition(ComponentAction a) const {
    return a == ComponentAction::Repair ? t_repair : t_nominal;
  }
  const Matrix3& observation(ComponentAction a) const {
    return a == ComponentAction::Inspect ? o_inspect : o_null;
  }
  double action_cost(ComponentAction a) const {
    switch (a) {
      case ComponentAction::Repair: return cost_repair;
      case ComponentAction::Inspect: return cost_inspect;
      default: return 0.0;
    }
  }

  void validate() const;
};

enum class RiskMode { NextStateClosedForm, CurrentStateIndicator };

enum class Variant { Base, NoMobilization, LowKappa, Custom };

struct SystemModel {
  std::vector<ComponentModel> components;
  int k = 1;
  double c_mob = 0.0;
  double kappa = 3.0;
  double c_f = 0.0;
  double gamma = 0.8;
  Vector3 b0 = Vector3(0.6, 0.4, 0.0);
  RiskMode risk_mode = RiskMode::NextStateClosedForm;
  Variant variant = Variant::Custom;

  int n() const { return static_cast<int>(components.size()); }
  void validate() const;
};

/// Assembles a system and derives c_f = kappa * sum of repair costs.
SystemModel make_system(std::vector<ComponentModel> components, int k, double c_mob, double kappa,
                        double gamma = 0.8, Vector3 b0 = Vector3(0.6, 0.4, 0.0),
                        RiskMode risk_mode = RiskMode::NextStateClosedForm);

/// The benchmark component m (0-based, m < 4).
ComponentModel reference_component(int m);

/// The k-out-of-n benchmark systems: the first n of the four benchmark components.
SystemModel build_reference_system(int n, int k, Variant variant);

/// Initial belief repeated over every component.
Belief initial_belief(const SystemModel& model);

std::string to_string(Variant v);
std::string to_string(RiskMode r);
std::string to_string(ComponentAction a);
Variant parse_variant(std::string_view s);
RiskMode parse_risk_mode(std::string_view s);

inline bool is_intervention(ComponentAction a) { return a != ComponentAction::DoNothing; }

}  // namespace kofn
