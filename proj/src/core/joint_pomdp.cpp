#include "kofn/core/joint_pomdp.hpp"

#include "kofn/core/belief.hpp"
#include "kofn/core/cost.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

namespace kofn {

int pow3(int n) {
  int p = 1;
  for (int i = 0; i < n; ++i) p *= 3;
  return p;
}

int encode_joint(std::span<const int> digits) {
  int index = 0;
  for (int d : digits) index = index * 3 + d;
  return index;
}

ComponentStates decode_joint(int index, int n) {
  ComponentStates digits(static_cast<std::size_t>(n));
  for (int m = n - 1; m >= 0; --m) {
    digits[m] = index % 3;
    index /= 3;
  }
  return digits;
}

int encode_joint_action(std::span<const ComponentAction> actions) {
  int index = 0;
  for (auto a : actions) index = index * 3 + static_cast<int>(a);
  return index;
}

JointAction decode_joint_action(int index, int n) {
  JointAction actions(static_cast<std::size_t>(n));
  for (int m = n - 1; m >= 0; --m) {
    actions[m] = static_cast<ComponentAction>(index % 3);
    index /= 3;
  }
  return actions;
}

void JointPomdp::validate(double tol) const {
  auto fail = [](const std::string& what) { throw ModelError("JointPomdp: " + what); };
  if (static_cast<int>(transition.size()) != n_actions ||
      static_cast<int>(observation.size()) != n_actions)
    fail("table count mismatch");
  for (int a = 0; a < n_actions; ++a) {
    if ((transition[a].rowwise().sum().array() - 1.0).abs().maxCoeff() > tol)
      fail("transition not row-stochastic");
    if ((observation[a].rowwise().sum().array() - 1.0).abs().maxCoeff() > tol)
      fail("observation not row-stochastic");
    if ((transition[a].array() < 0.0).any() || (observation[a].array() < 0.0).any())
      fail("negative probability");
  }
  if (!reward.allFinite()) fail("non-finite reward");
  if (std::abs(b0.sum() - 1.0) > tol) fail("b0 not normalized");
}

JointPomdp flatten_to_pomdp(const SystemModel& model) {
  model.validate();
  const int n = model.n();
  if (n > kMaxComponents) throw ModelError("flattening is limited to n <= 6");
  JointPomdp p;
  p.n_components = n;
  p.n_states = p.n_actions = p.n_obs = pow3(n);
  p.gamma = model.gamma;
  p.b0 = joint_belief(initial_belief(model));
  p.transition.assign(p.n_actions, Eigen::MatrixXd());
  p.observation.assign(p.n_actions, Eigen::MatrixXd());
  p.reward.resize(p.n_states, p.n_actions);

  std::vector<ComponentStates> states(p.n_states);
  for (int s = 0; s < p.n_states; ++s) states[s] = decode_joint(s, n);

  for (int a = 0; a < p.n_actions; ++a) {
    const JointAction actions = decode_joint_action(a, n);
    Eigen::MatrixXd& t = p.transition[a];
    Eigen::MatrixXd& o = p.observation[a];
    t.resize(p.n_states, p.n_states);
    o.resize(p.n_states, p.n_obs);
    for (int s = 0; s < p.n_states; ++s) {
      for (int s2 = 0; s2 < p.n_states; ++s2) {
        double pt = 1.0;
        double po = 1.0;
        for (int m = 0; m < n; ++m) {
          pt *= model.components[m].transition(actions[m])(states[s][m], states[s2][m]);
          po *= model.components[m].observation(actions[m])(states[s][m], states[s2][m]);
        }
        t(s, s2) = pt;
        // observation indices share the state encoding
        o(s, s2) = po;
      }
      p.reward(s, a) = -step_cost(std::span<const int>(states[s].data(), states[s].size()),
                                  std::span<const ComponentAction>(actions.data(), actions.size()),
                                  model);
    }
  }
  p.validate();
  return p;
}

void write_pomdp_text(std::ostream& out, const JointPomdp& pomdp) {
  out << std::setprecision(17);
  out << "# k-out-of-n joint POMDP, mixed-radix base-3 indices, component 1 most significant\n";
  out << "discount: " << pomdp.gamma << "\n";
  out << "values: reward\n";
  out << "states: " << pomdp.n_states << "\n";
  out << "actions: " << pomdp.n_actions << "\n";
  out << "observations: " << pomdp.n_obs << "\n";
  out << "start:";
  for (Eigen::Index s = 0; s < pomdp.b0.size(); ++s) out << ' ' << pomdp.b0(s);
  out << "\n\n";
  for (int a = 0; a < pomdp.n_actions; ++a) {
    out << "T: " << a << "\n";
    for (int s = 0; s < pomdp.n_states; ++s) {
      for (int s2 = 0; s2 < pomdp.n_states; ++s2) out << (s2 ? " " : "") << pomdp.transition[a](s, s2);
      out << "\n";
    }
    out << "\n";
  }
  for (int a = 0; a < pomdp.n_actions; ++a) {
    out << "O: " << a << "\n";
    for (int s = 0; s < pomdp.n_states; ++s) {
      for (int o = 0; o < pomdp.n_obs; ++o) out << (o ? " " : "") << pomdp.observation[a](s, o);
      out << "\n";
    }
    out << "\n";
  }
  for (int a = 0; a < pomdp.n_actions; ++a)
    for (int s = 0; s < pomdp.n_states; ++s)
      out << "R: " << a << " : " << s << " : * : * " << pomdp.reward(s, a) << "\n";
}

}  // namespace kofn
