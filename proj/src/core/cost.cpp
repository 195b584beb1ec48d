#include "kofn/core/cost.hpp"

#include <array>
#include <cmath>

namespace kofn {

double kofn_failure_prob(std::span<const double> fail_probs, int k) {
  const int n = static_cast<int>(fail_probs.size());
  if (k <= 0) return 0.0;
  if (k > n) return 1.0;
  // functional[j] = P(exactly j of the components seen so far are functional)
  std::array<double, 64> functional{};
  if (n + 1 > static_cast<int>(functional.size()))
    throw ModelError("kofn_failure_prob supports at most 63 components");
  functional[0] = 1.0;
  for (int m = 0; m < n; ++m) {
    const double q = fail_probs[static_cast<std::size_t>(m)];
    for (int j = m + 1; j >= 1; --j) functional[j] = functional[j] * q + functional[j - 1] * (1.0 - q);
    functional[0] *= q;
  }
  double p = 0.0;
  for (int j = 0; j < k; ++j) p += functional[j];
  return p;
}

double system_failure_prob(std::span<const int> states, std::span<const ComponentAction> actions,
                           const SystemModel& model) {
  const int n = model.n();
  if (model.risk_mode == RiskMode::CurrentStateIndicator) {
    int functional = 0;
    for (int m = 0; m < n; ++m) functional += states[m] != kFailed;
    return functional < model.k ? 1.0 : 0.0;
  }
  std::array<double, kMaxComponents> q{};
  for (int m = 0; m < n; ++m)
    q[m] = model.components[m].transition(actions[m])(states[m], kFailed);
  return kofn_failure_prob(std::span<const double>(q.data(), n), model.k);
}

double step_cost(std::span<const int> states, std::span<const ComponentAction> actions,
                 const SystemModel& model) {
  double cost = 0.0;
  bool mobilized = false;
  for (int m = 0; m < model.n(); ++m) {
    cost += model.components[m].action_cost(actions[m]);
    mobilized = mobilized || is_intervention(actions[m]);
  }
  if (mobilized) cost += model.c_mob;
  return cost + model.c_f * system_failure_prob(states, actions, model);
}

double discounted_return(std::span<const double> costs, double gamma) {
  double total = 0.0;
  double discount = 1.0;
  for (double c : costs) {
    total += discount * c;
    discount *= gamma;
  }
  return total;
}

}  // namespace kofn
