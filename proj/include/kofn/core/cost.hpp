#pragma once

#include "kofn/core/model.hpp"

#include <span>

namespace kofn {

/// P(fewer than k components functional) for independent components with the
/// given failure probabilities. Exact for any n via the count recursion.
double kofn_failure_prob(std::span<const double> fail_probs, int k);

/// System failure probability used by the risk term of the cost.
double system_failure_prob(std::span<const int> states, std::span<const ComponentAction> actions,
                           const SystemModel& model);

/// Immediate cost of a joint action in a joint state.
double step_cost(std::span<const int> states, std::span<const ComponentAction> actions,
                 const SystemModel& model);

/// Sum of gamma^t c_t.
double discounted_return(std::span<const double> costs, double gamma);

}  // namespace kofn
