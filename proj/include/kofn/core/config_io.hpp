#pragma once

#include "kofn/core/model.hpp"

#include <boost/property_tree/ptree.hpp>

#include <iosfwd>
#include <string>

namespace kofn {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// System configuration, INI syntax.
///
///   [system]
///   n = 4
///   k = 3
///   variant = base            ; base | no-mob | low-kappa | custom
///   gamma = 0.8
///   risk_mode = next-state    ; next-state | current-state
///   b0 = 0.6 0.4 0
///
/// With variant = custom the section also carries c_mob and kappa, and every
/// component has a [component.<m>] section (1-based) with the 9-entry
/// row-major matrices t_nominal, t_repair_effect, o_inspect and the scalars
/// cost_repair, cost_inspect.
boost::property_tree::ptree system_to_ptree(const SystemModel& model);
SystemModel system_from_ptree(const boost::property_tree::ptree& tree);

void write_system_config(std::ostream& out, const SystemModel& model);
SystemModel read_system_config(std::istream& in);
SystemModel load_system_config(const std::string& path);

std::string system_config_text(const SystemModel& model);

}  // namespace kofn
