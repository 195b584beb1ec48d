#include "kofn/core/config_io.hpp"

#include <boost/property_tree/ini_parser.hpp>

#include <fstream>
#include <iomanip>
#include <sstream>

namespace kofn {
namespace pt = boost::property_tree;
namespace {

std::string join_numbers(const double* data, int count) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (int i = 0; i < count; ++i) os << (i ? " " : "") << data[i];
  return os.str();
}

std::vector<double> split_numbers(const std::string& text, std::size_t expected, const std::string& key) {
  std::istringstream is(text);
  std::vector<double> values;
  double v = 0.0;
  while (is >> v) values.push_back(v);
  if (!is.eof() || values.size() != expected)
    throw ConfigError("key '" + key + "' needs " + std::to_string(expected) + " numbers");
  return values;
}

std::string matrix_text(const Matrix3& m) {
  const Eigen::Matrix<double, 3, 3, Eigen::RowMajor> row_major = m;
  return join_numbers(row_major.data(), 9);
}

Matrix3 matrix_from(const pt::ptree& section, const std::string& key) {
  const auto text = section.get_optional<std::string>(key);
  if (!text) throw ConfigError("missing key '" + key + "'");
  const auto v = split_numbers(*text, 9, key);
  Matrix3 m;
  m << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
  return m;
}

template <typename T>
T required(const pt::ptree& tree, const std::string& key) {
  const auto value = tree.get_optional<T>(key);
  if (!value) throw ConfigError("missing key '" + key + "'");
  return *value;
}

}  // namespace

pt::ptree system_to_ptree(const SystemModel& model) {
  pt::ptree tree;
  pt::ptree& sys = tree.put_child("system", pt::ptree());
  sys.put("n", model.n());
  sys.put("k", model.k);
  sys.put("variant", to_string(model.variant));
  sys.put("gamma", join_numbers(&model.gamma, 1));
  sys.put("risk_mode", to_string(model.risk_mode));
  sys.put("b0", join_numbers(model.b0.data(), 3));
  if (model.variant == Variant::Custom) {
    sys.put("c_mob", join_numbers(&model.c_mob, 1));
    sys.put("kappa", join_numbers(&model.kappa, 1));
    for (int m = 0; m < model.n(); ++m) {
      const auto& c = model.components[m];
      pt::ptree& sec = tree.put_child(pt::ptree::path_type("component." + std::to_string(m + 1), '/'), pt::ptree());
      sec.put("t_nominal", matrix_text(c.t_nominal));
      sec.put("t_repair_effect", matrix_text(c.t_repair_effect));
      sec.put("o_inspect", matrix_text(c.o_inspect));
      sec.put("cost_repair", join_numbers(&c.cost_repair, 1));
      sec.put("cost_inspect", join_numbers(&c.cost_inspect, 1));
    }
  }
  return tree;
}

SystemModel system_from_ptree(const pt::ptree& tree) {
  const auto sys_opt = tree.get_child_optional("system");
  if (!sys_opt) throw ConfigError("missing section [system]");
  const pt::ptree& sys = *sys_opt;
  try {
    const int n = required<int>(sys, "n");
    const int k = required<int>(sys, "k");
    const Variant variant = parse_variant(sys.get<std::string>("variant", "base"));
    SystemModel model;
    if (variant == Variant::Custom) {
      std::vector<ComponentModel> comps;
      for (int m = 1; m <= n; ++m) {
        const auto sec = tree.get_child_optional(pt::ptree::path_type("component." + std::to_string(m), '/'));
        if (!sec) throw ConfigError("missing section [component." + std::to_string(m) + "]");
        comps.push_back(ComponentModel::make(matrix_from(*sec, "t_nominal"),
                                             matrix_from(*sec, "t_repair_effect"),
                                             matrix_from(*sec, "o_inspect"),
                                             required<double>(*sec, "cost_repair"),
                                             required<double>(*sec, "cost_inspect")));
      }
      model = make_system(std::move(comps), k, required<double>(sys, "c_mob"),
                          required<double>(sys, "kappa"));
    } else {
      model = build_reference_system(n, k, variant);
    }
    model.gamma = sys.get<double>("gamma", model.gamma);
    if (const auto b0 = sys.get_optional<std::string>("b0")) {
      const auto v = split_numbers(*b0, 3, "b0");
      model.b0 = Vector3(v[0], v[1], v[2]);
    }
    model.risk_mode = parse_risk_mode(sys.get<std::string>("risk_mode", "next-state"));
    model.variant = variant;
    model.validate();
    return model;
  } catch (const pt::ptree_error& e) {
    throw ConfigError(std::string("malformed system configuration: ") + e.what());
  } catch (const ModelError& e) {
    throw ConfigError(std::string("invalid system configuration: ") + e.what());
  }
}

void write_system_config(std::ostream& out, const SystemModel& model) {
  pt::write_ini(out, system_to_ptree(model));
}

SystemModel read_system_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("cannot parse configuration: ") + e.what());
  }
  return system_from_ptree(tree);
}

SystemModel load_system_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file '" + path + "'");
  return read_system_config(in);
}

std::string system_config_text(const SystemModel& model) {
  std::ostringstream os;
  write_system_config(os, model);
  return os.str();
}

}  // namespace kofn
