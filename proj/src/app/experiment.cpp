#include "kofn/app/experiment.hpp"

#include "kofn/marl/spec.hpp"
#include "kofn/util/csv.hpp"
#include "kofn/util/random.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace kofn::app {

namespace pt = boost::property_tree;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kCommands{"solve", "train", "heuristic", "evaluate"};

template <typename T>
T get(const pt::ptree& sec, const std::string& key, T fallback) {
  const auto child = sec.get_child_optional(key);
  if (!child) return fallback;
  if (auto v = child->get_value_optional<T>()) return *v;
  throw ConfigError("invalid value for experiment." + key + ": '" + child->data() + "'");
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError("invalid seed '" + tok + "' in experiment.seeds");
    }
  }
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (std::find(kCommands.begin(), kCommands.end(), command) == kCommands.end())
    throw ConfigError("experiment.command must be one of solve, train, heuristic, evaluate (got '" + command + "')");
  if (environment != "kofn" && environment != "climb")
    throw ConfigError("experiment.environment must be kofn or climb (got '" + environment + "')");
  if (environment == "climb" && command != "train") throw ConfigError("the climb environment only supports train");
  if (command == "train") {
    if (algorithm.empty()) throw ConfigError("missing key experiment.algorithm");
    try {
      marl::parse_algorithm(algorithm);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("experiment.algorithm: ") + e.what());
    }
    if (seeds.empty()) throw ConfigError("experiment.seeds is empty");
  }
  if (command == "evaluate" && policy.empty()) throw ConfigError("missing key experiment.policy");
  if (budget < 0 || eval_interval < 0) throw ConfigError("experiment.budget and eval_interval must be >= 0");
  if (budget > 0 && eval_interval > budget) throw ConfigError("experiment.eval_interval exceeds the budget");
  if (rollouts < 1) throw ConfigError("experiment.rollouts must be positive");
  if (horizon < 1) throw ConfigError("experiment.horizon must be positive");
  if (!(precision > 0.0)) throw ConfigError("experiment.precision must be positive");
  if (!(timeout > 0.0)) throw ConfigError("experiment.timeout must be positive");
  if (policy_mode != "lookahead" && policy_mode != "greedy")
    throw ConfigError("experiment.policy_mode must be lookahead or greedy");
  if (max_interval < 1) throw ConfigError("experiment.max_interval must be positive");
  if (exploration_scale < 0.0) throw ConfigError("experiment.exploration_scale must be >= 0");
  if (environment == "kofn") system.validate();
}

std::uint64_t ExperimentConfig::resolved_eval_seed() const {
  if (eval_seed != 0) return eval_seed;
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : method()) h = (h ^ ch) * 1099511628211ULL;
  return derive_seed(20240, h, 0);
}

std::string ExperimentConfig::system_tag() const {
  if (environment == "climb") return "climb";
  return std::to_string(system.k) + "of" + std::to_string(system.n()) + "-" + to_string(system.variant) + "-" +
         to_string(system.risk_mode);
}

std::string ExperimentConfig::method() const {
  if (command == "solve") return "solver";
  if (command == "heuristic") return "heuristic";
  if (command == "evaluate") return "policy";
  return marl::to_string(marl::parse_algorithm(algorithm));
}

pt::ptree to_ptree(const ExperimentConfig& c) {
  pt::ptree tree;
  pt::ptree& e = tree.put_child("experiment", pt::ptree());
  e.put("command", c.command);
  e.put("environment", c.environment);
  e.put("algorithm", c.algorithm);
  std::string seeds;
  for (std::size_t i = 0; i < c.seeds.size(); ++i) seeds += (i ? " " : "") + std::to_string(c.seeds[i]);
  e.put("seeds", seeds);
  e.put("budget", c.budget);
  e.put("eval_interval", c.eval_interval);
  e.put("exploration_scale", format_number(c.exploration_scale));
  e.put("rollouts", c.rollouts);
  e.put("eval_seed", c.eval_seed);
  e.put("horizon", c.horizon);
  e.put("precision", format_number(c.precision));
  e.put("timeout", format_number(c.timeout));
  e.put("max_backups", c.max_backups);
  e.put("policy_mode", c.policy_mode);
  e.put("max_interval", c.max_interval);
  e.put("policy", c.policy);
  if (c.environment == "kofn")
    for (auto& [key, child] : system_to_ptree(c.system)) tree.add_child(pt::ptree::path_type(key, '/'), child);
  return tree;
}

ExperimentConfig experiment_from_ptree(const pt::ptree& tree) {
  const auto sec = tree.get_child_optional("experiment");
  if (!sec) throw ConfigError("missing section [experiment]");
  ExperimentConfig c;
  c.command = get<std::string>(*sec, "command", c.command);
  c.environment = get<std::string>(*sec, "environment", c.environment);
  c.algorithm = get<std::string>(*sec, "algorithm", "");
  if (auto s = sec->get_optional<std::string>("seeds")) c.seeds = parse_seeds(*s);
  c.budget = get<long>(*sec, "budget", c.budget);
  c.eval_interval = get<long>(*sec, "eval_interval", c.eval_interval);
  c.exploration_scale = get<double>(*sec, "exploration_scale", c.exploration_scale);
  c.rollouts = get<long>(*sec, "rollouts", c.rollouts);
  c.eval_seed = get<std::uint64_t>(*sec, "eval_seed", c.eval_seed);
  c.horizon = get<int>(*sec, "horizon", c.horizon);
  c.precision = get<double>(*sec, "precision", c.precision);
  c.timeout = get<double>(*sec, "timeout", c.timeout);
  c.max_backups = get<long>(*sec, "max_backups", c.max_backups);
  c.policy_mode = get<std::string>(*sec, "policy_mode", c.policy_mode);
  c.max_interval = get<int>(*sec, "max_interval", c.max_interval);
  c.policy = get<std::string>(*sec, "policy", "");
  c.validate();
  if (c.environment == "kofn") {
    c.system = system_from_ptree(tree);
    c.system.validate();
  }
  return c;
}

std::string config_text(const ExperimentConfig& c) {
  std::ostringstream os;
  pt::write_ini(os, to_ptree(c));
  return os.str();
}

ExperimentConfig parse_experiment(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("cannot parse configuration: ") + e.what());
  }
  return experiment_from_ptree(tree);
}

ExperimentConfig load_experiment(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file '" + path.string() + "'");
  return parse_experiment(in);
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string config_hash(const ExperimentConfig& c) { return sha256_hex(config_text(c)); }

RunStore::Run RunStore::open(const ExperimentConfig& c) const {
  Run run;
  run.config = c;
  run.hash = config_hash(c);
  std::string name = c.command + "-" + c.system_tag();
  if (c.command == "train") name += "-" + c.method();
  run.dir = root_ / (name + "-" + run.hash.substr(0, 12));
  fs::create_directories(run.dir);
  const fs::path cfg = run.dir / "config.ini";
  const std::string text = config_text(c);
  if (fs::exists(cfg)) {
    std::ifstream in(cfg);
    std::stringstream existing;
    existing << in.rdbuf();
    if (existing.str() != text) throw std::runtime_error("run directory " + run.dir.string() + " holds another configuration");
  } else {
    std::ofstream(cfg) << text;
  }
  return run;
}

std::vector<RunStore::Run> RunStore::runs() const {
  std::vector<Run> out;
  if (!fs::is_directory(root_)) return out;
  for (const auto& entry : fs::directory_iterator(root_)) {
    const fs::path cfg = entry.path() / "config.ini";
    if (!entry.is_directory() || !fs::exists(cfg)) continue;
    try {
      Run r;
      r.dir = entry.path();
      r.config = load_experiment(cfg);
      r.hash = config_hash(r.config);
      out.push_back(std::move(r));
    } catch (const std::exception&) {
    }
  }
  std::sort(out.begin(), out.end(), [](const Run& a, const Run& b) { return a.dir < b.dir; });
  return out;
}

void RunStore::record(const Run& run, const std::string& event, const std::string& json_fields) {
  nlohmann::json line = nlohmann::json::parse(json_fields);
  line["event"] = event;
  line["config_hash"] = run.hash;
  std::ofstream(run.dir / "manifest.jsonl", std::ios::app) << line.dump() << '\n';
}

}  // namespace kofn::app
