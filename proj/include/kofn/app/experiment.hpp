#pragma once

#include "kofn/core/config_io.hpp"
#include "kofn/core/model.hpp"
#include "kofn/env/kofn_env.hpp"

#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace kofn::app {

/// A command that needs artifacts the run store does not hold yet.
class MissingArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything that determines a run's results. Serialized as INI:
///
///   [experiment]
///   command = train               ; solve | train | heuristic | evaluate
///   environment = kofn            ; kofn | climb
///   algorithm = vdn-ps
///   seeds = 0 1 2
///   budget = 10000                ; 0 = default budget
///   eval_interval = 1000          ; 0 = default interval
///   exploration_scale = 0         ; 0 = budget / default budget
///   rollouts = 100000
///   eval_seed = 0                 ; 0 = method-specific default
///   horizon = 20
///   precision = 0.01
///   timeout = 3600
///   max_backups = 0
///   policy_mode = lookahead       ; lookahead | greedy
///   max_interval = 20
///   policy = path                 ; evaluate only
///
/// followed by the [system] block of the system configuration (kofn environment only).
struct ExperimentConfig {
  std::string command = "solve";
  std::string environment = "kofn";
  std::string algorithm;
  std::vector<std::uint64_t> seeds{0};
  long budget = 0;
  long eval_interval = 0;
  double exploration_scale = 0.0;
  long rollouts = 100000;
  std::uint64_t eval_seed = 0;
  int horizon = kEvalHorizon;
  double precision = 1e-2;
  double timeout = 3600.0;
  long max_backups = 0;
  std::string policy_mode = "lookahead";
  int max_interval = 20;
  std::string policy;
  SystemModel system = build_reference_system(4, 4, Variant::Base);

  /// Throws ConfigError naming the offending key.
  void validate() const;
  /// Evaluation seed actually used (resolves the method-specific default).
  std::uint64_t resolved_eval_seed() const;
  /// Short label of the system, e.g. "4of4-base-next-state".
  std::string system_tag() const;
  /// Label of the evaluated method: "solver", "heuristic" or the algorithm name.
  std::string method() const;
};

boost::property_tree::ptree to_ptree(const ExperimentConfig& c);
ExperimentConfig experiment_from_ptree(const boost::property_tree::ptree& tree);
/// Canonical INI text; parsing it gives back an identical configuration.
std::string config_text(const ExperimentConfig& c);
ExperimentConfig parse_experiment(std::istream& in);
ExperimentConfig load_experiment(const std::filesystem::path& path);

/// Hex SHA-256 of the canonical text.
std::string config_hash(const ExperimentConfig& c);
std::string sha256_hex(std::string_view data);

/// Directory of runs; one subdirectory per configuration hash.
class RunStore {
 public:
  explicit RunStore(std::filesystem::path root) : root_(std::move(root)) {}
  const std::filesystem::path& root() const { return root_; }

  struct Run {
    std::filesystem::path dir;
    ExperimentConfig config;
    std::string hash;
    std::string id() const { return dir.filename().string(); }
    bool has(const std::string& artifact) const { return std::filesystem::exists(dir / artifact); }
  };

  /// Creates (or reopens) the directory of this configuration and writes config.ini.
  Run open(const ExperimentConfig& c) const;
  /// Every run whose stored configuration parses, sorted by directory name.
  std::vector<Run> runs() const;

  /// Appends one JSON line {"event": ..., fields...} to the run's manifest.jsonl.
  static void record(const Run& run, const std::string& event, const std::string& json_fields = "{}");

 private:
  std::filesystem::path root_;
};

}  // namespace kofn::app
