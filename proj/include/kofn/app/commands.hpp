#pragma once

#include "kofn/analysis/factorization.hpp"
#include "kofn/app/experiment.hpp"

#include <ostream>
#include <string>
#include <vector>

namespace kofn::app {

struct CommandContext {
  RunStore store;
  int workers = 1;
  std::ostream* log = nullptr;
  /// Reuse a finished run instead of recomputing it.
  bool reuse = true;
};

/// Each command resolves its run directory from the configuration hash, writes its
/// artifacts there and returns the run.
RunStore::Run cmd_solve(const ExperimentConfig& c, const CommandContext& ctx);
RunStore::Run cmd_train(const ExperimentConfig& c, const CommandContext& ctx);
RunStore::Run cmd_heuristic(const ExperimentConfig& c, const CommandContext& ctx);
RunStore::Run cmd_evaluate(const ExperimentConfig& c, const CommandContext& ctx);
RunStore::Run run_command(const ExperimentConfig& c, const CommandContext& ctx);

struct AnalyzeOptions {
  std::string game = "parallel";  ///< parallel | series
  double c1 = 50.0, c2 = 30.0;
  double c_f = 0.0;     ///< 0 = kappa * (c1 + c2)
  double kappa = 3.0;
};
analysis::MatrixGame2x2 analysis_game(const AnalyzeOptions& o);
/// Text report to `out`; CSV rows (quantity, value) to `csv` when non-null.
void cmd_analyze(const AnalyzeOptions& o, std::ostream& out, std::ostream* csv = nullptr);

/// Composite tables assembled from the run store: table2, table3, fig5, fig7.
/// `systems` filters by system tag prefix (e.g. "4of4"); empty keeps all.
/// Throws MissingArtifact naming the runs to create first.
void cmd_reproduce(const std::string& table, const RunStore& store, const std::vector<std::string>& systems,
                   std::ostream& out);

}  // namespace kofn::app
