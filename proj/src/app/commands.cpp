#include "kofn/app/commands.hpp"

#include "kofn/core/joint_pomdp.hpp"
#include "kofn/eval/protocol.hpp"
#include "kofn/heuristic/heuristic.hpp"
#include "kofn/marl/envs.hpp"
#include "kofn/solver/solver.hpp"
#include "kofn/util/csv.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace kofn::app {

namespace fs = std::filesystem;

namespace {

std::ostream& log(const CommandContext& ctx) {
  static std::ostringstream sink;
  return ctx.log ? *ctx.log : sink;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw MissingArtifact("missing artifact " + p.string());
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Writes through a temporary file so a crash never leaves a half-written artifact.
template <typename F>
void write_artifact(const fs::path& p, F&& body) {
  fs::create_directories(p.parent_path());
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    body(out);
    if (!out) throw std::runtime_error("cannot write " + p.string());
  }
  fs::rename(tmp, p);
}

EvalOptions eval_options(const ExperimentConfig& c, int workers) {
  EvalOptions o;
  o.horizon = c.horizon;
  o.rollouts = c.rollouts;
  o.seed = c.resolved_eval_seed();
  o.workers = workers;
  return o;
}

void write_eval(const RunStore::Run& run, const std::string& method, const Estimate& e) {
  const std::vector<TableRow> rows{{run.config.system_tag(), method, e}};
  write_artifact(run.dir / "eval.csv", [&](std::ostream& o) { write_summary_table(o, rows); });
}

bool finished(const RunStore::Run& run, const CommandContext& ctx, const std::string& marker) {
  if (ctx.reuse && run.has(marker)) {
    log(ctx) << "reusing " << run.dir.string() << '\n';
    return true;
  }
  return false;
}

}  // namespace

RunStore::Run cmd_solve(const ExperimentConfig& c, const CommandContext& ctx) {
  c.validate();
  RunStore::Run run = ctx.store.open(c);
  if (finished(run, ctx, "bounds.csv")) return run;
  RunStore::record(run, "start");
  auto pomdp = std::make_shared<const JointPomdp>(flatten_to_pomdp(c.system));
  SolverOptions so;
  so.precision = c.precision;
  so.timeout_seconds = c.timeout;
  so.max_backups = c.max_backups;
  const SolveResult r = solve(*pomdp, so);
  const double cost_lo = -r.bounds.upper_at_b0, cost_hi = -r.bounds.lower_at_b0;
  log(ctx) << "solve " << c.system_tag() << ": " << to_string(r.status) << ", cost bounds (" << format_fixed(cost_lo, 3)
           << ", " << format_fixed(cost_hi, 3) << "), " << r.bounds.lower.size() << " vectors, "
           << format_fixed(r.seconds, 1) << " s\n";
  write_artifact(run.dir / "policy.txt", [&](std::ostream& o) {
    write_policy_file(o, r.bounds.lower, "system " + c.system_tag() + "\nconfig " + run.hash);
  });
  write_artifact(run.dir / "trace.csv", [&](std::ostream& o) { write_trace_csv(o, r.trace); });
  auto lower = std::make_shared<const AlphaSet>(r.bounds.lower);
  if (c.rollouts > 0) {
    const auto mode = c.policy_mode == "greedy" ? AlphaVectorPolicy::Mode::Greedy : AlphaVectorPolicy::Mode::Lookahead;
    const Estimate e = evaluate_policy([&] { return std::make_unique<AlphaVectorPolicy>(pomdp, lower, mode); },
                                       c.system, eval_options(c, ctx.workers));
    log(ctx) << "  " << c.policy_mode << " policy: " << format_fixed(e.mean, 3) << " (" << format_fixed(e.lower(), 3)
             << ", " << format_fixed(e.upper(), 3) << ")\n";
    write_eval(run, "solver", e);
  }
  write_artifact(run.dir / "bounds.csv", [&](std::ostream& o) {
    CsvWriter w(o);
    w.row({"cost_lower", "cost_upper", "gap", "status", "backups", "trials", "seconds", "alpha_vectors"});
    w.row({format_number(cost_lo), format_number(cost_hi), format_number(cost_hi - cost_lo), to_string(r.status),
           std::to_string(r.backups), std::to_string(r.trials), format_number(r.seconds),
           std::to_string(r.bounds.lower.size())});
  });
  RunStore::record(run, "finish", nlohmann::json{{"status", to_string(r.status)}}.dump());
  return run;
}

RunStore::Run cmd_heuristic(const ExperimentConfig& c, const CommandContext& ctx) {
  c.validate();
  RunStore::Run run = ctx.store.open(c);
  if (finished(run, ctx, "eval.csv")) return run;
  RunStore::record(run, "start");
  const GridResult g = grid_search(c.system, eval_options(c, ctx.workers), c.max_interval);
  const GridCell& best = g.best_cell();
  log(ctx) << "heuristic " << c.system_tag() << ": interval " << best.params.inspect_interval << ", inspect "
           << best.params.n_inspect << ", threshold " << best.params.repair_threshold << " -> "
           << format_fixed(best.value.mean, 3) << '\n';
  write_artifact(run.dir / "grid.csv", [&](std::ostream& o) { write_grid_csv(o, g); });
  write_eval(run, "heuristic", best.value);
  RunStore::record(run, "finish");
  return run;
}

RunStore::Run cmd_train(const ExperimentConfig& c, const CommandContext& ctx) {
  c.validate();
  RunStore::Run run = ctx.store.open(c);
  if (finished(run, ctx, "seeds.csv")) return run;
  RunStore::record(run, "start");
  const marl::Algorithm alg = marl::parse_algorithm(c.algorithm);
  const bool climb = c.environment == "climb";
  marl::AgentSpec spec = climb ? marl::climb_spec(alg) : marl::default_spec(alg);
  const long default_budget = spec.budget;
  if (c.budget > 0) spec.budget = c.budget;
  if (c.eval_interval > 0) spec.eval_interval = c.eval_interval;
  spec.eval_interval = std::min(spec.eval_interval, spec.budget);
  const double scale = c.exploration_scale > 0 ? c.exploration_scale : double(spec.budget) / double(default_budget);
  if (scale < 1.0) spec.scale_exploration(scale);

  std::unique_ptr<marl::MarlEnv> env;
  NetworkEvaluator evaluator;
  const int seed_workers = std::min<int>(ctx.workers, static_cast<int>(c.seeds.size()));
  if (climb) {
    env = std::make_unique<marl::ClimbMarlEnv>();
    evaluator = climb_evaluator();
  } else {
    env = std::make_unique<marl::KofnMarlEnv>(c.system);
    evaluator = kofn_evaluator(c.system, eval_options(c, seed_workers > 1 ? 1 : ctx.workers));
  }
  ProtocolOptions po;
  po.objective = climb ? Objective::MaximizeReturn : Objective::MinimizeCost;
  po.exclude_initial = climb;
  po.workers = seed_workers;
  po.on_checkpoint = [&](std::uint64_t seed, const EvalPoint& p, const nn::Checkpoint& ckpt) {
    ckpt.save((run.dir / "checkpoints" / ("seed_" + std::to_string(seed)) /
               ("progress_" + std::to_string(p.progress) + ".ckpt")).string());
  };
  fs::create_directories(run.dir / "checkpoints");
  for (std::uint64_t s : c.seeds) fs::create_directories(run.dir / "checkpoints" / ("seed_" + std::to_string(s)));
  EvalReport report = run_protocol(spec, *env, c.seeds, evaluator, po);
  report.system = c.system_tag();

  fs::create_directories(run.dir / "best");
  for (const SeedRun& s : report.seeds) {
    const std::string tag = "seed_" + std::to_string(s.seed);
    write_artifact(run.dir / "metrics" / (tag + ".csv"), [&](std::ostream& o) { write_run_metrics(o, s); });
    if (s.best_point()) s.best_policy.save((run.dir / "best" / (tag + ".ckpt")).string());
    if (s.failed) RunStore::record(run, "seed-failed", nlohmann::json{{"seed", s.seed}, {"error", s.error}}.dump());
    const EvalPoint* b = s.best_point();
    log(ctx) << marl::to_string(alg) << " " << report.system << " seed " << s.seed << ": "
             << (b ? format_fixed(b->value.mean, 3) + " at " + std::to_string(b->progress) : "failed") << '\n';
  }
  write_artifact(run.dir / "curve.csv", [&](std::ostream& o) { write_learning_curve(o, report); });
  if (const SeedRun* best = report.best_seed()) write_eval(run, marl::to_string(alg), best->best_point()->value);
  const std::vector<EvalReport> reports{report};
  write_artifact(run.dir / "seeds.csv", [&](std::ostream& o) { write_seed_table(o, reports); });
  RunStore::record(run, "finish", nlohmann::json{{"failed_seeds", report.failed_count()}}.dump());
  return run;
}

RunStore::Run cmd_evaluate(const ExperimentConfig& c, const CommandContext& ctx) {
  c.validate();
  RunStore::Run run = ctx.store.open(c);
  if (finished(run, ctx, "eval.csv")) return run;
  RunStore::record(run, "start", nlohmann::json{{"policy", c.policy}}.dump());
  const std::string bytes = read_file(c.policy);
  std::istringstream in(bytes);
  PolicyFactory factory;
  std::string label;
  if (bytes.rfind("KOFNCKPT", 0) == 0) {
    auto nets = std::make_shared<const marl::AgentNetworks>(marl::networks_from_checkpoint(nn::Checkpoint::read(in)));
    if (nets->n_agents() != c.system.n()) throw ConfigError("checkpoint was trained for a different number of components");
    label = marl::to_string(nets->algorithm());
    factory = [nets] { return std::make_unique<marl::AgentPolicy>(nets); };
  } else {
    auto lower = std::make_shared<const AlphaSet>(read_policy_file(in));
    auto pomdp = std::make_shared<const JointPomdp>(flatten_to_pomdp(c.system));
    if (lower->n_states() != pomdp->n_states) throw ConfigError("policy file does not match the system");
    const auto mode = c.policy_mode == "greedy" ? AlphaVectorPolicy::Mode::Greedy : AlphaVectorPolicy::Mode::Lookahead;
    label = "solver";
    factory = [=] { return std::make_unique<AlphaVectorPolicy>(pomdp, lower, mode); };
  }
  const Estimate e = evaluate_policy(factory, c.system, eval_options(c, ctx.workers));
  log(ctx) << label << " on " << c.system_tag() << ": " << format_fixed(e.mean, 3) << " (" << format_fixed(e.lower(), 3)
           << ", " << format_fixed(e.upper(), 3) << ")\n";
  write_eval(run, label, e);
  RunStore::record(run, "finish");
  return run;
}

RunStore::Run run_command(const ExperimentConfig& c, const CommandContext& ctx) {
  if (c.command == "solve") return cmd_solve(c, ctx);
  if (c.command == "train") return cmd_train(c, ctx);
  if (c.command == "heuristic") return cmd_heuristic(c, ctx);
  if (c.command == "evaluate") return cmd_evaluate(c, ctx);
  throw ConfigError("unknown command '" + c.command + "'");
}

analysis::MatrixGame2x2 analysis_game(const AnalyzeOptions& o) {
  const double cf = o.c_f > 0 ? o.c_f : o.kappa * (o.c1 + o.c2);
  if (o.game == "parallel") return analysis::MatrixGame2x2::parallel(o.c1, o.c2, cf);
  if (o.game == "series") return analysis::MatrixGame2x2::series(o.c1, o.c2, cf);
  throw ConfigError("--game must be parallel or series (got '" + o.game + "')");
}

void cmd_analyze(const AnalyzeOptions& o, std::ostream& out, std::ostream* csv) {
  const auto game = analysis_game(o);
  const auto vdn = analysis::vdn_closed_form(game);
  const auto qmix = analysis::qmix_representability(game);
  analysis::render_game_report(out, game, vdn, qmix);
  if (!csv) return;
  CsvWriter w(*csv);
  w.row({"quantity", "value"});
  w.row({"game", game.name});
  w.row({"optimum", analysis::game_action_name(game.optimum()[0]) + "," + analysis::game_action_name(game.optimum()[1])});
  w.row({"vdn_gap_1", format_number(vdn.gap[0])});
  w.row({"vdn_gap_2", format_number(vdn.gap[1])});
  w.row({"vdn_greedy", analysis::game_action_name(vdn.greedy[0]) + "," + analysis::game_action_name(vdn.greedy[1])});
  w.row({"vdn_optimal", vdn.greedy == game.optimum() ? "1" : "0"});
  w.row({"qmix", analysis::to_string(qmix.verdict)});
}

namespace {

struct EvalRow {
  std::string system, method, run;
  std::vector<std::string> fields;  // as in eval.csv
  double mean = 0.0;
};

std::optional<EvalRow> read_eval(const RunStore::Run& r) {
  if (!r.has("eval.csv")) return std::nullopt;
  const auto rows = parse_csv(read_file(r.dir / "eval.csv"));
  if (rows.size() < 2) return std::nullopt;
  EvalRow e{rows[1][0], rows[1][1], r.id(), rows[1], std::stod(rows[1][2])};
  return e;
}

bool selected(const std::string& tag, const std::vector<std::string>& systems) {
  if (systems.empty()) return true;
  return std::any_of(systems.begin(), systems.end(), [&](const std::string& s) { return tag.rfind(s, 0) == 0; });
}

int method_rank(const std::string& m) {
  if (m == "solver") return 0;
  if (m == "heuristic") return 1;
  for (std::size_t i = 0; i < std::size(marl::kAllAlgorithms); ++i)
    if (marl::to_string(marl::kAllAlgorithms[i]) == m) return 2 + static_cast<int>(i);
  return 100;
}

std::string missing_hint(const std::string& what, const std::string& system) {
  return "no " + what + " run for system " + system + " in the run store; run `kofn " +
         (what == "solver" ? "solve" : what) + "` for it first";
}

}  // namespace

namespace {

void reproduce_into(const std::string& table, const RunStore& store, const std::vector<std::string>& systems,
                    std::ostream& out) {
  const std::vector<RunStore::Run> runs = store.runs();
  if (runs.empty()) throw MissingArtifact("run store " + store.root().string() + " is empty; run solve/heuristic/train first");
  CsvWriter w(out);

  // Best row per (system, method) across runs; ties keep the earliest run.
  std::map<std::pair<std::string, std::string>, EvalRow> best;
  for (const auto& r : runs) {
    if (r.config.environment != "kofn" || r.config.command == "evaluate") continue;
    auto e = read_eval(r);
    if (!e || !selected(e->system, systems)) continue;
    auto key = std::make_pair(e->system, e->method);
    auto it = best.find(key);
    if (it == best.end() || e->mean < it->second.mean) best[key] = *e;
  }
  auto solver_mean = [&](const std::string& system) {
    auto it = best.find({system, "solver"});
    if (it == best.end()) throw MissingArtifact(missing_hint("solver", system));
    return it->second.mean;
  };

  if (table == "table2") {
    std::set<std::string> tags;
    for (const auto& [key, row] : best) tags.insert(key.first);
    if (tags.empty()) throw MissingArtifact(missing_hint("solver", systems.empty() ? "any" : systems.front()));
    for (const std::string& s : systems)
      if (std::none_of(tags.begin(), tags.end(), [&](const std::string& t) { return t.rfind(s, 0) == 0; }))
        throw MissingArtifact(missing_hint("solver", s));
    for (const std::string& t : tags) solver_mean(t);
    std::vector<EvalRow> rows;
    for (const auto& [key, row] : best) rows.push_back(row);
    std::stable_sort(rows.begin(), rows.end(), [](const EvalRow& a, const EvalRow& b) {
      return std::make_pair(a.system, method_rank(a.method)) < std::make_pair(b.system, method_rank(b.method));
    });
    w.row({"system", "method", "mean", "ci_lower", "ci_upper", "normalized", "run"});
    for (const EvalRow& r : rows)
      w.row({r.system, r.method, r.fields[2], r.fields[3], r.fields[4], format_fixed(normalized(r.mean, solver_mean(r.system)), 4),
             r.run});
    return;
  }
  if (table == "table3" || table == "fig5") {
    bool any = false;
    if (table == "table3")
      w.row({"system", "algorithm", "seed", "best_progress", "mean", "ci_lower", "ci_upper", "status", "run"});
    else
      w.row({"system", "algorithm", "seed", "normalized", "run"});
    for (const auto& r : runs) {
      if (r.config.command != "train" || r.config.environment != "kofn" || !selected(r.config.system_tag(), systems)) continue;
      if (!r.has("seeds.csv")) continue;
      const auto rows = parse_csv(read_file(r.dir / "seeds.csv"));
      for (std::size_t i = 1; i < rows.size(); ++i) {
        any = true;
        auto f = rows[i];
        if (table == "table3") {
          f.push_back(r.id());
          w.row(f);
        } else if (!f[4].empty()) {
          w.row({f[0], f[1], f[2], format_number(normalized(std::stod(f[4]), solver_mean(f[0]))), r.id()});
        }
      }
    }
    if (!any) throw MissingArtifact("no finished train runs on the selected systems; run `kofn train` first");
    return;
  }
  if (table == "fig7") {
    bool any = false;
    w.row({"algorithm", "a1", "a2", "q_tot", "payoff", "greedy", "run"});
    for (const auto& r : runs) {
      if (r.config.command != "train" || r.config.environment != "climb" || !r.has("seeds.csv")) continue;
      const std::string m = r.config.method();
      if (m != "vdn-ps" && m != "qmix-ps") continue;
      const auto rows = parse_csv(read_file(r.dir / "seeds.csv"));
      // Best seed by return (earliest among ties).
      std::string seed;
      double best_return = -1e300;
      for (std::size_t i = 1; i < rows.size(); ++i)
        if (!rows[i][4].empty() && std::stod(rows[i][4]) > best_return) {
          best_return = std::stod(rows[i][4]);
          seed = rows[i][2];
        }
      if (seed.empty()) continue;
      const auto nets = marl::networks_from_checkpoint(nn::Checkpoint::load((r.dir / "best" / ("seed_" + seed + ".ckpt")).string()));
      const auto d = analysis::climb_decomposition_report(nets);
      std::ostringstream part;
      analysis::write_climb_csv(part, d);
      const auto cells = parse_csv(part.str());
      for (std::size_t i = 1; i < cells.size(); ++i) {
        auto f = cells[i];
        f.push_back(r.id());
        w.row(f);
      }
      any = true;
    }
    if (!any) throw MissingArtifact("no finished Climb Game runs of vdn-ps or qmix-ps; run `kofn train --env climb` first");
    return;
  }
  throw ConfigError("unknown table '" + table + "' (table2, table3, fig5, fig7)");
}

}  // namespace

void cmd_reproduce(const std::string& table, const RunStore& store, const std::vector<std::string>& systems,
                   std::ostream& out) {
  std::ostringstream buf;
  reproduce_into(table, store, systems, buf);
  out << buf.str();
}

}  // namespace kofn::app
