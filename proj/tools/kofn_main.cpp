#include "kofn/app/commands.hpp"
#include "kofn/eval/evaluate.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace kofn;
using namespace kofn::app;

namespace {

struct SystemFlags {
  std::string config, system_file, variant = "base", risk_mode;
  int n = 4, k = 4;
};

struct RunFlags {
  std::string out = "runs";
  int workers = 1;
  bool force = false;
};

void add_system_flags(CLI::App* cmd, SystemFlags& f) {
  cmd->add_option("--config", f.config, "Experiment configuration (INI); flags override it")->check(CLI::ExistingFile);
  cmd->add_option("--system", f.system_file, "System configuration (INI)")->check(CLI::ExistingFile);
  cmd->add_option("--n", f.n, "Number of components")->check(CLI::Range(2, 4));
  cmd->add_option("--k", f.k, "Working components required");
  cmd->add_option("--variant", f.variant, "base | no-mob | low-kappa");
  cmd->add_option("--risk-mode", f.risk_mode, "next-state | current-state");
}

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--out", f.out, "Run store directory");
  cmd->add_option("--workers", f.workers, "Worker threads (KOFN_WORKERS overrides)")->check(CLI::PositiveNumber);
  cmd->add_flag("--force", f.force, "Recompute even when the run exists");
}

ExperimentConfig base_config(CLI::App* cmd, const SystemFlags& f, const std::string& command) {
  ExperimentConfig c;
  if (!f.config.empty()) c = load_experiment(f.config);
  c.command = command;
  if (!f.system_file.empty()) {
    c.system = load_system_config(f.system_file);
  } else if (f.config.empty() || cmd->count("--n") || cmd->count("--k") || cmd->count("--variant")) {
    c.system = build_reference_system(f.n, f.k, parse_variant(f.variant));
  }
  if (!f.risk_mode.empty()) c.system.risk_mode = parse_risk_mode(f.risk_mode);
  return c;
}

template <typename T>
void override_if(CLI::App* cmd, const std::string& flag, T& target, const T& value) {
  const CLI::Option* opt = cmd->get_option_no_throw(flag);
  if (opt && opt->count() > 0) target = value;
}

CommandContext context(const RunFlags& f) {
  CommandContext ctx{RunStore(f.out), worker_count(f.workers), &std::cout, !f.force};
  return ctx;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inspection and maintenance planning for k-out-of-n systems: POMDP solver, heuristics, "
               "multi-agent learners and evaluation"};
  app.require_subcommand(1);

  SystemFlags sys;
  RunFlags run;
  double precision = 1e-2, timeout = 3600;
  long max_backups = 0, rollouts = 100000, budget = 0, eval_interval = 0;
  std::uint64_t eval_seed = 0;
  int horizon = kEvalHorizon, max_interval = 20;
  std::string policy_mode = "lookahead", alg, env = "kofn", policy;
  std::vector<std::uint64_t> seeds;
  int seed_count = 0;
  double exploration_scale = 0.0;

  auto add_eval_flags = [&](CLI::App* cmd) {
    cmd->add_option("--rollouts", rollouts, "Monte Carlo rollouts per evaluation");
    cmd->add_option("--eval-seed", eval_seed, "Base seed of evaluation rollouts (0 = per-method default)");
    cmd->add_option("--horizon", horizon, "Evaluation horizon");
  };

  auto* solve = app.add_subcommand("solve", "Solve the joint POMDP with the point-based solver");
  add_system_flags(solve, sys);
  add_run_flags(solve, run);
  add_eval_flags(solve);
  solve->add_option("--precision", precision, "Target gap at the initial belief");
  solve->add_option("--timeout", timeout, "Wall-clock limit in seconds");
  solve->add_option("--max-backups", max_backups, "Deterministic backup cap (0 = none)");
  solve->add_option("--policy-mode", policy_mode, "lookahead | greedy");

  auto* train = app.add_subcommand("train", "Train a multi-agent learner under the evaluation protocol");
  add_system_flags(train, sys);
  add_run_flags(train, run);
  add_eval_flags(train);
  train->add_option("--alg", alg, "ddqn, jac, dcmac, iacc-ps, mappo-ps, vdn-ps, qmix-ps, iac-ps, ippo-ps");
  train->add_option("--env", env, "kofn | climb");
  train->add_option("--seeds", seed_count, "Train seeds 0..N-1");
  train->add_option("--seed-list", seeds, "Explicit seeds")->delimiter(',');
  train->add_option("--budget", budget, "Episodes (off-policy) or steps (on-policy); 0 = default");
  train->add_option("--eval-interval", eval_interval, "Evaluation interval; 0 = default");
  train->add_option("--exploration-scale", exploration_scale, "Epsilon decay span factor; 0 = budget ratio");

  auto* heur = app.add_subcommand("heuristic", "Grid search over the inspection/repair heuristic");
  add_system_flags(heur, sys);
  add_run_flags(heur, run);
  add_eval_flags(heur);
  heur->add_option("--max-interval", max_interval, "Largest inspection interval");

  auto* evaluate = app.add_subcommand("evaluate", "Monte Carlo evaluation of a stored policy or checkpoint");
  add_system_flags(evaluate, sys);
  add_run_flags(evaluate, run);
  add_eval_flags(evaluate);
  evaluate->add_option("--policy", policy, "Solver policy file or agent checkpoint")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--policy-mode", policy_mode, "lookahead | greedy (solver policies)");

  AnalyzeOptions an;
  std::string analyze_csv;
  auto* analyze = app.add_subcommand("analyze", "Value-factorization analysis of the two-component matrix game");
  analyze->add_option("--game", an.game, "parallel | series");
  analyze->add_option("--c1", an.c1, "Repair cost of component 1");
  analyze->add_option("--c2", an.c2, "Repair cost of component 2");
  analyze->add_option("--cf", an.c_f, "Failure cost (default kappa * (c1 + c2))");
  analyze->add_option("--kappa", an.kappa, "Failure cost factor");
  analyze->add_option("--csv", analyze_csv, "Also write a CSV summary");

  std::string table, runs_dir = "runs", table_out;
  std::vector<std::string> systems;
  auto* reproduce = app.add_subcommand("reproduce", "Assemble a result table from stored runs");
  reproduce->add_option("table", table, "table2 | table3 | fig5 | fig7")->required();
  reproduce->add_option("--runs", runs_dir, "Run store directory");
  reproduce->add_option("--systems", systems, "System tag prefixes, e.g. 4of4,1of4")->delimiter(',');
  reproduce->add_option("--output", table_out, "Write the CSV here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (analyze->parsed()) {
      std::ofstream csv;
      if (!analyze_csv.empty()) csv.open(analyze_csv);
      cmd_analyze(an, std::cout, analyze_csv.empty() ? nullptr : &csv);
      return 0;
    }
    if (reproduce->parsed()) {
      std::ofstream file;
      if (!table_out.empty()) file.open(table_out);
      cmd_reproduce(table, RunStore(runs_dir), systems, table_out.empty() ? std::cout : file);
      return 0;
    }
    CLI::App* cmd = app.get_subcommands().front();
    ExperimentConfig c = base_config(cmd, sys, cmd->get_name());
    override_if(cmd, "--rollouts", c.rollouts, rollouts);
    override_if(cmd, "--eval-seed", c.eval_seed, eval_seed);
    override_if(cmd, "--horizon", c.horizon, horizon);
    override_if(cmd, "--precision", c.precision, precision);
    override_if(cmd, "--timeout", c.timeout, timeout);
    override_if(cmd, "--max-backups", c.max_backups, max_backups);
    override_if(cmd, "--policy-mode", c.policy_mode, policy_mode);
    override_if(cmd, "--max-interval", c.max_interval, max_interval);
    override_if(cmd, "--policy", c.policy, policy);
    if (cmd == train) {
      override_if(cmd, "--alg", c.algorithm, alg);
      override_if(cmd, "--env", c.environment, env);
      override_if(cmd, "--budget", c.budget, budget);
      override_if(cmd, "--eval-interval", c.eval_interval, eval_interval);
      override_if(cmd, "--exploration-scale", c.exploration_scale, exploration_scale);
      if (cmd->count("--seeds")) {
        c.seeds.clear();
        for (int s = 0; s < seed_count; ++s) c.seeds.push_back(static_cast<std::uint64_t>(s));
      }
      override_if(cmd, "--seed-list", c.seeds, seeds);
    }
    const RunStore::Run r = run_command(c, context(run));
    std::cout << "run " << r.dir.string() << '\n';
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 1;
  } catch (const ModelError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 1;
  } catch (const MissingArtifact& e) {
    std::cerr << "missing artifact: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
