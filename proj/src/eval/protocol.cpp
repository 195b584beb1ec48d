#include "kofn/eval/protocol.hpp"

#include "kofn/util/csv.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <stdexcept>
#include <thread>

namespace kofn {

int select_best(std::span<const EvalPoint> curve, Objective objective, bool exclude_initial) {
  int best = -1;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (exclude_initial && curve[i].progress == 0) continue;
    if (best < 0 || better(curve[i].value.mean, curve[static_cast<std::size_t>(best)].value.mean, objective))
      best = static_cast<int>(i);
  }
  return best;
}

const SeedRun* EvalReport::best_seed() const {
  const SeedRun* out = nullptr;
  for (const SeedRun& s : seeds) {
    const EvalPoint* p = s.best_point();
    if (!p) continue;
    if (!out || better(p->value.mean, out->best_point()->value.mean, objective)) out = &s;
  }
  return out;
}

int EvalReport::failed_count() const {
  return static_cast<int>(std::count_if(seeds.begin(), seeds.end(), [](const SeedRun& s) { return s.failed; }));
}

NetworkEvaluator kofn_evaluator(const SystemModel& model, EvalOptions opts) {
  return [model, opts](const marl::AgentNetworks& nets) {
    auto shared = std::make_shared<const marl::AgentNetworks>(nets);
    return evaluate_policy([shared] { return std::make_unique<marl::AgentPolicy>(shared); }, model, opts);
  };
}

NetworkEvaluator climb_evaluator() {
  return [](const marl::AgentNetworks& nets) {
    Estimate e;
    e.mean = marl::climb_expected_return(nets);
    e.count = 1;
    return e;
  };
}

namespace {

SeedRun run_seed(const marl::AgentSpec& spec, const marl::MarlEnv& env, std::uint64_t seed,
                 const NetworkEvaluator& evaluate, const ProtocolOptions& opts) {
  SeedRun run;
  run.seed = seed;
  try {
    marl::Trainer trainer(spec, env, seed);
    trainer.run_budget([&](const marl::Trainer& t) {
      EvalPoint p{t.progress(), evaluate(t.networks())};
      run.curve.push_back(p);
      const bool eligible = !(opts.exclude_initial && p.progress == 0);
      const EvalPoint* cur = run.best_point();
      nn::Checkpoint ckpt = t.policy_checkpoint();
      if (eligible && (!cur || better(p.value.mean, cur->value.mean, opts.objective))) {
        run.best = static_cast<int>(run.curve.size()) - 1;
        run.best_policy = ckpt;
      }
      if (opts.on_checkpoint) opts.on_checkpoint(seed, p, ckpt);
    });
  } catch (const marl::TrainingDiverged& e) {
    run.failed = true;
    run.error = e.what();
  }
  return run;
}

}  // namespace

EvalReport run_protocol(const marl::AgentSpec& spec, const marl::MarlEnv& env,
                        std::span<const std::uint64_t> seeds, const NetworkEvaluator& evaluate,
                        const ProtocolOptions& opts) {
  EvalReport report;
  report.algorithm = spec.algorithm;
  report.objective = opts.objective;
  report.seeds.resize(seeds.size());
  const int workers = std::clamp<int>(opts.workers, 1, std::max<int>(1, static_cast<int>(seeds.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < seeds.size(); ++i) report.seeds[i] = run_seed(spec, env, seeds[i], evaluate, opts);
    return report;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> threads;
  for (int w = 0; w < workers; ++w)
    threads.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < seeds.size(); i = next++)
          report.seeds[i] = run_seed(spec, env, seeds[i], evaluate, opts);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return report;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile: no values");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

void write_summary_table(std::ostream& out, std::span<const TableRow> rows) {
  CsvWriter w(out);
  w.row({"system", "method", "mean", "ci_lower", "ci_upper", "std_dev", "rollouts"});
  for (const TableRow& r : rows)
    w.row({r.system, r.method, format_number(r.value.mean), format_number(r.value.lower()),
           format_number(r.value.upper()), format_number(r.value.std_dev), std::to_string(r.value.count)});
}

void write_seed_table(std::ostream& out, std::span<const EvalReport> reports) {
  CsvWriter w(out);
  w.row({"system", "algorithm", "seed", "best_progress", "mean", "ci_lower", "ci_upper", "status"});
  for (const EvalReport& rep : reports)
    for (const SeedRun& s : rep.seeds) {
      const EvalPoint* p = s.best_point();
      if (!p) {
        w.row({rep.system, marl::to_string(rep.algorithm), std::to_string(s.seed), "", "", "", "",
               s.failed ? "failed: " + s.error : "no-eligible-checkpoint"});
        continue;
      }
      w.row({rep.system, marl::to_string(rep.algorithm), std::to_string(s.seed), std::to_string(p->progress),
             format_number(p->value.mean), format_number(p->value.lower()), format_number(p->value.upper()),
             s.failed ? "failed: " + s.error : "ok"});
    }
}

void write_box_data(std::ostream& out, std::span<const EvalReport> reports, double baseline_mean) {
  CsvWriter w(out);
  w.row({"system", "algorithm", "seed", "normalized"});
  for (const EvalReport& rep : reports)
    for (const SeedRun& s : rep.seeds)
      if (const EvalPoint* p = s.best_point())
        w.row({rep.system, marl::to_string(rep.algorithm), std::to_string(s.seed),
               format_number(normalized(p->value.mean, baseline_mean))});
}

void write_learning_curve(std::ostream& out, const EvalReport& report) {
  std::map<long, std::vector<double>> at;
  for (const SeedRun& s : report.seeds) {
    if (s.failed) continue;
    for (const EvalPoint& p : s.curve) at[p.progress].push_back(p.value.mean);
  }
  CsvWriter w(out);
  w.row({"algorithm", "progress", "seeds", "median", "q25", "q75"});
  for (const auto& [progress, v] : at)
    w.row({marl::to_string(report.algorithm), std::to_string(progress), std::to_string(v.size()),
           format_number(quantile(v, 0.5)), format_number(quantile(v, 0.25)), format_number(quantile(v, 0.75))});
}

void write_run_metrics(std::ostream& out, const SeedRun& run) {
  CsvWriter w(out);
  w.row({"progress", "mean", "ci_lower", "ci_upper", "count"});
  for (const EvalPoint& p : run.curve)
    w.row({std::to_string(p.progress), format_number(p.value.mean), format_number(p.value.lower()),
           format_number(p.value.upper()), std::to_string(p.value.count)});
}

}  // namespace kofn
