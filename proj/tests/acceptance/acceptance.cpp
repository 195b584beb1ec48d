// Acceptance suite: one PASS/FAIL line per criterion.
//
//   kofn_acceptance --tier fast            criteria 1 2 3 4 7 9
//   kofn_acceptance --tier long --runs DIR criteria 5 6 8 (hours; resumable through the run store)
//   kofn_acceptance --criteria 3,7
//
// Exit status: 0 when the set of failing criteria equals --expect-fail (default: empty),
// 1 otherwise, 2 when a criterion could not run.

#include "../support/oracles.hpp"

#include "kofn/analysis/factorization.hpp"
#include "kofn/app/commands.hpp"
#include "kofn/core/belief.hpp"
#include "kofn/core/cost.hpp"
#include "kofn/core/joint_pomdp.hpp"
#include "kofn/env/climb_game.hpp"
#include "kofn/eval/evaluate.hpp"
#include "kofn/eval/protocol.hpp"
#include "kofn/heuristic/heuristic.hpp"
#include "kofn/marl/mixer.hpp"
#include "kofn/marl/trainer.hpp"
#include "kofn/nn/mlp.hpp"
#include "kofn/solver/solver.hpp"
#include "kofn/util/csv.hpp"
#include "kofn/util/random.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

using namespace kofn;
namespace fs = std::filesystem;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Pinned tolerances.
constexpr double kStochasticTol = 1e-12;
constexpr double kBeliefTol = 1e-10;
constexpr double kGradientTol = 1e-5;
constexpr double kFiniteDiffStep = 1e-5;
constexpr double kOracleTol = 1e-3;
constexpr int kOracleResolution = 44;  // 1035 grid points
constexpr double kSmallGap = 0.5;
constexpr double kSigmas = 3.0;
constexpr int kLongHorizon = 100;      // 0.8^100 ~ 2e-10: the truncated tail is negligible
constexpr double kTargetRelTol = 0.01;
constexpr double kGapFactorTol = 1e-10;
constexpr double kTrendCentral = 1.03;
constexpr double kTrendDecentral = 1.05;

struct Outcome {
  bool pass = false;
  std::vector<std::string> notes;
  void note(const std::string& s) { notes.push_back(s); }
};

struct Settings {
  fs::path runs = "acceptance_runs";
  int workers = 1;
  double small_timeout = 1500.0;
  double solve_timeout = 3600.0;
  long rollouts = 100000;
  int climb_seeds = 30;
  long climb_budget = 1500;
  int trend_seeds = 3;
  long trend_episodes = 10000;
  long trend_steps = 4000000;
  long trend_rollouts = 10000;
};

std::string fmt(double v, int digits = 3) { return format_fixed(v, digits); }

MatrixXd random_matrix(int rows, int cols, RandomEngine& rng, double scale = 1.0) {
  MatrixXd m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = scale * (2.0 * uniform01(rng) - 1.0);
  return m;
}

Vector3 random_simplex(RandomEngine& rng) {
  Vector3 v;
  for (int i = 0; i < 3; ++i) v(i) = -std::log(1.0 - uniform01(rng));
  return v / v.sum();
}

double brute_force_failure(const std::vector<double>& q, int k) {
  const int n = static_cast<int>(q.size());
  double total = 0.0;
  for (int mask = 0; mask < (1 << n); ++mask) {
    double p = 1.0;
    int functional = 0;
    for (int m = 0; m < n; ++m) {
      const bool failed = (mask >> m) & 1;
      p *= failed ? q[static_cast<std::size_t>(m)] : 1.0 - q[static_cast<std::size_t>(m)];
      functional += failed ? 0 : 1;
    }
    if (functional < k) total += p;
  }
  return total;
}

std::vector<SystemModel> all_reference_systems() {
  std::vector<SystemModel> out;
  for (int n = 2; n <= 4; ++n)
    for (int k = 1; k <= n; ++k)
      for (Variant v : {Variant::Base, Variant::NoMobilization, Variant::LowKappa}) {
        if (v == Variant::Base && n != 4) continue;
        for (RiskMode r : {RiskMode::NextStateClosedForm, RiskMode::CurrentStateIndicator}) {
          SystemModel m = build_reference_system(n, k, v);
          m.risk_mode = r;
          out.push_back(m);
        }
      }
  return out;
}

// ---------------------------------------------------------------------------------------
Outcome criterion1(const Settings&) {
  Outcome o;
  bool ok = true;

  double worst_row = 0.0;
  for (int m = 0; m < 4; ++m) {
    const ComponentModel c = reference_component(m);
    for (const Matrix3* t : {&c.t_nominal, &c.t_repair_effect, &c.t_repair, &c.o_inspect, &c.o_null})
      for (int r = 0; r < 3; ++r) worst_row = std::max(worst_row, std::abs(t->row(r).sum() - 1.0));
  }
  int systems = 0;
  for (const SystemModel& s : all_reference_systems()) {
    const JointPomdp p = flatten_to_pomdp(s);
    ++systems;
    for (int a = 0; a < p.n_actions; ++a) {
      worst_row = std::max(worst_row, (p.transition[a].rowwise().sum().array() - 1.0).abs().maxCoeff());
      worst_row = std::max(worst_row, (p.observation[a].rowwise().sum().array() - 1.0).abs().maxCoeff());
    }
  }
  ok &= worst_row <= kStochasticTol;
  o.note("row sums: max |sum-1| " + format_number(worst_row) + " over 4 components and " + std::to_string(systems) +
         " flattened systems");

  RandomEngine rng(101);
  double worst_tp = 0.0, worst_norm = 0.0;
  const int pairs = 10000;
  for (int i = 0; i < pairs; ++i) {
    const ComponentModel c = reference_component(static_cast<int>(rng() % 4));
    const Vector3 b = random_simplex(rng);
    const auto a = static_cast<ComponentAction>(rng() % 3);
    const Vector3 like = obs_likelihood(b, a, c);
    Vector3 mix = Vector3::Zero();
    for (int obs = 0; obs < 3; ++obs)
      if (like(obs) > 0) mix += like(obs) * belief_update(b, a, obs, c);
    worst_tp = std::max(worst_tp, (mix - predict_belief(b, c.transition(a))).cwiseAbs().maxCoeff());
    worst_norm = std::max(worst_norm, std::abs(like.sum() - 1.0));
  }
  ok &= worst_tp <= kBeliefTol && worst_norm <= kBeliefTol;
  o.note("belief total probability on " + std::to_string(pairs) + " (b,a) pairs: max error " + format_number(worst_tp) +
         ", likelihood mass error " + format_number(worst_norm));

  // Dyadic probabilities make every product and sum exact, so equality is bitwise.
  long exact_cases = 0, exact_mismatch = 0;
  for (int n = 1; n <= 4; ++n) {
    const int grid = 5;  // q in {0, 1/4, 1/2, 3/4, 1}
    int combos = 1;
    for (int i = 0; i < n; ++i) combos *= grid;
    for (int idx = 0; idx < combos; ++idx) {
      std::vector<double> q(static_cast<std::size_t>(n));
      int rest = idx;
      for (auto& x : q) {
        x = (rest % grid) / 4.0;
        rest /= grid;
      }
      for (int k = 1; k <= n; ++k) {
        ++exact_cases;
        if (kofn_failure_prob(q, k) != brute_force_failure(q, k)) ++exact_mismatch;
      }
    }
  }
  double worst_random = 0.0;
  for (int trial = 0; trial < 20000; ++trial) {
    const int n = 1 + trial % 4;
    std::vector<double> q(static_cast<std::size_t>(n));
    for (auto& x : q) x = uniform01(rng);
    for (int k = 1; k <= n; ++k) worst_random = std::max(worst_random, std::abs(kofn_failure_prob(q, k) - brute_force_failure(q, k)));
  }
  ok &= exact_mismatch == 0 && worst_random <= 1e-15;
  o.note("k-out-of-n failure probability vs 2^n enumeration: " + std::to_string(exact_mismatch) + " mismatches in " +
         std::to_string(exact_cases) + " dyadic cases (bitwise), max |diff| " + format_number(worst_random) +
         " on random q");

  long cells = 0, reward_mismatch = 0;
  for (int k = 1; k <= 4; ++k)
    for (Variant v : {Variant::Base, Variant::NoMobilization, Variant::LowKappa})
      for (RiskMode r : {RiskMode::NextStateClosedForm, RiskMode::CurrentStateIndicator}) {
        SystemModel m = build_reference_system(4, k, v);
        m.risk_mode = r;
        const JointPomdp p = flatten_to_pomdp(m);
        for (int s = 0; s < 81; ++s)
          for (int a = 0; a < 81; ++a) {
            const ComponentStates st = decode_joint(s, 4);
            const JointAction ja = decode_joint_action(a, 4);
            ++cells;
            if (p.reward(s, a) != -step_cost(std::span<const int>(st.data(), st.size()),
                                             std::span<const ComponentAction>(ja.data(), ja.size()), m))
              ++reward_mismatch;
          }
      }
  ok &= reward_mismatch == 0;
  o.note("flattened reward == -step_cost: " + std::to_string(reward_mismatch) + " mismatches over " +
         std::to_string(cells) + " cells (81x81 for every n=4 system)");
  o.pass = ok;
  return o;
}

// ---------------------------------------------------------------------------------------
double mlp_gradient_error(const std::vector<int>& layers, RandomEngine& rng) {
  nn::MlpD net(layers);
  net.init_uniform(rng);
  const MatrixXd x = random_matrix(layers.front(), 3, rng);
  const MatrixXd r = random_matrix(layers.back(), 3, rng);
  nn::MlpD::Tape tape;
  net.forward(x, tape);
  VectorXd grad = VectorXd::Zero(net.n_params());
  net.backward(tape, r, grad);
  double worst = 0.0;
  for (int i = 0; i < net.n_params(); ++i) {
    const double saved = net.params()(i);
    net.params()(i) = saved + kFiniteDiffStep;
    const double up = net.forward(x).cwiseProduct(r).sum();
    net.params()(i) = saved - kFiniteDiffStep;
    const double down = net.forward(x).cwiseProduct(r).sum();
    net.params()(i) = saved;
    const double numeric = (up - down) / (2.0 * kFiniteDiffStep);
    worst = std::max(worst, std::abs(numeric - grad(i)) / std::max({std::abs(numeric), std::abs(grad(i)), 1.0}));
  }
  return worst;
}

double mixer_gradient_error(RandomEngine& rng) {
  marl::MonotonicMixer mixer(4, 12, 32);
  mixer.init_uniform(rng);
  const MatrixXd q = random_matrix(4, 3, rng, 2.0);
  const MatrixXd s = random_matrix(12, 3, rng);
  const Eigen::RowVectorXd r = random_matrix(1, 3, rng);
  marl::MonotonicMixer::Tape tape;
  mixer.forward(q, s, tape);
  std::array<VectorXd, 4> grads;
  const MatrixXd gq = mixer.backward(tape, r, grads);
  auto loss = [&](const MatrixXd& qq) { return mixer.forward(qq, s).dot(r); };
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0}); };
  double worst = 0.0;
  for (int i = 0; i < 4; ++i) {
    VectorXd& p = mixer.nets()[static_cast<std::size_t>(i)].params();
    for (Eigen::Index j = 0; j < p.size(); ++j) {
      const double keep = p(j);
      p(j) = keep + kFiniteDiffStep;
      const double up = loss(q);
      p(j) = keep - kFiniteDiffStep;
      const double down = loss(q);
      p(j) = keep;
      worst = std::max(worst, rel(grads[static_cast<std::size_t>(i)](j), (up - down) / (2 * kFiniteDiffStep)));
    }
  }
  for (Eigen::Index j = 0; j < q.size(); ++j) {
    MatrixXd qp = q, qm = q;
    qp(j) += kFiniteDiffStep;
    qm(j) -= kFiniteDiffStep;
    worst = std::max(worst, rel(gq(j), (loss(qp) - loss(qm)) / (2 * kFiniteDiffStep)));
  }
  return worst;
}

Outcome criterion2(const Settings&) {
  Outcome o;
  bool ok = true;
  struct Column {
    marl::Algorithm alg;
    int actor, critic, mixer, total;
  };
  // Reference cells; 0 marks an absent network.
  const std::vector<Column> table = {
      {marl::Algorithm::DDQN, 0, 10257, 0, 10257},      {marl::Algorithm::JAC, 10257, 5057, 0, 15314},
      {marl::Algorithm::DCMAC, 1868, 5057, 0, 6925},    {marl::Algorithm::IACC_PS, 1411, 5057, 0, 6468},
      {marl::Algorithm::MAPPO_PS, 4867, 5057, 0, 9924}, {marl::Algorithm::VDN_PS, 0, 4867, 0, 4867},
      {marl::Algorithm::QMIX_PS, 0, 4867, 2945, 7812},  {marl::Algorithm::IAC_PS, 1411, 4737, 0, 6148},
      {marl::Algorithm::IPPO_PS, 4867, 5057, 0, 9924}};
  int cells = 0, matched = 0;
  std::set<std::vector<int>> archs;
  for (const Column& c : table) {
    const marl::NetworkLayout l = marl::network_layout(marl::default_spec(c.alg), 4, 3, 12, 7);
    const int actor = l.actor.empty() ? 0 : nn::parameter_count(l.actor);
    const int critic = l.critic.empty() ? 0 : nn::parameter_count(l.critic);
    if (!l.actor.empty()) archs.insert(l.actor);
    if (!l.critic.empty()) archs.insert(l.critic);
    const std::array<std::pair<const char*, std::pair<int, int>>, 4> checks{
        {{"actor", {actor, c.actor}}, {"critic", {critic, c.critic}}, {"mixer", {l.mixer_params, c.mixer}},
         {"total", {l.total_params(), c.total}}}};
    for (const auto& [what, v] : checks) {
      ++cells;
      if (v.first == v.second) {
        ++matched;
      } else {
        ok = false;
        o.note(marl::to_string(c.alg) + " " + what + ": built " + std::to_string(v.first) + ", tabulated " +
               std::to_string(v.second));
      }
    }
  }
  o.note("parameter counts: " + std::to_string(matched) + "/" + std::to_string(cells) + " cells match");

  RandomEngine rng(2024);
  for (const auto& a : archs) {
    const double err = mlp_gradient_error(a, rng);
    std::string name = "[";
    for (std::size_t i = 0; i < a.size(); ++i) name += (i ? "," : "") + std::to_string(a[i]);
    name += "]";
    if (!(err < kGradientTol)) ok = false;
    o.note("gradient " + name + ": max rel err " + format_number(err));
  }
  const double mix_err = mixer_gradient_error(rng);
  if (!(mix_err < kGradientTol)) ok = false;
  o.note("gradient mixer (4 agents, state 12, embed 32, 2945 params): max rel err " + format_number(mix_err));
  o.pass = ok;
  return o;
}

// ---------------------------------------------------------------------------------------
struct SolvedSystem {
  SolveResult result;
  Estimate lookahead_long;  // horizon kLongHorizon
  Estimate lookahead;       // evaluation horizon
};

Estimate lookahead_value(const SystemModel& model, const SolveResult& r, int horizon, long rollouts, int workers,
                         std::uint64_t seed) {
  auto pomdp = std::make_shared<const JointPomdp>(flatten_to_pomdp(model));
  auto lower = std::make_shared<const AlphaSet>(r.bounds.lower);
  EvalOptions eo;
  eo.horizon = horizon;
  eo.rollouts = rollouts;
  eo.seed = seed;
  eo.workers = workers;
  return evaluate_policy(
      [&] { return std::make_unique<AlphaVectorPolicy>(pomdp, lower, AlphaVectorPolicy::Mode::Lookahead); }, model, eo);
}

bool bounds_monotone(const SolveResult& r) {
  for (std::size_t i = 1; i < r.trace.size(); ++i)
    if (r.trace[i].lower < r.trace[i - 1].lower || r.trace[i].upper > r.trace[i - 1].upper) return false;
  return true;
}

// Cost interval [lower - 3 se, upper + 3 se] from reward bounds.
bool inside_bounds(const Estimate& e, const SolveResult& r) {
  const double lo = -r.bounds.upper_at_b0, hi = -r.bounds.lower_at_b0;
  return e.mean >= lo - kSigmas * e.std_error() && e.mean <= hi + kSigmas * e.std_error();
}

std::string bounds_text(const SolveResult& r) {
  return "(" + fmt(-r.bounds.upper_at_b0) + ", " + fmt(-r.bounds.lower_at_b0) + ")";
}

Outcome criterion3(const Settings& st) {
  Outcome o;
  const SystemModel model = testing::single_component_system();
  const JointPomdp p = flatten_to_pomdp(model);
  SolverOptions so;
  so.precision = 1e-5;
  so.timeout_seconds = 60.0;
  so.audit_pruning = true;
  const SolveResult r = solve(p, so);
  const double oracle = testing::grid_value_iteration(p, kOracleResolution, p.b0);
  const double diff = std::abs(r.bounds.lower_at_b0 - oracle);
  const bool monotone = bounds_monotone(r);
  const Estimate e = lookahead_value(model, r, kLongHorizon, st.rollouts, st.workers, 31);
  const bool inside = inside_bounds(e, r);
  o.note("solver " + to_string(r.status) + " in " + fmt(r.seconds, 2) + " s; lower bound " + fmt(r.bounds.lower_at_b0, 6) +
         ", grid oracle (" + std::to_string((kOracleResolution + 1) * (kOracleResolution + 2) / 2) + " points) " +
         fmt(oracle, 6) + ", |diff| " + format_number(diff));
  o.note("bounds monotone over " + std::to_string(r.trace.size()) + " trace points: " + (monotone ? "yes" : "no") +
         "; pruning audit violations " + std::to_string(r.prune_violations));
  o.note("look-ahead MC cost " + fmt(e.mean) + " (se " + fmt(e.std_error(), 4) + ", horizon " +
         std::to_string(kLongHorizon) + ", " + std::to_string(e.count) + " rollouts) vs cost bounds " + bounds_text(r));
  o.pass = diff < kOracleTol && monotone && r.prune_violations == 0 && inside;
  return o;
}

Outcome criterion4(const Settings& st) {
  Outcome o;
  bool ok = true;
  for (int k : {2, 1}) {
    const SystemModel model = build_reference_system(2, k, Variant::NoMobilization);
    const std::string tag = std::to_string(k) + "-out-of-2";
    SolverOptions so;
    so.precision = kSmallGap;
    so.timeout_seconds = st.small_timeout;
    const SolveResult r = solve(flatten_to_pomdp(model), so);
    const double gap = r.bounds.gap_at_b0();
    const Estimate e_long = lookahead_value(model, r, kLongHorizon, st.rollouts, st.workers, 41);
    const Estimate e = lookahead_value(model, r, kEvalHorizon, st.rollouts, st.workers, 43);
    EvalOptions eo;
    eo.rollouts = st.rollouts / 5;
    eo.seed = 47;
    eo.workers = st.workers;
    const GridResult g = grid_search(model, eo, 20);
    const Estimate h = g.best_cell().value;
    const double se = std::sqrt(h.std_error() * h.std_error() + e.std_error() * e.std_error());
    const bool gap_ok = gap <= kSmallGap, inside = inside_bounds(e_long, r), heur_ok = h.mean >= e.mean - kSigmas * se;
    ok &= gap_ok && inside && heur_ok;
    o.note(tag + ": " + to_string(r.status) + " in " + fmt(r.seconds, 1) + " s, cost bounds " + bounds_text(r) +
           ", gap " + fmt(gap, 4));
    o.note(tag + ": look-ahead MC " + fmt(e_long.mean) + " (se " + fmt(e_long.std_error(), 4) + ", horizon " +
           std::to_string(kLongHorizon) + ") inside bounds: " + (inside ? "yes" : "no"));
    o.note(tag + ": horizon-" + std::to_string(kEvalHorizon) + " look-ahead " + fmt(e.mean) + ", heuristic best " +
           fmt(h.mean) + " (interval " + std::to_string(g.best_cell().params.inspect_interval) + ") >= solver - 3se: " +
           (heur_ok ? "yes" : "no"));
  }
  o.pass = ok;
  return o;
}

// ---------------------------------------------------------------------------------------
Outcome criterion7(const Settings&) {
  using namespace analysis;
  Outcome o;
  bool ok = true;
  for (const MatrixGame2x2& g : {MatrixGame2x2::parallel(50, 30, 240), MatrixGame2x2::series(50, 30, 240)}) {
    const VdnDecomposition cf = vdn_closed_form(g);
    const VdnDecomposition ls = vdn_least_squares(g);
    const bool gaps = std::abs(cf.gap[0] + 70) <= kGapFactorTol && std::abs(cf.gap[1] + 90) <= kGapFactorTol;
    const bool agree = std::abs(ls.gap[0] - cf.gap[0]) <= kGapFactorTol && std::abs(ls.gap[1] - cf.gap[1]) <= kGapFactorTol &&
                       (ls.fitted - cf.fitted).cwiseAbs().maxCoeff() <= kGapFactorTol;
    const bool greedy = cf.greedy == std::array<int, 2>{kRep, kRep} && ls.greedy == cf.greedy;
    const QmixVerdict q = qmix_representability(g);
    const Representability want = g.name == "series" ? Representability::Representable : Representability::NotRepresentable;
    ok &= gaps && agree && greedy && q.verdict == want;
    o.note(g.name + ": closed-form gaps (" + fmt(cf.gap[0], 4) + ", " + fmt(cf.gap[1], 4) + "), least squares (" +
           fmt(ls.gap[0], 4) + ", " + fmt(ls.gap[1], 4) + "), greedy (" + game_action_name(cf.greedy[0]) + ", " +
           game_action_name(cf.greedy[1]) + "), optimum (" + game_action_name(g.optimum()[0]) + ", " +
           game_action_name(g.optimum()[1]) + "), QMIX " + to_string(q.verdict));
  }
  o.pass = ok;
  return o;
}

// ---------------------------------------------------------------------------------------
void collect_files(const fs::path& root, std::map<std::string, std::string>& out) {
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), root).string()] = ss.str();
  }
}

Outcome criterion9(const Settings&) {
  Outcome o;
  const fs::path base = fs::temp_directory_path() / ("kofn_acceptance_det_" + std::to_string(::getpid()));
  fs::remove_all(base);
  const SystemModel sys = build_reference_system(2, 1, Variant::NoMobilization);

  std::vector<app::ExperimentConfig> configs;
  {
    app::ExperimentConfig c;
    c.command = "solve";
    c.system = sys;
    c.max_backups = 400;
    c.timeout = 600;
    c.rollouts = 2000;
    configs.push_back(c);
    c.command = "heuristic";
    c.max_interval = 5;
    configs.push_back(c);
  }
  for (const char* alg : {"ddqn", "qmix-ps", "iacc-ps", "ippo-ps"}) {
    app::ExperimentConfig c;
    c.command = "train";
    c.system = sys;
    c.algorithm = alg;
    c.seeds = {0, 1};
    const bool ppo = std::string(alg) == "ippo-ps";
    c.budget = ppo ? 4096 : 60;
    c.eval_interval = ppo ? 2048 : 30;
    c.rollouts = 300;
    configs.push_back(c);
  }
  {
    app::ExperimentConfig c;
    c.command = "train";
    c.environment = "climb";
    c.algorithm = "vdn-ps";
    c.seeds = {0, 1, 2};
    c.budget = 60;
    c.eval_interval = 20;
    configs.push_back(c);
  }

  std::array<std::map<std::string, std::string>, 2> files;
  std::array<std::string, 2> tables;
  for (int rep = 0; rep < 2; ++rep) {
    const fs::path root = base / ("store_" + std::to_string(rep));
    app::CommandContext ctx{app::RunStore(root), rep == 0 ? 1 : 2, nullptr, true};
    for (const auto& c : configs) app::run_command(c, ctx);
    collect_files(root, files[static_cast<std::size_t>(rep)]);
    std::ostringstream t;
    for (const char* table : {"table2", "table3", "fig5", "fig7"}) app::cmd_reproduce(table, ctx.store, {}, t);
    tables[static_cast<std::size_t>(rep)] = t.str();
  }
  fs::remove_all(base);

  // Wall-clock fields of the solver output are the only timing-dependent artifacts.
  auto timing = [](const std::string& name) {
    return name.find("trace.csv") != std::string::npos || name.find("bounds.csv") != std::string::npos;
  };
  int compared = 0, differing = 0, checkpoints = 0, metrics = 0;
  for (const auto& [name, bytes] : files[0]) {
    if (timing(name)) continue;
    ++compared;
    if (name.ends_with(".ckpt")) ++checkpoints;
    if (name.find("metrics/") != std::string::npos) ++metrics;
    auto it = files[1].find(name);
    if (it == files[1].end() || it->second != bytes) {
      ++differing;
      o.note("differs: " + name);
    }
  }
  const bool same_set = files[0].size() == files[1].size();
  const bool tables_same = tables[0] == tables[1] && !tables[0].empty();
  o.note("two runs of " + std::to_string(configs.size()) + " configurations (1 vs 2 workers): " + std::to_string(compared) +
         " artifacts compared (" + std::to_string(checkpoints) + " checkpoints, " + std::to_string(metrics) +
         " metrics CSVs), " + std::to_string(differing) + " differ; reproduced tables identical: " +
         (tables_same ? "yes" : "no"));
  o.pass = differing == 0 && same_set && tables_same && checkpoints > 0 && metrics > 0;
  return o;
}

// ---------------------------------------------------------------------------------------
// Long tier: artifacts go through the run store so that `kofn reproduce` sees them.

struct StoredEval {
  double mean = 0, ci_lower = 0, ci_upper = 0, std_dev = 0;
  long count = 0;
  double se() const { return count > 0 ? std_dev / std::sqrt(double(count)) : 0.0; }
};

StoredEval read_eval(const app::RunStore::Run& run) {
  std::ifstream in(run.dir / "eval.csv");
  std::stringstream ss;
  ss << in.rdbuf();
  const auto rows = parse_csv(ss.str());
  if (rows.size() < 2) throw std::runtime_error("no eval.csv in " + run.dir.string());
  const auto& f = rows[1];
  StoredEval e;
  e.mean = std::stod(f[2]);
  e.ci_lower = std::stod(f[3]);
  e.ci_upper = std::stod(f[4]);
  e.std_dev = std::stod(f[5]);
  e.count = std::stol(f[6]);
  return e;
}

std::pair<double, double> read_cost_bounds(const app::RunStore::Run& run) {
  std::ifstream in(run.dir / "bounds.csv");
  std::stringstream ss;
  ss << in.rdbuf();
  const auto rows = parse_csv(ss.str());
  return {std::stod(rows.at(1).at(0)), std::stod(rows.at(1).at(1))};
}

app::CommandContext long_context(const Settings& st) {
  return app::CommandContext{app::RunStore(st.runs), st.workers, &std::cerr, true};
}

app::ExperimentConfig solve_config(int k, RiskMode mode, const Settings& st) {
  app::ExperimentConfig c;
  c.command = "solve";
  c.system = build_reference_system(4, k, Variant::Base);
  c.system.risk_mode = mode;
  c.timeout = st.solve_timeout;
  c.precision = 1e-2;
  c.rollouts = st.rollouts;
  return c;
}

app::ExperimentConfig heuristic_config(int k, RiskMode mode, const Settings& st) {
  app::ExperimentConfig c = solve_config(k, mode, st);
  c.command = "heuristic";
  c.max_interval = 20;
  return c;
}

bool within_target(double value, double target, double ci_lo, double ci_hi) {
  const double half = 0.5 * (ci_hi - ci_lo);
  return std::abs(value - target) <= half + kTargetRelTol * target;
}

Outcome criterion5(const Settings& st) {
  Outcome o;
  struct Target {
    int k;
    double solver, s_lo, s_hi, heuristic, h_lo, h_hi;
  };
  const std::vector<Target> targets = {{4, 747.54, 745.92, 749.15, 913.03, 911.36, 914.70},
                                       {1, 50.41, 50.31, 50.51, 70.19, 70.12, 70.25}};
  const app::CommandContext ctx = long_context(st);
  bool properties = true;
  std::map<RiskMode, bool> matches{{RiskMode::NextStateClosedForm, true}, {RiskMode::CurrentStateIndicator, true}};
  for (RiskMode mode : {RiskMode::NextStateClosedForm, RiskMode::CurrentStateIndicator}) {
    for (const Target& t : targets) {
      const auto solve_run = app::cmd_solve(solve_config(t.k, mode, st), ctx);
      const auto heur_run = app::cmd_heuristic(heuristic_config(t.k, mode, st), ctx);
      const StoredEval s = read_eval(solve_run), h = read_eval(heur_run);
      const auto [lo, hi] = read_cost_bounds(solve_run);
      const bool s_match = within_target(s.mean, t.solver, t.s_lo, t.s_hi);
      const bool h_match = within_target(h.mean, t.heuristic, t.h_lo, t.h_hi);
      matches[mode] = matches[mode] && s_match && h_match;
      const bool order = h.mean >= s.mean - kSigmas * std::sqrt(s.se() * s.se() + h.se() * h.se());
      // The stored estimate uses the evaluation horizon; the bounds are infinite-horizon, so the
      // sandwich uses a long-horizon re-evaluation of the stored policy.
      app::ExperimentConfig ev = solve_config(t.k, mode, st);
      ev.command = "evaluate";
      ev.policy = (solve_run.dir / "policy.txt").string();
      ev.horizon = kLongHorizon;
      ev.rollouts = st.rollouts / 10;
      const StoredEval sl = read_eval(app::cmd_evaluate(ev, ctx));
      const bool sandwich = sl.mean >= lo - kSigmas * sl.se() && sl.mean <= hi + kSigmas * sl.se();
      properties = properties && order && sandwich;
      const std::string tag = std::to_string(t.k) + "-out-of-4 " + to_string(mode);
      o.note(tag + ": solver MC " + fmt(s.mean, 2) + " (" + fmt(s.ci_lower, 2) + ", " + fmt(s.ci_upper, 2) +
             ") target " + fmt(t.solver, 2) + (s_match ? " match" : " miss") + "; heuristic " + fmt(h.mean, 2) +
             " target " + fmt(t.heuristic, 2) + (h_match ? " match" : " miss"));
      o.note(tag + ": cost bounds (" + fmt(lo, 2) + ", " + fmt(hi, 2) + "), horizon-" + std::to_string(kLongHorizon) +
             " MC " + fmt(sl.mean, 2) + " sandwiched: " + (sandwich ? "yes" : "no") + "; heuristic >= solver: " +
             (order ? "yes" : "no"));
    }
  }
  for (const auto& [mode, m] : matches)
    o.note(std::string("interpretation ") + to_string(mode) + (m ? " matches all targets" : " misses at least one target"));
  o.pass = properties && (matches[RiskMode::NextStateClosedForm] || matches[RiskMode::CurrentStateIndicator]);
  if (!properties) o.note("property fallback violated");
  return o;
}

Outcome criterion6(const Settings& st) {
  Outcome o;
  const app::CommandContext ctx = long_context(st);
  std::vector<std::uint64_t> seeds;
  for (int s = 0; s < st.climb_seeds; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
  std::map<std::string, std::vector<double>> best;
  std::map<std::string, std::vector<std::array<int, 2>>> greedy;
  for (const char* alg : {"ddqn", "jac", "dcmac", "vdn-ps", "qmix-ps"}) {
    app::ExperimentConfig c;
    c.command = "train";
    c.environment = "climb";
    c.algorithm = alg;
    c.seeds = seeds;
    c.budget = st.climb_budget;
    c.eval_interval = st.climb_budget / 20;
    const auto run = app::cmd_train(c, ctx);
    for (std::uint64_t s : seeds) {
      const fs::path ck = run.dir / "best" / ("seed_" + std::to_string(s) + ".ckpt");
      if (!fs::exists(ck)) {
        best[alg].push_back(-1e9);
        continue;
      }
      const marl::AgentNetworks nets = marl::networks_from_checkpoint(nn::Checkpoint::load(ck.string()));
      best[alg].push_back(marl::climb_expected_return(nets));
      if (marl::is_value_based(nets.algorithm()) && nets.algorithm() != marl::Algorithm::DDQN)
        greedy[alg].push_back(analysis::climb_decomposition_report(nets).greedy);
    }
  }
  auto share = [&](const std::string& alg, double v) {
    const auto& b = best[alg];
    return double(std::count_if(b.begin(), b.end(), [&](double x) { return std::abs(x - v) < 1e-6; })) / double(b.size());
  };
  auto mode_of = [&](const std::string& alg) {
    std::map<long, int> counts;
    for (double x : best[alg]) ++counts[std::lround(x)];
    return std::max_element(counts.begin(), counts.end(), [](auto& a, auto& b) { return a.second < b.second; })->first;
  };
  auto histogram = [&](const std::string& alg) {
    std::map<long, int> counts;
    for (double x : best[alg]) ++counts[std::lround(x)];
    std::string s;
    for (auto it = counts.rbegin(); it != counts.rend(); ++it)
      s += (s.empty() ? "" : ", ") + std::to_string(it->first) + " x" + std::to_string(it->second);
    return s;
  };
  const bool ddqn = share("ddqn", 275) >= 0.8, jac = share("jac", 275) >= 0.8;
  const bool dcmac = mode_of("dcmac") == 175;
  int vdn_cell = 0;
  for (std::size_t i = 0; i < greedy["vdn-ps"].size(); ++i)
    if (std::abs(best["vdn-ps"][i] - 150) < 1e-6 && greedy["vdn-ps"][i] == std::array<int, 2>{2, 1}) ++vdn_cell;
  const bool vdn = mode_of("vdn-ps") == 150 && vdn_cell == static_cast<int>(std::lround(share("vdn-ps", 150) * st.climb_seeds));
  const bool qmix = share("qmix-ps", 275) <= 0.2 && mode_of("qmix-ps") != 275;
  for (const char* alg : {"ddqn", "jac", "dcmac", "vdn-ps", "qmix-ps"})
    o.note(std::string(alg) + " best returns over " + std::to_string(st.climb_seeds) + " seeds: " + histogram(alg));
  o.note("DDQN 275 share " + fmt(share("ddqn", 275), 2) + (ddqn ? " ok" : " < 0.80") + "; JAC " + fmt(share("jac", 275), 2) +
         (jac ? " ok" : " < 0.80"));
  o.note("DCMAC modal " + std::to_string(mode_of("dcmac")) + (dcmac ? " ok" : " (want 175)"));
  o.note("VDN-PS modal " + std::to_string(mode_of("vdn-ps")) + ", seeds at 150 with greedy (a3,a2): " +
         std::to_string(vdn_cell) + (vdn ? " ok" : " (want modal 150 at (a3,a2))"));
  o.note("QMIX-PS 275 share " + fmt(share("qmix-ps", 275), 2) + ", modal " + std::to_string(mode_of("qmix-ps")) +
         (qmix ? " ok" : " (want share <= 0.20, not modal)"));
  o.note("desk budget " + std::to_string(st.climb_budget) + " episodes per seed (epsilon decay span scaled accordingly)");
  o.pass = ddqn && jac && dcmac && vdn && qmix;
  return o;
}

Outcome criterion8(const Settings& st) {
  Outcome o;
  const app::CommandContext ctx = long_context(st);
  std::vector<std::uint64_t> seeds;
  for (int s = 0; s < st.trend_seeds; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
  auto normalized_best = [&](int k, const char* alg) {
    const double solver = read_eval(app::cmd_solve(solve_config(k, RiskMode::NextStateClosedForm, st), ctx)).mean;
    app::ExperimentConfig c;
    c.command = "train";
    c.system = build_reference_system(4, k, Variant::Base);
    c.algorithm = alg;
    c.seeds = seeds;
    const bool ppo = marl::is_on_policy(marl::parse_algorithm(alg));
    c.budget = ppo ? st.trend_steps : st.trend_episodes;
    c.eval_interval = c.budget / 10;
    c.rollouts = st.trend_rollouts;
    const double v = read_eval(app::cmd_train(c, ctx)).mean;
    o.note(std::to_string(k) + "-out-of-4 " + alg + ": best " + fmt(v, 2) + " / solver " + fmt(solver, 2) + " = " +
           fmt(v / solver, 4));
    return v / solver;
  };
  const double vdn = normalized_best(4, "vdn-ps"), qmix = normalized_best(4, "qmix-ps");
  const double iac = normalized_best(1, "iac-ps"), ippo = normalized_best(1, "ippo-ps");
  const bool central = vdn <= kTrendCentral && qmix <= kTrendCentral;
  const bool decentral = std::min(iac, ippo) >= kTrendDecentral;
  o.note(std::string("4-out-of-4 factorized <= ") + fmt(kTrendCentral, 2) + ": " + (central ? "yes" : "no") +
         "; 1-out-of-4 best decentralized >= " + fmt(kTrendDecentral, 2) + ": " + (decentral ? "yes" : "no"));
  o.pass = central && decentral;
  return o;
}

using Criterion = Outcome (*)(const Settings&);
const std::map<int, std::pair<Criterion, const char*>> kCriteria = {
    {1, {criterion1, "exact-model properties"}},   {2, {criterion2, "gradient correctness and parameter counts"}},
    {3, {criterion3, "solver sanity"}},            {4, {criterion4, "small-system baseline"}},
    {5, {criterion5, "maintenance baselines"}},    {6, {criterion6, "Climb Game reproduction"}},
    {7, {criterion7, "matrix-game factorization"}}, {8, {criterion8, "desk-scale learning trend"}},
    {9, {criterion9, "determinism"}}};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  Settings st;
  std::string tier = "fast", report;
  std::vector<int> only, expect_fail;
  app.add_option("--tier", tier, "fast | long | all")->check(CLI::IsMember({"fast", "long", "all"}));
  app.add_option("--criteria", only, "Explicit criterion numbers")->delimiter(',');
  app.add_option("--expect-fail", expect_fail, "Criteria known to fail (listed in the decisions log)")->delimiter(',');
  app.add_option("--runs", st.runs, "Run store of the long tier");
  app.add_option("--workers", st.workers, "Worker threads");
  app.add_option("--report", report, "Append the PASS/FAIL lines here");
  app.add_option("--rollouts", st.rollouts, "Monte Carlo rollouts");
  app.add_option("--small-timeout", st.small_timeout, "Solver limit per small system (s)");
  app.add_option("--solve-timeout", st.solve_timeout, "Solver limit per maintenance system (s)");
  app.add_option("--climb-seeds", st.climb_seeds);
  app.add_option("--climb-budget", st.climb_budget);
  app.add_option("--trend-seeds", st.trend_seeds);
  app.add_option("--trend-episodes", st.trend_episodes);
  app.add_option("--trend-steps", st.trend_steps);
  app.add_option("--trend-rollouts", st.trend_rollouts);
  CLI11_PARSE(app, argc, argv);
  st.workers = worker_count(st.workers);

  std::vector<int> selected = only;
  if (selected.empty()) {
    if (tier != "long") selected.insert(selected.end(), {1, 2, 3, 4, 7, 9});
    if (tier != "fast") selected.insert(selected.end(), {5, 6, 8});
    std::sort(selected.begin(), selected.end());
  }

  std::set<int> failed;
  bool errored = false;
  std::ostringstream lines;
  for (int id : selected) {
    const auto it = kCriteria.find(id);
    if (it == kCriteria.end()) {
      std::cerr << "unknown criterion " << id << '\n';
      return 2;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    std::string error;
    try {
      out = it->second.first(st);
    } catch (const std::exception& e) {
      error = e.what();
      errored = true;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!out.pass) failed.insert(id);
    std::ostringstream line;
    line << "criterion " << id << ": " << (out.pass ? "PASS" : "FAIL") << "  " << it->second.second << " ("
         << format_fixed(secs, 1) << " s)";
    if (!error.empty()) line << "  error: " << error;
    std::cout << line.str() << '\n';
    for (const auto& n : out.notes) std::cout << "    " << n << '\n';
    std::cout.flush();
    lines << line.str() << '\n';
  }
  if (!report.empty()) std::ofstream(report, std::ios::app) << lines.str();

  const std::set<int> expected(expect_fail.begin(), expect_fail.end());
  std::set<int> expected_selected;
  for (int id : expected)
    if (std::find(selected.begin(), selected.end(), id) != selected.end()) expected_selected.insert(id);
  if (errored) return 2;
  if (failed != expected_selected) {
    std::cout << "failing set differs from the expected set\n";
    return 1;
  }
  return 0;
}
