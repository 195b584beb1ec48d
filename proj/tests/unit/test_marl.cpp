#include "doctest.h"

#include "kofn/env/climb_game.hpp"
#include "kofn/marl/envs.hpp"
#include "kofn/marl/learn.hpp"
#include "kofn/marl/mixer.hpp"
#include "kofn/marl/replay.hpp"
#include "kofn/marl/spec.hpp"
#include "kofn/marl/trainer.hpp"
#include "kofn/nn/softmax.hpp"

#include <cmath>
#include <limits>
#include <sstream>

using namespace kofn;
using namespace kofn::marl;

namespace {

MatrixXd random_matrix(int rows, int cols, RandomEngine& rng, double scale = 1.0) {
  MatrixXd m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = scale * (2.0 * uniform01(rng) - 1.0);
  return m;
}

std::string bytes(const nn::Checkpoint& c) {
  std::ostringstream os;
  c.write(os);
  return os.str();
}

AgentSpec short_climb(Algorithm a, long budget) {
  AgentSpec s = climb_spec(a);
  s.budget = budget;
  s.eval_interval = budget / 2;
  s.batch_size = 8;
  if (is_on_policy(a)) {
    s.ppo.n_envs = 2;
    s.ppo.rollout_steps = 16;
    s.ppo.minibatches = 2;
  } else {
    s.scale_exploration(1e-3);
  }
  return s;
}

// Stateless one-agent task whose reward is NaN.
class NanEnv final : public MarlEnv {
 public:
  int n_agents() const override { return 1; }
  int n_actions() const override { return 2; }
  int global_dim() const override { return 1; }
  int local_dim() const override { return 2; }
  int truncation() const override { return 4; }
  double gamma() const override { return 0.9; }
  void reset(std::uint64_t) override { t_ = 0; }
  double step(std::span<const int>) override {
    ++t_;
    return std::numeric_limits<double>::quiet_NaN();
  }
  int t() const override { return t_; }
  void global_input(Eigen::Ref<VectorXd> out) const override { out.setZero(); }
  void local_input(int, Eigen::Ref<VectorXd> out) const override { out << 0.0, 1.0; }
  std::unique_ptr<MarlEnv> clone() const override { return std::make_unique<NanEnv>(*this); }
  void save(nn::Checkpoint& c, const std::string& p) const override { c.put_integer(p + "t", t_); }
  void load(const nn::Checkpoint& c, const std::string& p) override { t_ = static_cast<int>(c.integer(p + "t")); }

 private:
  int t_ = 0;
};

}  // namespace

TEST_SUITE("marl") {
  TEST_CASE("algorithm names round trip") {
    for (Algorithm a : kAllAlgorithms) CHECK(parse_algorithm(to_string(a)) == a);
    CHECK(parse_algorithm("QMIX_PS") == Algorithm::QMIX_PS);
    CHECK_THROWS(parse_algorithm("sarsa"));
  }

  TEST_CASE("mixer parameter count") {
    CHECK(MonotonicMixer(4, 12, 32).n_params() == 2945);
    AgentSpec s = default_spec(Algorithm::QMIX_PS);
    CHECK(network_layout(s, 4, 3, 12, 7).mixer_params == 2945);
  }

  TEST_CASE("mixer is monotone in every utility") {
    RandomEngine rng(11);
    MonotonicMixer mixer(4, 12, 32);
    mixer.init_uniform(rng);
    int violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      const MatrixXd s = random_matrix(12, 1, rng);
      MatrixXd q = random_matrix(4, 1, rng, 10.0);
      const double base = mixer.forward(q, s)(0);
      const int m = trial % 4;
      q(m, 0) += 0.5 + 5.0 * uniform01(rng);
      if (mixer.forward(q, s)(0) < base - 1e-12) ++violations;
    }
    CHECK(violations == 0);
  }

  TEST_CASE("mixer gradient matches finite differences") {
    RandomEngine rng(5);
    MonotonicMixer mixer(3, 5, 8);
    mixer.init_uniform(rng);
    const MatrixXd q = random_matrix(3, 4, rng, 2.0);
    const MatrixXd s = random_matrix(5, 4, rng);
    const Eigen::RowVectorXd r = random_matrix(1, 4, rng);
    MonotonicMixer::Tape tape;
    mixer.forward(q, s, tape);
    std::array<VectorXd, 4> grads;
    const MatrixXd gq = mixer.backward(tape, r, grads);
    auto loss = [&](const MatrixXd& qq) { return mixer.forward(qq, s).dot(r); };
    const double h = 1e-6;
    double worst = 0.0;
    for (int i = 0; i < 4; ++i) {
      VectorXd& p = mixer.nets()[static_cast<std::size_t>(i)].params();
      for (Eigen::Index j = 0; j < p.size(); ++j) {
        const double keep = p(j);
        p(j) = keep + h;
        const double up = loss(q);
        p(j) = keep - h;
        const double down = loss(q);
        p(j) = keep;
        const double num = (up - down) / (2 * h);
        const double a = grads[static_cast<std::size_t>(i)](j);
        worst = std::max(worst, std::abs(a - num) / std::max({std::abs(a), std::abs(num), 1.0}));
      }
    }
    for (Eigen::Index j = 0; j < q.size(); ++j) {
      MatrixXd qp = q, qm = q;
      qp(j) += h;
      qm(j) -= h;
      const double num = (loss(qp) - loss(qm)) / (2 * h);
      worst = std::max(worst, std::abs(gq(j) - num) / std::max({std::abs(gq(j)), std::abs(num), 1.0}));
    }
    CHECK(worst < 1e-5);
  }

  TEST_CASE("linear sum") {
    MatrixXd u(4, 1);
    u << 1, 2, 3, 4;
    CHECK(linear_sum(u)(0) == 10.0);
  }

  TEST_CASE("double-Q targets") {
    MatrixXd online(3, 2), target(3, 2);
    online << 1, 0, 5, 2, 3, 9;
    target << 10, 20, 30, 40, 50, 60;
    VectorXd r(2);
    r << 1.0, -2.0;
    VectorXd y = q_targets_double(online, target, r, 0.5);
    CHECK(y(0) == doctest::Approx(1.0 + 0.5 * 30));
    CHECK(y(1) == doctest::Approx(-2.0 + 0.5 * 60));
    CHECK(q_targets_double(online, target, r, 0.0) == r);
    y = q_targets_double(online, online, r, 0.5);
    CHECK(y(0) == doctest::Approx(1.0 + 0.5 * 5));
    CHECK(y(1) == doctest::Approx(-2.0 + 0.5 * 9));
  }

  TEST_CASE("decentralized greedy selection") {
    VectorXd a(3), b(3), c(3);
    a << 5, 1, 0;
    b << 0, 0, 9;
    CHECK(greedy_decentralized({a, b}) == std::vector<int>{0, 2});
    c << 2, 7, 7;
    CHECK(greedy_decentralized({c}) == std::vector<int>{1});
  }

  TEST_CASE("joint action encoding") {
    std::vector<int> t{2, 0, 1, 1};
    const int j = encode_joint(t, 3);
    CHECK(j == 2 + 0 * 3 + 1 * 9 + 1 * 27);
    std::vector<int> back(4);
    decode_joint(j, 3, back);
    CHECK(back == t);
  }

  TEST_CASE("clipped surrogate") {
    CHECK(ppo_clip_term(1.5, 1.0, 0.2) == doctest::Approx(1.2));
    CHECK(ppo_clip_term(0.5, -1.0, 0.2) == doctest::Approx(-0.8));
    CHECK(ppo_clip_term(1.1, 2.0, 0.2) == doctest::Approx(2.2));
    CHECK(ppo_clip_term(1.5, -1.0, 0.2) == doctest::Approx(-1.5));
  }

  TEST_CASE("GAE limits") {
    RandomEngine rng(2);
    const int T = 6;
    const double gamma = 0.8;
    VectorXd r = random_matrix(T, 1, rng, 3.0), v = random_matrix(T, 1, rng, 3.0);
    VectorXd vn(T);
    for (int t = 0; t + 1 < T; ++t) vn(t) = v(t + 1);
    vn(T - 1) = 0.7;
    std::vector<bool> ends(T, false);
    const GaeResult td = gae(r, v, vn, ends, gamma, 0.0);
    for (int t = 0; t < T; ++t) CHECK(td.advantages(t) == doctest::Approx(r(t) + gamma * vn(t) - v(t)));
    const GaeResult mc = gae(r, v, vn, ends, gamma, 1.0);
    for (int t = 0; t < T; ++t) {
      double g = 0.7 * std::pow(gamma, T - t);
      for (int u = t; u < T; ++u) g += std::pow(gamma, u - t) * r(u);
      CHECK(mc.advantages(t) == doctest::Approx(g - v(t)));
      CHECK(mc.returns(t) == doctest::Approx(g));
    }
    ends[2] = true;
    const GaeResult cut = gae(r, v, vn, ends, gamma, 1.0);
    CHECK(cut.advantages(2) == doctest::Approx(r(2) + gamma * vn(2) - v(2)));
  }

  TEST_CASE("two-head policy gradient is the sum of per-head gradients") {
    RandomEngine rng(9);
    nn::MlpD actor({4, 8, 6});
    actor.init_uniform(rng);
    const MatrixXd x = random_matrix(4, 5, rng);
    MatrixXi acts(2, 5);
    MatrixXi head0(1, 5), head1(1, 5);
    for (int i = 0; i < 5; ++i) {
      acts(0, i) = head0(0, i) = i % 3;
      acts(1, i) = head1(0, i) = (i + 1) % 3;
    }
    const VectorXd w = random_matrix(5, 1, rng);
    const MatrixXd logits = actor.forward(x);
    const MatrixXd joint = policy_logit_grad(logits, acts, w, 2);
    const MatrixXd g0 = policy_logit_grad(logits.topRows(3), head0, w, 1);
    const MatrixXd g1 = policy_logit_grad(logits.bottomRows(3), head1, w, 1);
    CHECK((joint.topRows(3) - g0).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((joint.bottomRows(3) - g1).cwiseAbs().maxCoeff() < 1e-14);

    // Finite-difference check of the log-likelihood gradient.
    auto nll = [&](const MatrixXd& z) {
      double s = 0.0;
      for (int i = 0; i < 5; ++i)
        for (int h = 0; h < 2; ++h) s -= w(i) * nn::log_softmax(z.col(i).segment(3 * h, 3))(acts(h, i));
      return s;
    };
    for (Eigen::Index j = 0; j < logits.size(); ++j) {
      MatrixXd up = logits, down = logits;
      up(j) += 1e-6;
      down(j) -= 1e-6;
      CHECK(joint(j) == doctest::Approx((nll(up) - nll(down)) / 2e-6).epsilon(1e-6));
    }
    CHECK(policy_gradient(actor, x, acts, VectorXd::Zero(5), 2).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("shared networks distinguish agents only through the id") {
    KofnMarlEnv env(build_reference_system(4, 4, Variant::Base));
    env.reset(3);
    VectorXd o0(env.local_dim()), o1(env.local_dim());
    env.local_input(0, o0);
    env.local_input(1, o1);
    CHECK(o0.head(3) == o1.head(3));
    CHECK(o0.tail(4) == VectorXd::Unit(4, 0));
    CHECK(o1.tail(4) == VectorXd::Unit(4, 1));
    AgentNetworks nets(default_spec(Algorithm::VDN_PS), 4, 3, env.global_dim(), env.local_dim());
    RandomEngine rng(1);
    nets.init(rng);
    MatrixXd both(env.local_dim(), 2);
    both << o0, o1;
    const MatrixXd u = nets.utilities(both);
    CHECK((u.col(0) - u.col(1)).norm() > 0.0);
    both.col(1) = o0;
    const MatrixXd same = nets.utilities(both);
    CHECK(same.col(0) == same.col(1));
  }

  TEST_CASE("network layouts") {
    const int n = 4, na = 3, G = 12, L = 7;
    auto total = [&](Algorithm a) { return network_layout(default_spec(a), n, na, G, L).total_params(); };
    CHECK(total(Algorithm::DDQN) == 10257);
    CHECK(total(Algorithm::JAC) == 15314);
    CHECK(total(Algorithm::DCMAC) == 6925);
    CHECK(total(Algorithm::IACC_PS) == 6468);
    CHECK(total(Algorithm::VDN_PS) == 4867);
    CHECK(total(Algorithm::QMIX_PS) == 7812);
    CHECK(total(Algorithm::IAC_PS) == 6148);
    CHECK(total(Algorithm::MAPPO_PS) == 9924);
    const NetworkLayout ippo = network_layout(default_spec(Algorithm::IPPO_PS), n, na, G, L);
    CHECK(ippo.critic == std::vector<int>{7, 64, 64, 1});
    CHECK(nn::parameter_count(ippo.critic) == 4737);
  }

  TEST_CASE("exploration schedule endpoints") {
    for (Algorithm a : kAllAlgorithms) {
      const AgentSpec s = default_spec(a);
      if (is_on_policy(a)) {
        CHECK(s.epsilon(0) == 0.0);
        continue;
      }
      CHECK(s.epsilon(0) == 1.0);
      CHECK(s.epsilon(s.epsilon.span) == s.epsilon.end);
      CHECK(s.epsilon(10 * s.epsilon.span) == s.epsilon.end);
    }
    AgentSpec s = default_spec(Algorithm::DCMAC);
    CHECK(s.epsilon.end == 0.001);
    s.scale_exploration(0.02);
    CHECK(s.epsilon.span == 400);
    CHECK(s.actor_lr.span == 10000);
  }

  TEST_CASE("climb evaluation is exact") {
    AgentNetworks nets(default_spec(Algorithm::DDQN), 2, 3, 1, 3);
    nets.critic.params().setZero();
    // Only the output bias of joint index 1*3+1 = (a2, a2) is positive.
    nets.critic.bias(nets.critic.n_layers() - 1)(4) = 1.0;
    CHECK(climb_expected_return(nets) == doctest::Approx(25 * climb_step(1, 1)));
  }

  TEST_CASE("training is deterministic per seed") {
    for (Algorithm a : {Algorithm::DDQN, Algorithm::DCMAC, Algorithm::QMIX_PS, Algorithm::MAPPO_PS}) {
      CAPTURE(to_string(a));
      ClimbMarlEnv env;
      const AgentSpec spec = short_climb(a, is_on_policy(a) ? 128 : 8);
      Trainer x(spec, env, 42), y(spec, env, 42), z(spec, env, 43);
      x.run_budget();
      y.run_budget();
      z.run_budget();
      CHECK(bytes(x.policy_checkpoint()) == bytes(y.policy_checkpoint()));
      CHECK(bytes(x.policy_checkpoint()) != bytes(z.policy_checkpoint()));
    }
  }

  TEST_CASE("resume from a full state is bit-identical") {
    for (Algorithm a : {Algorithm::DDQN, Algorithm::IACC_PS, Algorithm::QMIX_PS, Algorithm::IPPO_PS}) {
      CAPTURE(to_string(a));
      KofnMarlEnv env(build_reference_system(2, 1, Variant::NoMobilization));
      AgentSpec spec = default_spec(a);
      spec.batch_size = is_on_policy(a) ? spec.batch_size : 16;
      if (is_on_policy(a)) {
        spec.ppo.n_envs = 2;
        spec.ppo.rollout_steps = 20;
        spec.ppo.minibatches = 2;
      }
      const long half = is_on_policy(a) ? 80 : 3, full = 2 * half;
      spec.budget = full;
      spec.eval_interval = half;
      Trainer straight(spec, env, 7), first(spec, env, 7);
      straight.run(full);
      first.run(half);
      std::stringstream io;
      first.state().write(io);
      Trainer resumed(spec, env, 7);
      resumed.restore(nn::Checkpoint::read(io));
      resumed.run(full);
      CHECK(bytes(resumed.state()) == bytes(straight.state()));
    }
  }

  TEST_CASE("policy checkpoint restores the acting networks") {
    ClimbMarlEnv env;
    Trainer t(short_climb(Algorithm::JAC, 4), env, 3);
    t.run_budget();
    const AgentNetworks back = networks_from_checkpoint(t.policy_checkpoint());
    CHECK(back.algorithm() == Algorithm::JAC);
    CHECK(back.actor.params() == t.networks().actor.params());
    CHECK(climb_expected_return(back) == climb_expected_return(t.networks()));
  }

  TEST_CASE("non-finite losses abort training") {
    NanEnv env;
    AgentSpec spec = default_spec(Algorithm::DDQN);
    spec.batch_size = 2;
    spec.budget = 10;
    Trainer t(spec, env, 1);
    CHECK_THROWS_AS(t.run_budget(), TrainingDiverged);
  }

  TEST_CASE("replay buffer wraps and samples stored transitions") {
    ReplayBuffer buf(3, 1, 1, 2);
    for (int i = 0; i < 5; ++i) {
      VectorXd s = VectorXd::Constant(1, i);
      MatrixXd o = MatrixXd::Constant(2, 1, i);
      std::vector<int> a{i % 2};
      buf.push(s, o, a, double(i), s, o, VectorXd::Ones(1), 1.0, false);
    }
    CHECK(buf.size() == 3);
    ReplayBuffer::Batch b;
    RandomEngine rng(4);
    buf.sample(200, rng, b);
    CHECK(b.rewards.minCoeff() == 2.0);
    CHECK(b.rewards.maxCoeff() == 4.0);
    for (int i = 0; i < 200; ++i) CHECK(b.s(0, i) == b.rewards(i));
  }
}
