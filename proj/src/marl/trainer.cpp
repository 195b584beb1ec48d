#include "kofn/marl/trainer.hpp"

#include "kofn/env/climb_game.hpp"
#include "kofn/marl/learn.hpp"
#include "kofn/nn/softmax.hpp"

#include <cmath>
#include <numeric>

namespace kofn::marl {
namespace {

std::vector<int> hidden_of(const nn::MlpD& net) {
  const auto& s = net.layer_sizes();
  if (s.size() < 2) return {};
  return {s.begin() + 1, s.end() - 1};
}

int int_pow(int base, int e) {
  int r = 1;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

void save_adam(nn::Checkpoint& c, const std::string& key, const nn::AdamState<double>& s) {
  c.put_vector(key + ".m", s.m);
  c.put_vector(key + ".v", s.v);
  c.put_integer(key + ".step", s.step);
}

void load_adam(const nn::Checkpoint& c, const std::string& key, nn::AdamState<double>& s) {
  s.m = c.vector(key + ".m", s.m.size());
  s.v = c.vector(key + ".v", s.v.size());
  s.step = c.integer(key + ".step");
}

}  // namespace

AgentNetworks::AgentNetworks(const AgentSpec& spec, int n_agents, int n_actions, int global_dim,
                             int local_dim)
    : algorithm_(spec.algorithm), n_agents_(n_agents), n_actions_(n_actions),
      global_dim_(global_dim), local_dim_(local_dim) {
  const NetworkLayout l = network_layout(spec, n_agents, n_actions, global_dim, local_dim);
  if (!l.actor.empty()) actor = nn::MlpD(l.actor);
  critic = nn::MlpD(l.critic);
  if (spec.algorithm == Algorithm::QMIX_PS) mixer = MonotonicMixer(n_agents, global_dim, spec.mixer_embed);
}

void AgentNetworks::init(RandomEngine& rng) {
  if (has_actor()) actor.init_uniform(rng);
  critic.init_uniform(rng);
  if (has_mixer()) mixer.init_uniform(rng);
}

MatrixXd AgentNetworks::probabilities(const MatrixXd& global, const MatrixXd& local) const {
  switch (algorithm_) {
    case Algorithm::JAC: return nn::softmax(actor.forward(global));
    case Algorithm::DCMAC: {
      const MatrixXd logits = actor.forward(global);
      MatrixXd p(n_actions_, n_agents_ * global.cols());
      for (Eigen::Index i = 0; i < global.cols(); ++i)
        for (int m = 0; m < n_agents_; ++m)
          p.col(i * n_agents_ + m) = nn::softmax(logits.col(i).segment(m * n_actions_, n_actions_));
      return p;
    }
    case Algorithm::IACC_PS:
    case Algorithm::MAPPO_PS:
    case Algorithm::IAC_PS:
    case Algorithm::IPPO_PS: return nn::softmax(actor.forward(local));
    default: throw std::logic_error("probabilities: value-based algorithms have no policy network");
  }
}

void AgentNetworks::act(const MatrixXd& global, const MatrixXd& local, std::span<RandomEngine> rngs,
                        MatrixXi& actions) const {
  const Eigen::Index batch = global.cols();
  actions.resize(n_agents_, batch);
  std::vector<int> tuple(static_cast<std::size_t>(n_agents_));
  switch (algorithm_) {
    case Algorithm::DDQN: {
      const MatrixXd q = critic.forward(global);
      for (Eigen::Index i = 0; i < batch; ++i) {
        decode_joint(argmax_first(q.col(i)), n_actions_, tuple);
        for (int m = 0; m < n_agents_; ++m) actions(m, i) = tuple[static_cast<std::size_t>(m)];
      }
      return;
    }
    case Algorithm::VDN_PS:
    case Algorithm::QMIX_PS: {
      const MatrixXd u = critic.forward(local);
      for (Eigen::Index i = 0; i < batch; ++i)
        for (int m = 0; m < n_agents_; ++m) actions(m, i) = argmax_first(u.col(i * n_agents_ + m));
      return;
    }
    case Algorithm::JAC: {
      const MatrixXd p = probabilities(global, local);
      for (Eigen::Index i = 0; i < batch; ++i) {
        decode_joint(sample_categorical(p.col(i), uniform01(rngs[static_cast<std::size_t>(i)])), n_actions_,
                     tuple);
        for (int m = 0; m < n_agents_; ++m) actions(m, i) = tuple[static_cast<std::size_t>(m)];
      }
      return;
    }
    default: {
      const MatrixXd p = probabilities(global, local);
      for (Eigen::Index i = 0; i < batch; ++i)
        for (int m = 0; m < n_agents_; ++m)
          actions(m, i) =
              sample_categorical(p.col(i * n_agents_ + m), uniform01(rngs[static_cast<std::size_t>(i)]));
      return;
    }
  }
}

void AgentNetworks::save(nn::Checkpoint& c, const std::string& prefix) const {
  if (has_actor()) c.put_vector(prefix + "actor", actor.params());
  c.put_vector(prefix + "critic", critic.params());
  if (has_mixer()) mixer.save(c, prefix + "mixer.");
}

void AgentNetworks::load(const nn::Checkpoint& c, const std::string& prefix) {
  if (has_actor()) actor.params() = c.vector(prefix + "actor", actor.n_params());
  critic.params() = c.vector(prefix + "critic", critic.n_params());
  if (has_mixer()) mixer.load(c, prefix + "mixer.");
}

void belief_inputs(std::span<const Belief> beliefs, MatrixXd& global, MatrixXd& local) {
  const Eigen::Index batch = static_cast<Eigen::Index>(beliefs.size());
  const int n = batch ? static_cast<int>(beliefs[0].cols()) : 0;
  global.resize(3 * n, batch);
  local.resize(3 + n, n * batch);
  for (Eigen::Index i = 0; i < batch; ++i) {
    const Belief& b = beliefs[static_cast<std::size_t>(i)];
    belief_global_input(b, global.col(i));
    for (int m = 0; m < n; ++m) belief_local_input(b, m, local.col(i * n + m));
  }
}

void AgentPolicy::act(std::span<const Belief> beliefs, int, std::span<RandomEngine> rngs,
                      std::span<JointAction> out) {
  belief_inputs(beliefs, global_, local_);
  nets_->act(global_, local_, rngs, actions_);
  for (std::size_t i = 0; i < beliefs.size(); ++i) {
    out[i].clear();
    for (int m = 0; m < nets_->n_agents(); ++m)
      out[i].push_back(static_cast<ComponentAction>(actions_(m, static_cast<Eigen::Index>(i))));
  }
}

double climb_expected_return(const AgentNetworks& nets) {
  if (nets.n_agents() != 2 || nets.global_dim() != 1 || nets.local_dim() != 3)
    throw std::invalid_argument("climb_expected_return: networks were not built for the Climb Game");
  const MatrixXd global = MatrixXd::Zero(1, 1);
  MatrixXd local = MatrixXd::Zero(3, 2);
  local(1, 0) = 1.0;
  local(2, 1) = 1.0;
  double per_step = 0.0;
  switch (nets.algorithm()) {
    case Algorithm::DDQN:
    case Algorithm::VDN_PS:
    case Algorithm::QMIX_PS: {
      RandomEngine unused(0);
      MatrixXi a;
      nets.act(global, local, std::span<RandomEngine>(&unused, 1), a);
      per_step = climb_step(a(0, 0), a(1, 0));
      break;
    }
    case Algorithm::JAC: {
      const MatrixXd p = nets.probabilities(global, local);
      for (int j = 0; j < 9; ++j) per_step += p(j, 0) * climb_step(j % 3, j / 3);
      break;
    }
    default: {
      const MatrixXd p = nets.probabilities(global, local);
      for (int a1 = 0; a1 < 3; ++a1)
        for (int a2 = 0; a2 < 3; ++a2) per_step += p(a1, 0) * p(a2, 1) * climb_step(a1, a2);
      break;
    }
  }
  return per_step * ClimbGame::kHorizon;
}

AgentNetworks networks_from_checkpoint(const nn::Checkpoint& c) {
  AgentSpec spec;
  spec.algorithm = parse_algorithm(c.text("meta.algorithm"));
  const auto dims = c.integers("meta.dims");
  if (dims.size() != 5) throw nn::CheckpointError("checkpoint: bad network dimensions");
  auto hidden = [&](const std::string& key) {
    const auto v = c.integers(key);
    return std::vector<int>(v.begin(), v.end());
  };
  spec.actor_hidden = hidden("meta.actor_hidden");
  spec.critic_hidden = hidden("meta.critic_hidden");
  spec.mixer_embed = static_cast<int>(dims[4]);
  AgentNetworks nets(spec, static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2]),
                     static_cast<int>(dims[3]));
  nets.load(c, "net.");
  return nets;
}

// ---------------------------------------------------------------------------------------

Trainer::Trainer(AgentSpec spec, const MarlEnv& env, std::uint64_t seed)
    : spec_(std::move(spec)), seed_(seed),
      explore_rng_(make_stream(seed, StreamPurpose::Exploration)),
      replay_rng_(make_stream(seed, StreamPurpose::Replay)) {
  if (spec_.eval_interval <= 0) throw std::invalid_argument("Trainer: eval_interval must be positive");
  nets_ = AgentNetworks(spec_, env.n_agents(), env.n_actions(), env.global_dim(), env.local_dim());
  RandomEngine init_rng = make_stream(seed, StreamPurpose::Network);
  nets_.init(init_rng);
  target_ = nets_;
  if (nets_.has_actor()) actor_opt_ = nn::AdamState<double>(nets_.actor.n_params());
  critic_opt_ = nn::AdamState<double>(nets_.critic.n_params());
  if (nets_.has_mixer())
    for (std::size_t i = 0; i < 4; ++i) mixer_opt_[i] = nn::AdamState<double>(nets_.mixer.nets()[i].n_params());

  if (is_on_policy(spec_.algorithm)) {
    for (int e = 0; e < spec_.ppo.n_envs; ++e) {
      envs_.push_back(env.clone());
      envs_.back()->reset(derive_seed(seed_, static_cast<std::uint64_t>(StreamPurpose::Episode),
                                      static_cast<std::uint64_t>(episodes_++)));
    }
  } else {
    envs_.push_back(env.clone());
    buffer_ = ReplayBuffer(spec_.buffer_capacity, env.n_agents(), env.global_dim(), env.local_dim());
  }
}

long Trainer::progress() const { return is_on_policy(spec_.algorithm) ? env_steps_ : episodes_; }

void Trainer::check_finite(double loss) {
  last_loss_ = loss;
  if (!std::isfinite(loss))
    throw TrainingDiverged(to_string(spec_.algorithm) + ": non-finite loss at progress " +
                           std::to_string(progress()) + " (seed " + std::to_string(seed_) + ")");
}

void Trainer::maybe_eval(const Hook& on_eval) {
  while (next_eval_ <= spec_.budget && progress() >= next_eval_) {
    if (on_eval) on_eval(*this);
    next_eval_ += spec_.eval_interval;
  }
}

void Trainer::run(long target, const Hook& on_eval) {
  target = std::min(target, spec_.budget);
  maybe_eval(on_eval);
  while (progress() < target) {
    if (is_on_policy(spec_.algorithm))
      train_rollout();
    else
      train_episode();
    maybe_eval(on_eval);
  }
}

void Trainer::select_training_actions(const Eigen::VectorXd& s, const MatrixXd& o, std::vector<int>& a,
                                      Eigen::VectorXd& behaviour, double& behaviour_joint) {
  const int n = nets_.n_agents(), na = nets_.n_actions();
  const double eps = spec_.epsilon(episodes_);
  behaviour.setOnes(n);
  behaviour_joint = 1.0;
  switch (spec_.algorithm) {
    case Algorithm::DDQN: {
      if (uniform01(explore_rng_) < eps) {
        for (int m = 0; m < n; ++m) a[static_cast<std::size_t>(m)] = uniform_index(explore_rng_, na);
      } else {
        decode_joint(argmax_first(nets_.critic.forward(s).col(0)), na, a);
      }
      return;
    }
    case Algorithm::VDN_PS:
    case Algorithm::QMIX_PS: {
      const MatrixXd u = nets_.critic.forward(o);
      for (int m = 0; m < n; ++m) {
        const bool explore = uniform01(explore_rng_) < eps;
        a[static_cast<std::size_t>(m)] = explore ? uniform_index(explore_rng_, na) : argmax_first(u.col(m));
      }
      return;
    }
    case Algorithm::JAC: {
      const int joint = int_pow(na, n);
      const Eigen::VectorXd p = nn::softmax(nets_.actor.forward(s)).col(0);
      const Eigen::VectorXd mu = (1.0 - eps) * p.array() + eps / joint;
      const int j = sample_categorical(mu, uniform01(explore_rng_));
      decode_joint(j, na, a);
      behaviour_joint = mu(j);
      return;
    }
    default: {
      const MatrixXd p = nets_.probabilities(s, o);
      for (int m = 0; m < n; ++m) {
        const Eigen::VectorXd mu = (1.0 - eps) * p.col(m).array() + eps / na;
        const int am = sample_categorical(mu, uniform01(explore_rng_));
        a[static_cast<std::size_t>(m)] = am;
        behaviour(m) = mu(am);
        behaviour_joint *= mu(am);
      }
      return;
    }
  }
}

void Trainer::train_episode() {
  MarlEnv& env = *envs_[0];
  const int n = env.n_agents();
  env.reset(derive_seed(seed_, static_cast<std::uint64_t>(StreamPurpose::Episode),
                        static_cast<std::uint64_t>(episodes_)));
  Eigen::VectorXd s(env.global_dim()), s_next(env.global_dim()), behaviour(n);
  MatrixXd o(env.local_dim(), n), o_next(env.local_dim(), n);
  std::vector<int> a(static_cast<std::size_t>(n));
  double behaviour_joint = 1.0;
  ReplayBuffer::Batch batch;

  env.global_input(s);
  for (int m = 0; m < n; ++m) env.local_input(m, o.col(m));
  while (!env.truncated()) {
    select_training_actions(s, o, a, behaviour, behaviour_joint);
    const double r = env.step(a) * spec_.reward_scale;
    env.global_input(s_next);
    for (int m = 0; m < n; ++m) env.local_input(m, o_next.col(m));
    buffer_.push(s, o, a, r, s_next, o_next, behaviour, behaviour_joint, env.truncated());
    ++env_steps_;
    if (buffer_.size() >= spec_.batch_size) {
      buffer_.sample(spec_.batch_size, replay_rng_, batch);
      if (is_value_based(spec_.algorithm))
        update_value(batch);
      else
        update_actor_critic(batch);
      ++updates_;
    }
    s.swap(s_next);
    o.swap(o_next);
  }
  ++episodes_;
  if (spec_.target_reset_episodes > 0 && episodes_ % spec_.target_reset_episodes == 0) target_ = nets_;
}

void Trainer::update_value(const ReplayBuffer::Batch& b) {
  const int n = nets_.n_agents(), na = nets_.n_actions();
  const Eigen::Index batch = b.rewards.size();
  const double gamma = envs_[0]->gamma();
  const double lr = spec_.critic_lr(episodes_);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(nets_.critic.n_params());
  double loss = 0.0;

  if (spec_.algorithm == Algorithm::DDQN) {
    const Eigen::VectorXd y = q_targets_double(nets_.critic.forward(b.s_next), target_.critic.forward(b.s_next),
                                               b.rewards, gamma);
    nn::MlpD::Tape tape;
    const MatrixXd q = nets_.critic.forward(b.s, tape);
    MatrixXd g = MatrixXd::Zero(q.rows(), q.cols());
    std::vector<int> tuple(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < batch; ++i) {
      for (int m = 0; m < n; ++m) tuple[static_cast<std::size_t>(m)] = b.actions(m, i);
      const int j = encode_joint(tuple, na);
      const double d = q(j, i) - y(i);
      loss += d * d;
      g(j, i) = 2.0 * d / static_cast<double>(batch);
    }
    nets_.critic.backward(tape, g, grad);
  } else {
    const MatrixXd u_next_online = nets_.critic.forward(b.o_next);
    const MatrixXd u_next_target = target_.critic.forward(b.o_next);
    MatrixXd q_next(n, batch);
    for (Eigen::Index i = 0; i < batch; ++i)
      for (int m = 0; m < n; ++m) {
        const Eigen::Index c = i * n + m;
        q_next(m, i) = u_next_target(argmax_first(u_next_online.col(c)), c);
      }
    const bool qmix = spec_.algorithm == Algorithm::QMIX_PS;
    const Eigen::RowVectorXd next_tot =
        qmix ? target_.mixer.forward(q_next, b.s_next) : linear_sum(q_next);
    const Eigen::RowVectorXd y = b.rewards.transpose() + gamma * next_tot;

    nn::MlpD::Tape tape;
    const MatrixXd u = nets_.critic.forward(b.o, tape);
    MatrixXd q(n, batch);
    for (Eigen::Index i = 0; i < batch; ++i)
      for (int m = 0; m < n; ++m) q(m, i) = u(b.actions(m, i), i * n + m);
    MonotonicMixer::Tape mtape;
    const Eigen::RowVectorXd tot = qmix ? nets_.mixer.forward(q, b.s, mtape) : linear_sum(q);
    const Eigen::RowVectorXd d = tot - y;
    loss = d.squaredNorm();
    const Eigen::RowVectorXd g_tot = 2.0 * d / static_cast<double>(batch);
    std::array<Eigen::VectorXd, 4> mixer_grads;
    MatrixXd g_q;
    if (qmix) {
      for (std::size_t k = 0; k < 4; ++k) mixer_grads[k] = Eigen::VectorXd::Zero(nets_.mixer.nets()[k].n_params());
      g_q = nets_.mixer.backward(mtape, g_tot, mixer_grads);
    } else {
      g_q = g_tot.replicate(n, 1);
    }
    MatrixXd g = MatrixXd::Zero(u.rows(), u.cols());
    for (Eigen::Index i = 0; i < batch; ++i)
      for (int m = 0; m < n; ++m) g(b.actions(m, i), i * n + m) = g_q(m, i);
    nets_.critic.backward(tape, g, grad);
    if (qmix)
      for (std::size_t k = 0; k < 4; ++k)
        nn::adam_step<double>(nets_.mixer.nets()[k].params(), mixer_grads[k], mixer_opt_[k], lr);
  }
  check_finite(loss / static_cast<double>(batch));
  nn::adam_step<double>(nets_.critic.params(), grad, critic_opt_, lr);
}

void Trainer::update_actor_critic(const ReplayBuffer::Batch& b) {
  const int n = nets_.n_agents(), na = nets_.n_actions();
  const Eigen::Index batch = b.rewards.size();
  const double gamma = envs_[0]->gamma();
  const bool local_critic = !has_central_critic(spec_.algorithm);

  // Critic and one-step TD advantages (from the critic before its update).
  const MatrixXd& x = local_critic ? b.o : b.s;
  const MatrixXd& x_next = local_critic ? b.o_next : b.s_next;
  nn::MlpD::Tape ctape;
  const Eigen::RowVectorXd v = nets_.critic.forward(x, ctape).row(0);
  const Eigen::RowVectorXd v_next = nets_.critic.forward(x_next).row(0);
  Eigen::RowVectorXd y(v.size());
  for (Eigen::Index k = 0; k < v.size(); ++k) y(k) = b.rewards(local_critic ? k / n : k) + gamma * v_next(k);
  const Eigen::RowVectorXd adv = y - v;
  const double n_critic = static_cast<double>(v.size());
  Eigen::VectorXd cgrad = Eigen::VectorXd::Zero(nets_.critic.n_params());
  nets_.critic.backward(ctape, 2.0 * adv.matrix() * (-1.0 / n_critic), cgrad);
  const double critic_loss = adv.squaredNorm() / n_critic;

  // Actor: importance-weighted (truncated at 1) score-function gradient.
  nn::MlpD::Tape atape;
  MatrixXd logits;
  MatrixXi actions;
  Eigen::VectorXd w;
  int heads = 1;
  const double inv_b = 1.0 / static_cast<double>(batch);
  std::vector<int> tuple(static_cast<std::size_t>(n));
  switch (spec_.algorithm) {
    case Algorithm::JAC: {
      logits = nets_.actor.forward(b.s, atape);
      const MatrixXd p = nn::softmax(logits);
      actions.resize(1, batch);
      w.resize(batch);
      for (Eigen::Index i = 0; i < batch; ++i) {
        for (int m = 0; m < n; ++m) tuple[static_cast<std::size_t>(m)] = b.actions(m, i);
        const int j = encode_joint(tuple, na);
        actions(0, i) = j;
        w(i) = std::min(1.0, p(j, i) / b.behaviour_joint(i)) * adv(i) * inv_b;
      }
      break;
    }
    case Algorithm::DCMAC: {
      logits = nets_.actor.forward(b.s, atape);
      heads = n;
      actions = b.actions;
      w.resize(batch);
      for (Eigen::Index i = 0; i < batch; ++i) {
        double ratio = 1.0;
        for (int m = 0; m < n; ++m) {
          const Eigen::VectorXd pm = nn::softmax(logits.col(i).segment(m * na, na)).col(0);
          ratio *= pm(b.actions(m, i)) / b.behaviour(m, i);
        }
        w(i) = std::min(1.0, ratio) * adv(i) * inv_b;
      }
      break;
    }
    default: {
      logits = nets_.actor.forward(b.o, atape);
      const MatrixXd p = nn::softmax(logits);
      actions.resize(1, n * batch);
      w.resize(n * batch);
      for (Eigen::Index i = 0; i < batch; ++i)
        for (int m = 0; m < n; ++m) {
          const Eigen::Index c = i * n + m;
          actions(0, c) = b.actions(m, i);
          const double a = local_critic ? adv(c) : adv(i);
          w(c) = std::min(1.0, p(b.actions(m, i), c) / b.behaviour(m, i)) * a * inv_b;
        }
      break;
    }
  }
  Eigen::VectorXd agrad = Eigen::VectorXd::Zero(nets_.actor.n_params());
  nets_.actor.backward(atape, policy_logit_grad(logits, actions, w, heads), agrad);
  check_finite(critic_loss + w.sum());
  nn::adam_step<double>(nets_.critic.params(), cgrad, critic_opt_, spec_.critic_lr(episodes_));
  nn::adam_step<double>(nets_.actor.params(), agrad, actor_opt_, spec_.actor_lr(episodes_));
}

void Trainer::train_rollout() {
  const PpoOptions& P = spec_.ppo;
  const int n = nets_.n_agents(), E = P.n_envs, T = P.rollout_steps;
  const int G = nets_.global_dim(), L = nets_.local_dim();
  const Eigen::Index N = static_cast<Eigen::Index>(E) * T;
  const bool mappo = spec_.algorithm == Algorithm::MAPPO_PS;
  const int vrows = mappo ? 1 : n;
  const double gamma = envs_[0]->gamma();

  MatrixXd S(G, N), O(L, n * N), logp_old(n, N), V(vrows, N), NV(vrows, N);
  MatrixXi A(n, N);
  Eigen::VectorXd R(N);
  std::vector<bool> ends(static_cast<std::size_t>(N));
  MatrixXd sg(G, E), ol(L, n * E), sg_next(G, E), ol_next(L, n * E);
  std::vector<int> a(static_cast<std::size_t>(n));

  for (int t = 0; t < T; ++t) {
    for (int e = 0; e < E; ++e) {
      envs_[static_cast<std::size_t>(e)]->global_input(sg.col(e));
      for (int m = 0; m < n; ++m) envs_[static_cast<std::size_t>(e)]->local_input(m, ol.col(e * n + m));
    }
    const MatrixXd lp = nn::log_softmax(nets_.actor.forward(ol));
    const MatrixXd values = nets_.critic.forward(mappo ? sg : ol);
    for (int e = 0; e < E; ++e) {
      const Eigen::Index k = static_cast<Eigen::Index>(t) * E + e;
      for (int m = 0; m < n; ++m) {
        const Eigen::VectorXd p = lp.col(e * n + m).array().exp();
        const int am = sample_categorical(p, uniform01(explore_rng_));
        a[static_cast<std::size_t>(m)] = am;
        A(m, k) = am;
        logp_old(m, k) = lp(am, e * n + m);
      }
      S.col(k) = sg.col(e);
      O.middleCols(k * n, n) = ol.middleCols(e * n, n);
      for (int j = 0; j < vrows; ++j) V(j, k) = values(0, mappo ? e : e * n + j);
      MarlEnv& env = *envs_[static_cast<std::size_t>(e)];
      R(k) = env.step(a) * spec_.reward_scale;
      ends[static_cast<std::size_t>(k)] = env.truncated();
      env.global_input(sg_next.col(e));
      for (int m = 0; m < n; ++m) env.local_input(m, ol_next.col(e * n + m));
    }
    const MatrixXd next_values = nets_.critic.forward(mappo ? sg_next : ol_next);
    for (int e = 0; e < E; ++e) {
      const Eigen::Index k = static_cast<Eigen::Index>(t) * E + e;
      for (int j = 0; j < vrows; ++j) NV(j, k) = next_values(0, mappo ? e : e * n + j);
      if (ends[static_cast<std::size_t>(k)])
        envs_[static_cast<std::size_t>(e)]->reset(derive_seed(
            seed_, static_cast<std::uint64_t>(StreamPurpose::Episode), static_cast<std::uint64_t>(episodes_++)));
    }
    env_steps_ += E;
  }

  // Advantages per environment and value row.
  MatrixXd adv(vrows, N), ret(vrows, N);
  for (int e = 0; e < E; ++e)
    for (int j = 0; j < vrows; ++j) {
      Eigen::VectorXd r(T), v(T), nv(T);
      std::vector<bool> en(static_cast<std::size_t>(T));
      for (int t = 0; t < T; ++t) {
        const Eigen::Index k = static_cast<Eigen::Index>(t) * E + e;
        r(t) = R(k);
        v(t) = V(j, k);
        nv(t) = NV(j, k);
        en[static_cast<std::size_t>(t)] = ends[static_cast<std::size_t>(k)];
      }
      const GaeResult g = gae(r, v, nv, en, gamma, P.gae_lambda);
      for (int t = 0; t < T; ++t) {
        const Eigen::Index k = static_cast<Eigen::Index>(t) * E + e;
        adv(j, k) = g.advantages(t);
        ret(j, k) = g.returns(t);
      }
    }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(N));
  std::iota(order.begin(), order.end(), 0);
  const Eigen::Index M = N / P.minibatches;
  const double lr_actor = spec_.actor_lr(env_steps_), lr_critic = spec_.critic_lr(env_steps_);
  for (int epoch = 0; epoch < P.epochs; ++epoch) {
    for (Eigen::Index i = N - 1; i > 0; --i)
      std::swap(order[static_cast<std::size_t>(i)],
                order[static_cast<std::size_t>(uniform_index(replay_rng_, static_cast<int>(i + 1)))]);
    for (int mb = 0; mb < P.minibatches; ++mb) {
      const Eigen::Index na_samples = M * n;
      MatrixXd om(L, na_samples), sm(G, M);
      Eigen::VectorXd a_hat(na_samples), old(na_samples);
      Eigen::VectorXi act(na_samples);
      const Eigen::Index nv_samples = mappo ? M : na_samples;
      Eigen::VectorXd v_old(nv_samples), v_ret(nv_samples);
      for (Eigen::Index q = 0; q < M; ++q) {
        const Eigen::Index k = order[static_cast<std::size_t>(mb * M + q)];
        sm.col(q) = S.col(k);
        om.middleCols(q * n, n) = O.middleCols(k * n, n);
        for (int m = 0; m < n; ++m) {
          const Eigen::Index c = q * n + m;
          act(c) = A(m, k);
          old(c) = logp_old(m, k);
          a_hat(c) = mappo ? adv(0, k) : adv(m, k);
          if (!mappo) {
            v_old(c) = V(m, k);
            v_ret(c) = ret(m, k);
          }
        }
        if (mappo) {
          v_old(q) = V(0, k);
          v_ret(q) = ret(0, k);
        }
      }
      const double mean = a_hat.mean();
      const double sd = std::sqrt((a_hat.array() - mean).square().sum() / static_cast<double>(na_samples - 1));
      a_hat = (a_hat.array() - mean) / (sd + 1e-8);

      nn::MlpD::Tape atape;
      const MatrixXd logits = nets_.actor.forward(om, atape);
      const MatrixXd lp = nn::log_softmax(logits);
      MatrixXd glog(logits.rows(), logits.cols());
      double pg_loss = 0.0, entropy = 0.0;
      const double inv_a = 1.0 / static_cast<double>(na_samples);
      for (Eigen::Index c = 0; c < na_samples; ++c) {
        const Eigen::VectorXd p = lp.col(c).array().exp();
        const double h = -(p.array() * lp.col(c).array()).sum();
        entropy += h;
        const double ratio = std::exp(lp(act(c), c) - old(c));
        const double unclipped = ratio * a_hat(c);
        const double clipped = std::clamp(ratio, 1.0 - P.clip, 1.0 + P.clip) * a_hat(c);
        pg_loss -= std::min(unclipped, clipped);
        const double g_logp = unclipped <= clipped ? -unclipped * inv_a : 0.0;
        Eigen::VectorXd g = -g_logp * p;
        g(act(c)) += g_logp;
        g.array() += P.ent_coef * inv_a * p.array() * (lp.col(c).array() + h);
        glog.col(c) = g;
      }
      Eigen::VectorXd agrad = Eigen::VectorXd::Zero(nets_.actor.n_params());
      nets_.actor.backward(atape, glog, agrad);

      nn::MlpD::Tape ctape;
      const Eigen::RowVectorXd vnew = nets_.critic.forward(mappo ? sm : om, ctape).row(0);
      Eigen::RowVectorXd gv(nv_samples);
      double v_loss = 0.0;
      const double inv_v = 1.0 / static_cast<double>(nv_samples);
      for (Eigen::Index c = 0; c < nv_samples; ++c) {
        const double l1 = (vnew(c) - v_ret(c)) * (vnew(c) - v_ret(c));
        const double delta = vnew(c) - v_old(c);
        const double vc = v_old(c) + std::clamp(delta, -P.clip, P.clip);
        const double l2 = (vc - v_ret(c)) * (vc - v_ret(c));
        if (!P.clip_value || l1 >= l2) {
          v_loss += l1;
          gv(c) = P.vf_coef * (vnew(c) - v_ret(c)) * inv_v;
        } else {
          v_loss += l2;
          gv(c) = std::abs(delta) < P.clip ? P.vf_coef * (vc - v_ret(c)) * inv_v : 0.0;
        }
      }
      Eigen::VectorXd cgrad = Eigen::VectorXd::Zero(nets_.critic.n_params());
      nets_.critic.backward(ctape, gv, cgrad);

      check_finite(pg_loss * inv_a + 0.5 * P.vf_coef * v_loss * inv_v - P.ent_coef * entropy * inv_a);
      nn::clip_grad_norm<double>({&agrad, &cgrad}, P.max_grad_norm);
      nn::adam_step<double>(nets_.actor.params(), agrad, actor_opt_, lr_actor);
      nn::adam_step<double>(nets_.critic.params(), cgrad, critic_opt_, lr_critic);
      ++updates_;
    }
  }
}

nn::Checkpoint Trainer::policy_checkpoint() const {
  nn::Checkpoint c;
  c.put_text("meta.algorithm", to_string(spec_.algorithm));
  c.put_integers("meta.dims", std::vector<std::int64_t>{nets_.n_agents(), nets_.n_actions(), nets_.global_dim(),
                                                        nets_.local_dim(), spec_.mixer_embed});
  const auto ah = nets_.has_actor() ? hidden_of(nets_.actor) : std::vector<int>{};
  const auto ch = hidden_of(nets_.critic);
  c.put_integers("meta.actor_hidden", std::vector<std::int64_t>(ah.begin(), ah.end()));
  c.put_integers("meta.critic_hidden", std::vector<std::int64_t>(ch.begin(), ch.end()));
  c.put_integers("meta.progress", std::vector<std::int64_t>{episodes_, env_steps_, updates_});
  c.put_integer("meta.seed", static_cast<std::int64_t>(seed_));
  nets_.save(c, "net.");
  return c;
}

nn::Checkpoint Trainer::state() const {
  nn::Checkpoint c = policy_checkpoint();
  c.put_integers("state.counters", std::vector<std::int64_t>{episodes_, env_steps_, updates_, next_eval_});
  c.put_real("state.last_loss", last_loss_);
  target_.save(c, "target.");
  if (nets_.has_actor()) save_adam(c, "opt.actor", actor_opt_);
  save_adam(c, "opt.critic", critic_opt_);
  if (nets_.has_mixer())
    for (std::size_t k = 0; k < 4; ++k) save_adam(c, "opt.mixer" + std::to_string(k), mixer_opt_[k]);
  c.put_rng("rng.explore", explore_rng_);
  c.put_rng("rng.replay", replay_rng_);
  for (std::size_t e = 0; e < envs_.size(); ++e) envs_[e]->save(c, "env" + std::to_string(e) + ".");
  if (!is_on_policy(spec_.algorithm)) buffer_.save(c, "replay.");
  return c;
}

void Trainer::restore(const nn::Checkpoint& c) {
  if (c.text("meta.algorithm") != to_string(spec_.algorithm))
    throw nn::CheckpointError("checkpoint: algorithm mismatch");
  if (static_cast<std::uint64_t>(c.integer("meta.seed")) != seed_)
    throw nn::CheckpointError("checkpoint: seed mismatch");
  const auto counters = c.integers("state.counters");
  if (counters.size() != 4) throw nn::CheckpointError("checkpoint: bad counters");
  episodes_ = counters[0];
  env_steps_ = counters[1];
  updates_ = counters[2];
  next_eval_ = counters[3];
  last_loss_ = c.real("state.last_loss");
  nets_.load(c, "net.");
  target_.load(c, "target.");
  if (nets_.has_actor()) load_adam(c, "opt.actor", actor_opt_);
  load_adam(c, "opt.critic", critic_opt_);
  if (nets_.has_mixer())
    for (std::size_t k = 0; k < 4; ++k) load_adam(c, "opt.mixer" + std::to_string(k), mixer_opt_[k]);
  explore_rng_ = c.rng("rng.explore");
  replay_rng_ = c.rng("rng.replay");
  for (std::size_t e = 0; e < envs_.size(); ++e) envs_[e]->load(c, "env" + std::to_string(e) + ".");
  if (!is_on_policy(spec_.algorithm)) buffer_.load(c, "replay.");
}

}  // namespace kofn::marl
