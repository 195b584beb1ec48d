#include "kofn/marl/replay.hpp"

#include <stdexcept>

namespace kofn::marl {

ReplayBuffer::ReplayBuffer(long capacity, int n_agents, int global_dim, int local_dim)
    : capacity_(capacity), n_(n_agents),
      s_(global_dim, capacity), s_next_(global_dim, capacity),
      o_(local_dim, capacity * n_agents), o_next_(local_dim, capacity * n_agents),
      behaviour_(n_agents, capacity), actions_(n_agents, capacity),
      rewards_(capacity), behaviour_joint_(capacity),
      truncated_(static_cast<std::size_t>(capacity), 0) {
  if (capacity <= 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::push(const Eigen::VectorXd& s, const Eigen::MatrixXd& o, std::span<const int> actions,
                        double reward, const Eigen::VectorXd& s_next, const Eigen::MatrixXd& o_next,
                        const Eigen::VectorXd& behaviour, double behaviour_joint, bool truncated) {
  const long i = head_;
  s_.col(i) = s;
  s_next_.col(i) = s_next;
  o_.middleCols(i * n_, n_) = o;
  o_next_.middleCols(i * n_, n_) = o_next;
  for (int m = 0; m < n_; ++m) actions_(m, i) = actions[static_cast<std::size_t>(m)];
  behaviour_.col(i) = behaviour;
  rewards_(i) = reward;
  behaviour_joint_(i) = behaviour_joint;
  truncated_[static_cast<std::size_t>(i)] = truncated;
  head_ = (head_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

void ReplayBuffer::sample(int batch, RandomEngine& rng, Batch& out) const {
  if (size_ == 0) throw std::logic_error("ReplayBuffer::sample: empty buffer");
  out.s.resize(s_.rows(), batch);
  out.s_next.resize(s_.rows(), batch);
  out.o.resize(o_.rows(), static_cast<Eigen::Index>(batch) * n_);
  out.o_next.resize(o_.rows(), static_cast<Eigen::Index>(batch) * n_);
  out.actions.resize(n_, batch);
  out.rewards.resize(batch);
  out.behaviour.resize(n_, batch);
  out.behaviour_joint.resize(batch);
  out.truncated.assign(static_cast<std::size_t>(batch), false);
  for (int b = 0; b < batch; ++b) {
    const long i = static_cast<long>(uniform01(rng) * static_cast<double>(size_));
    out.s.col(b) = s_.col(i);
    out.s_next.col(b) = s_next_.col(i);
    out.o.middleCols(static_cast<Eigen::Index>(b) * n_, n_) = o_.middleCols(i * n_, n_);
    out.o_next.middleCols(static_cast<Eigen::Index>(b) * n_, n_) = o_next_.middleCols(i * n_, n_);
    out.actions.col(b) = actions_.col(i);
    out.rewards(b) = rewards_(i);
    out.behaviour.col(b) = behaviour_.col(i);
    out.behaviour_joint(b) = behaviour_joint_(i);
    out.truncated[static_cast<std::size_t>(b)] = truncated_[static_cast<std::size_t>(i)] != 0;
  }
}

namespace {
void put_matrix(nn::Checkpoint& c, const std::string& key, const Eigen::MatrixXd& m, long cols) {
  c.put_reals(key, std::span<const double>(m.data(), static_cast<std::size_t>(m.rows() * cols)));
}
void get_matrix(const nn::Checkpoint& c, const std::string& key, Eigen::MatrixXd& m, long cols) {
  const auto v = c.reals(key);
  if (static_cast<long>(v.size()) != m.rows() * cols)
    throw nn::CheckpointError("checkpoint: replay entry '" + key + "' has the wrong size");
  std::copy(v.begin(), v.end(), m.data());
}
}  // namespace

void ReplayBuffer::save(nn::Checkpoint& c, const std::string& prefix) const {
  c.put_integers(prefix + "meta", std::vector<std::int64_t>{capacity_, n_, size_, head_});
  put_matrix(c, prefix + "s", s_, size_);
  put_matrix(c, prefix + "s_next", s_next_, size_);
  put_matrix(c, prefix + "o", o_, size_ * n_);
  put_matrix(c, prefix + "o_next", o_next_, size_ * n_);
  put_matrix(c, prefix + "behaviour", behaviour_, size_);
  c.put_reals(prefix + "rewards", std::span<const double>(rewards_.data(), static_cast<std::size_t>(size_)));
  c.put_reals(prefix + "behaviour_joint",
              std::span<const double>(behaviour_joint_.data(), static_cast<std::size_t>(size_)));
  std::vector<std::int64_t> a(actions_.data(), actions_.data() + actions_.rows() * size_);
  c.put_integers(prefix + "actions", a);
  c.put_integers(prefix + "truncated",
                 std::vector<std::int64_t>(truncated_.begin(), truncated_.begin() + size_));
}

void ReplayBuffer::load(const nn::Checkpoint& c, const std::string& prefix) {
  const auto meta = c.integers(prefix + "meta");
  if (meta.size() != 4 || meta[0] != capacity_ || meta[1] != n_)
    throw nn::CheckpointError("checkpoint: replay buffer shape mismatch");
  size_ = meta[2];
  head_ = meta[3];
  get_matrix(c, prefix + "s", s_, size_);
  get_matrix(c, prefix + "s_next", s_next_, size_);
  get_matrix(c, prefix + "o", o_, size_ * n_);
  get_matrix(c, prefix + "o_next", o_next_, size_ * n_);
  get_matrix(c, prefix + "behaviour", behaviour_, size_);
  const auto r = c.reals(prefix + "rewards");
  const auto bj = c.reals(prefix + "behaviour_joint");
  if (static_cast<long>(r.size()) != size_ || static_cast<long>(bj.size()) != size_)
    throw nn::CheckpointError("checkpoint: replay rewards have the wrong size");
  std::copy(r.begin(), r.end(), rewards_.data());
  std::copy(bj.begin(), bj.end(), behaviour_joint_.data());
  const auto a = c.integers(prefix + "actions");
  for (std::size_t i = 0; i < a.size(); ++i) actions_.data()[i] = static_cast<int>(a[i]);
  const auto t = c.integers(prefix + "truncated");
  std::copy(t.begin(), t.end(), truncated_.begin());
}

}  // namespace kofn::marl
