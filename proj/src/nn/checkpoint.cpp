#include "kofn/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace kofn::nn {
namespace {

constexpr char kMagic[8] = {'K', 'O', 'F', 'N', 'C', 'K', 'P', 'T'};

template <typename T>
void write_raw(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw CheckpointError("checkpoint: truncated stream");
  return v;
}

template <typename T>
std::vector<char> to_bytes(std::span<const T> values) {
  std::vector<char> bytes(values.size() * sizeof(T));
  if (!bytes.empty()) std::memcpy(bytes.data(), values.data(), bytes.size());
  return bytes;
}

template <typename T>
std::vector<T> from_bytes(const std::vector<char>& bytes) {
  std::vector<T> values(bytes.size() / sizeof(T));
  if (!bytes.empty()) std::memcpy(values.data(), bytes.data(), values.size() * sizeof(T));
  return values;
}

}  // namespace

void Checkpoint::put_reals(const std::string& key, std::span<const double> values) {
  entries_[key] = Entry{Kind::Real, to_bytes(values)};
}

void Checkpoint::put_integers(const std::string& key, std::span<const std::int64_t> values) {
  entries_[key] = Entry{Kind::Integer, to_bytes(values)};
}

void Checkpoint::put_text(const std::string& key, const std::string& text) {
  entries_[key] = Entry{Kind::Text, std::vector<char>(text.begin(), text.end())};
}

void Checkpoint::put_rng(const std::string& key, const RandomEngine& rng) {
  std::ostringstream s;
  s << rng;
  put_text(key, s.str());
}

const Checkpoint::Entry& Checkpoint::entry(const std::string& key, Kind kind) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw CheckpointError("checkpoint: missing entry '" + key + "'");
  if (it->second.kind != kind) throw CheckpointError("checkpoint: entry '" + key + "' has another type");
  return it->second;
}

std::vector<double> Checkpoint::reals(const std::string& key) const {
  return from_bytes<double>(entry(key, Kind::Real).bytes);
}

std::vector<std::int64_t> Checkpoint::integers(const std::string& key) const {
  return from_bytes<std::int64_t>(entry(key, Kind::Integer).bytes);
}

std::string Checkpoint::text(const std::string& key) const {
  const auto& b = entry(key, Kind::Text).bytes;
  return {b.begin(), b.end()};
}

double Checkpoint::real(const std::string& key) const {
  auto v = reals(key);
  if (v.size() != 1) throw CheckpointError("checkpoint: entry '" + key + "' is not a scalar");
  return v[0];
}

std::int64_t Checkpoint::integer(const std::string& key) const {
  auto v = integers(key);
  if (v.size() != 1) throw CheckpointError("checkpoint: entry '" + key + "' is not a scalar");
  return v[0];
}

Eigen::VectorXd Checkpoint::vector(const std::string& key) const {
  auto v = reals(key);
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::VectorXd Checkpoint::vector(const std::string& key, Eigen::Index expected) const {
  Eigen::VectorXd v = vector(key);
  if (v.size() != expected)
    throw CheckpointError("checkpoint: entry '" + key + "' has " + std::to_string(v.size()) +
                          " values, expected " + std::to_string(expected));
  return v;
}

RandomEngine Checkpoint::rng(const std::string& key) const {
  std::istringstream s(text(key));
  RandomEngine r;
  s >> r;
  if (!s) throw CheckpointError("checkpoint: entry '" + key + "' is not a generator state");
  return r;
}

std::vector<std::string> Checkpoint::keys() const {
  std::vector<std::string> k;
  for (const auto& [key, e] : entries_) k.push_back(key);
  return k;
}

void Checkpoint::write(std::ostream& out) const {
  out.write(kMagic, sizeof(kMagic));
  write_raw<std::uint32_t>(out, kVersion);
  write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(entries_.size()));
  for (const auto& [key, e] : entries_) {
    write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(key.size()));
    out.write(key.data(), static_cast<std::streamsize>(key.size()));
    write_raw<std::uint8_t>(out, static_cast<std::uint8_t>(e.kind));
    write_raw<std::uint64_t>(out, e.bytes.size());
    out.write(e.bytes.data(), static_cast<std::streamsize>(e.bytes.size()));
  }
}

Checkpoint Checkpoint::read(std::istream& in) {
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError("checkpoint: bad magic");
  const auto version = read_raw<std::uint32_t>(in);
  if (version != kVersion)
    throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
  const auto count = read_raw<std::uint32_t>(in);
  Checkpoint c;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto key_len = read_raw<std::uint32_t>(in);
    std::string key(key_len, '\0');
    in.read(key.data(), key_len);
    const auto kind = read_raw<std::uint8_t>(in);
    if (kind < 1 || kind > 3) throw CheckpointError("checkpoint: bad entry type");
    const auto size = read_raw<std::uint64_t>(in);
    Entry e{static_cast<Kind>(kind), std::vector<char>(size)};
    in.read(e.bytes.data(), static_cast<std::streamsize>(size));
    if (!in) throw CheckpointError("checkpoint: truncated stream");
    c.entries_[key] = std::move(e);
  }
  return c;
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("checkpoint: cannot write " + path);
  write(out);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot read " + path);
  return read(in);
}

}  // namespace kofn::nn
