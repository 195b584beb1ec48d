#pragma once

#include "kofn/util/random.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace kofn::nn {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Versioned binary container of named blobs. Entries are written in key order, so
/// equal contents always serialize to equal bytes.
class Checkpoint {
 public:
  static constexpr std::uint32_t kVersion = 1;

  enum class Kind : std::uint8_t { Real = 1, Integer = 2, Text = 3 };

  void put_reals(const std::string& key, std::span<const double> values);
  void put_integers(const std::string& key, std::span<const std::int64_t> values);
  void put_text(const std::string& key, const std::string& text);
  void put_real(const std::string& key, double v) { put_reals(key, std::span<const double>(&v, 1)); }
  void put_integer(const std::string& key, std::int64_t v) {
    put_integers(key, std::span<const std::int64_t>(&v, 1));
  }
  void put_vector(const std::string& key, const Eigen::VectorXd& v) {
    put_reals(key, std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
  }
  void put_rng(const std::string& key, const RandomEngine& rng);

  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  std::vector<double> reals(const std::string& key) const;
  std::vector<std::int64_t> integers(const std::string& key) const;
  std::string text(const std::string& key) const;
  double real(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  Eigen::VectorXd vector(const std::string& key) const;
  /// Reads a vector and checks its length.
  Eigen::VectorXd vector(const std::string& key, Eigen::Index expected) const;
  RandomEngine rng(const std::string& key) const;

  std::vector<std::string> keys() const;

  void write(std::ostream& out) const;
  static Checkpoint read(std::istream& in);
  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  bool operator==(const Checkpoint& other) const = default;

 private:
  struct Entry {
    Kind kind = Kind::Real;
    std::vector<char> bytes;
    bool operator==(const Entry&) const = default;
  };
  const Entry& entry(const std::string& key, Kind kind) const;

  std::map<std::string, Entry> entries_;
};

}  // namespace kofn::nn
