#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace kofn {

using RandomEngine = std::mt19937_64;

/// SplitMix64 finalizer. Used only to derive well-separated seeds for substreams.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of substream `index` under `purpose`, derived from `base`.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t purpose,
                                    std::uint64_t index = 0) {
  return mix_seed(mix_seed(mix_seed(base) ^ (purpose * 0xD1B54A32D192ED03ULL)) ^ index);
}

/// Stream purposes. Distinct purposes never share a substream.
enum class StreamPurpose : std::uint64_t {
  StateInit = 1,
  Transition = 2,
  Observation = 3,
  Policy = 4,
  Network = 5,
  Replay = 6,
  Exploration = 7,
  Episode = 8,
};

inline RandomEngine make_stream(std::uint64_t base, StreamPurpose purpose,
                                std::uint64_t index = 0) {
  return RandomEngine(derive_seed(base, static_cast<std::uint64_t>(purpose), index));
}

/// Uniform double in [0,1) with 53 random bits; portable across standard libraries.
inline double uniform01(RandomEngine& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n) by scaling a 53-bit uniform.
inline int uniform_index(RandomEngine& rng, int n) {
  return static_cast<int>(uniform01(rng) * n);
}

/// Inverse-CDF draw from a discrete distribution given by `probs`.
/// Mass lost to rounding falls on the last index with non-zero probability.
template <typename Probs>
int sample_categorical(const Probs& probs, double u) {
  const int size = static_cast<int>(probs.size());
  double acc = 0.0;
  int last_positive = 0;
  for (int i = 0; i < size; ++i) {
    if (probs[i] <= 0.0) continue;
    last_positive = i;
    acc += probs[i];
    if (u < acc) return i;
  }
  return last_positive;
}

}  // namespace kofn
