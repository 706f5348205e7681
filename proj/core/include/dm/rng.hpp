#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace dm {

/// Deterministic random stream. All randomness in a run flows from one
/// master seed through named sub-streams, so independent consumers
/// (environment, policy sampling, critic batching, ...) can be added or
/// removed without perturbing each other's draws.
///
/// Distribution transforms are implemented here instead of relying on
/// <random>'s distribution classes, whose output is implementation-defined;
/// this keeps runs byte-for-byte reproducible across standard libraries.
class RngStream {
 public:
  RngStream() : RngStream(0) {}
  explicit RngStream(uint64_t seed) : engine_(mix_(seed)) {}

  /// Sub-stream derived from a master seed and a stream name.
  static RngStream substream(uint64_t master, std::string_view name,
                             uint64_t index = 0);

  uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [lo, hi] inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi);

  /// Standard normal via Box-Muller (two uniforms per draw, no cached state).
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (size_t i = items.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// Sample k distinct indices from [0, n).
  std::vector<int> sample_without_replacement(int n, int k);

  /// Engine state round-trip for resumable training.
  std::string serialize() const;
  void deserialize(const std::string& text);

 private:
  static uint64_t mix_(uint64_t x);
  std::mt19937_64 engine_;
};

/// FNV-1a 64-bit hash, used for stream names and config hashing.
uint64_t fnv1a64(std::string_view bytes, uint64_t seed = 0xcbf29ce484222325ull);

}  // namespace dm
