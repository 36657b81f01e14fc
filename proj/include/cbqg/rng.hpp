#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cbqg {

/// Deterministic random stream. Draws are defined bit-for-bit on top of
/// std::mt19937_64 so results do not depend on the standard library's
/// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  /// Independent sub-stream derived from a root seed and a stream name
  /// ("init", "shuffle", "dropout", "gumbel", ...).
  static Rng stream(std::uint64_t root_seed, std::string_view name);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n);

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace cbqg
