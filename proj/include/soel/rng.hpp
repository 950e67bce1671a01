#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace soel {

/// Seeded generator with named sub-streams.
///
/// The distributions are written out here rather than taken from <random>
/// because the standard leaves their algorithms implementation-defined, and
/// generated data and golden files must not change with the standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Seed of the sub-stream `name` under `seed`; uses std::seed_seq, whose
  /// mixing algorithm is fixed by the standard.
  static std::uint64_t derive_seed(std::uint64_t seed, std::string_view name);

  /// Independent generator for sub-stream `name` of `seed`.
  static Rng stream(std::uint64_t seed, std::string_view name) {
    return Rng(derive_seed(seed, name));
  }

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi] (inclusive), unbiased by rejection.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  /// Standard normal via Box-Muller.
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace soel
