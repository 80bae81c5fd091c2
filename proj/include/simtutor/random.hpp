#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace simtutor {

// SplitMix64 finalizer; used to derive independent substream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);
std::uint64_t hash_id(std::string_view id);

/// Seedable generator with portable sampling routines.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The distributions below are implemented here rather than taken
/// from <random> because the standard library's distributions differ between
/// implementations, and generated worlds must be identical everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  // Independent child stream; does not advance this generator.
  static Rng substream(std::uint64_t seed, std::uint64_t salt) { return Rng(mix_seed(seed, salt)); }
  static Rng substream(std::uint64_t seed, std::string_view id) { return Rng(mix_seed(seed, hash_id(id))); }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  double normal(double mean = 0.0, double stddev = 1.0);
  bool bernoulli(double p) { return uniform() < p; }
  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t index(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
};

}  // namespace simtutor
