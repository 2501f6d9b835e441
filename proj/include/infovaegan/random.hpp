#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace ivg {

/// Seeded random stream with a serializable state. Every sampler in the
/// library draws from an explicit Rng; nothing touches global state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  /// Uniform on [0, 1).
  double uniform();
  /// Uniform on the open interval (0, 1).
  double uniform_open();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller (no cached second variate).
  double normal();
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  /// Independent stream derived from this stream's seed and `salt`; does not
  /// advance this stream.
  Rng substream(std::uint64_t salt) const;

  std::uint64_t seed() const { return seed_; }

  /// Full engine state as 64-bit words (seed first).
  std::vector<std::uint64_t> state() const;
  static Rng from_state(const std::vector<std::uint64_t>& words);

  bool operator==(const Rng& other) const { return seed_ == other.seed_ && engine_ == other.engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace ivg
