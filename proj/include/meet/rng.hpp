#pragma once

#include <cstdint>

namespace meet {

namespace detail {

// Finalizer of the SplitMix64 step (Steele, Lea & Flood 2014).
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Seedable, splittable 64-bit generator (SplitMix64). All randomized
/// routines in the library draw from this generator so that results are
/// bit-reproducible across platforms for a given seed.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return detail::mix64(state_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return next_double() < p; }

  /// Uniform integer in [0, bound) by rejection-free scaling (bound small
  /// relative to 2^64, bias is negligible for graph sizes used here).
  std::uint64_t next_below(std::uint64_t bound) { return next_u64() % bound; }

  /// Independent child generator; parent and child streams do not overlap.
  SplitMix64 split() { return SplitMix64(detail::mix64(next_u64() ^ 0xD6E8FEB86659FD93ULL)); }

 private:
  std::uint64_t state_;
};

/// Random-access derivation of independent sub-seeds from a master seed
/// (replica seeds, per-graph seeds). Deterministic in (master, index).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return detail::mix64(master + 0x9E3779B97F4A7C15ULL * (index + 1));
}

}  // namespace meet
