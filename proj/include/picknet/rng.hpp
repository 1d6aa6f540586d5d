#pragma once

#include <cmath>
#include <cstdint>

namespace picknet {

// SplitMix64 (Steele, Lea, Flood 2014). The state advances by a fixed odd
// gamma each draw and the output is a bijective scramble of it, so a run is
// replayable from (seed, call order) on any platform. Doubles take the top
// 53 bits of one draw.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  bool bernoulli(double p) { return next_double() < p; }

  // Standard normal via Box-Muller; consumes exactly two draws.
  double normal() {
    double u1 = next_double();
    double u2 = next_double();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  std::size_t below(std::size_t n) {
    if (n == 0) return 0;
    std::size_t i = static_cast<std::size_t>(next_double() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

  // Independent child stream keyed on (seed, salt); order-insensitive, so
  // per-video streams replay identically regardless of batch schedule.
  Rng derive(std::uint64_t salt) const {
    Rng mixer(seed_ ^ (salt * 0xd1342543de82ef95ull + 0x632be59bd9b4e019ull));
    return Rng(mixer.next_u64());
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

}  // namespace picknet
