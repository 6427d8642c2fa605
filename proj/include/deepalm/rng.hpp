#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace deepalm {

/// xorshift64* generator. The seed is expanded once through splitmix64 so
/// that seed 0 and small seeds produce well-mixed, non-zero states. The
/// output sequence is fixed and reproducible across platforms.
class Xorshift64Star {
public:
  explicit Xorshift64Star(std::uint64_t seed) noexcept
    : state_{splitmix64(seed)} {
    if (state_ == 0)
      state_ = 0x9E3779B97F4A7C15ull;
  }

  std::uint64_t next() noexcept {
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 0x2545F4914F6CDD1Dull;
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller. Consumes exactly two draws per call
  /// and caches nothing, so the stream position is easy to reason about.
  double gaussian() noexcept {
    const double u1 = 1.0 - uniform(); // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1))
           * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Exponential with the given rate (events per unit).
  double exponential(double rate) noexcept {
    return -std::log(1.0 - uniform()) / rate;
  }

  static std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

private:
  std::uint64_t state_;
};

/// Derives an independent stream seed from a base seed and a counter.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return Xorshift64Star::splitmix64(base ^ Xorshift64Star::splitmix64(index));
}

} // namespace deepalm
