#pragma once

// Counter-based Gaussian increments addressed by (seed, particle, basis index,
// step). Philox4x32-10 (Salmon et al., SC'11) supplies 128 random bits per
// address; two 53-bit uniforms feed a Box-Muller transform.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "tmf/grid.hpp"

namespace tmf {

using Philox4x32 = std::array<std::uint32_t, 4>;

inline Philox4x32 philox4x32_10(Philox4x32 ctr, std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(M0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(M1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += W0;
    key[1] += W1;
  }
  return ctr;
}

/// Reproducible standard normal draws. Same address, same value, on any thread
/// and in any evaluation order.
class NoiseStream {
 public:
  NoiseStream() = default;
  explicit NoiseStream(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  /// Standard normal for (particle, basis ordinal, step).
  double normal(std::uint64_t particle, std::uint32_t alpha, std::uint64_t step) const {
    const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(seed_),
                                           static_cast<std::uint32_t>(seed_ >> 32)};
    // The particle index owns the high half of the 64-bit particle/alpha word
    // so that ordinals up to 2^32 never collide.
    const Philox4x32 ctr{static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32),
                         alpha, static_cast<std::uint32_t>(particle)};
    const auto r = philox4x32_10(ctr, key);
    const double u1 = to_unit_open(r[0], r[1]);
    const double u2 = to_unit_open(r[2], r[3]);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Brownian increments dW^alpha ~ N(0, dt) for every basis ordinal of one
  /// particle at one step.
  std::vector<double> increments(std::uint64_t particle, std::uint64_t step, std::size_t count,
                                 double dt) const {
    if (!(dt > 0.0)) throw Error("sample_increments: dt must be positive");
    std::vector<double> dw(count);
    const double scale = std::sqrt(dt);
    for (std::size_t a = 0; a < count; ++a) {
      dw[a] = scale * normal(particle, static_cast<std::uint32_t>(a), step);
    }
    return dw;
  }

 private:
  // 53-bit uniform in (0, 1].
  static double to_unit_open(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
  }

  std::uint64_t seed_ = 0;
};

}  // namespace tmf
