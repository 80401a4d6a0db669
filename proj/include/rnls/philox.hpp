#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace rnls {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  explicit Philox4x32(std::uint64_t seed)
      : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)} {}

  Counter operator()(Counter ctr) const {
    Key k = key_;
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        k[0] += 0x9E3779B9u;
        k[1] += 0xBB67AE85u;
      }
      const std::uint64_t p0 = std::uint64_t(0xD2511F53u) * ctr[0];
      const std::uint64_t p1 = std::uint64_t(0xCD9E8D57u) * ctr[2];
      ctr = {std::uint32_t(p1 >> 32) ^ ctr[1] ^ k[0], std::uint32_t(p1), std::uint32_t(p0 >> 32) ^ ctr[3] ^ k[1],
             std::uint32_t(p0)};
    }
    return ctr;
  }

  /// Two independent standard normals for (stream, index), by Box-Muller.
  std::array<double, 2> normal_pair(std::uint32_t stream, std::uint64_t index) const {
    Counter c = (*this)({std::uint32_t(index), std::uint32_t(index >> 32), stream, 0u});
    const double u1 = to_unit_open(c[0], c[1]);
    const double u2 = to_unit_open(c[2], c[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(a), r * std::sin(a)};
  }

  /// Standard normal number `index` of stream `stream`.
  double normal(std::uint32_t stream, std::uint64_t index) const { return normal_pair(stream, index / 2)[index % 2]; }

 private:
  // Uniform on (0, 1] with 53 random bits.
  static double to_unit_open(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((std::uint64_t(hi) << 32) | lo) >> 11;
    return (double(bits) + 1.0) * 0x1.0p-53;
  }

  Key key_;
};

}  // namespace rnls
