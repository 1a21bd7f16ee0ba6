// Copyright (c) 2026 The coral Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>

namespace coral {

// Counter-based PRNG fixed for the whole project: SplitMix64.
//
// Draw n (0-based) from seed s is  mix64(s + (n+1) * 0x9E3779B97F4A7C15).
// The stream is pure integer arithmetic, so it is byte-identical on every
// platform, and it is randomly addressable: peek(k) reads k draws ahead
// without advancing, which lets parallel fills produce the exact bytes the
// sequential path would. Seeds are recorded in experiment configs and file
// metadata; the algorithm must never change.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next_u64() noexcept {
    state_ += kGamma;
    return mix(state_);
  }

  // Draw k steps ahead of the current position, without advancing.
  std::uint64_t peek(std::uint64_t k) const noexcept {
    return mix(state_ + (k + 1) * kGamma);
  }

  void skip(std::uint64_t n) noexcept { state_ += n * kGamma; }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double next_unit() noexcept { return to_unit(next_u64()); }

  static double to_unit(std::uint64_t x) noexcept {
    return static_cast<double>(x >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller from two addressed draws.
  // u1 is mapped into (0, 1] so the log is always finite.
  static double gaussian_from(std::uint64_t a, std::uint64_t b) noexcept {
    const double u1 = 1.0 - to_unit(a);
    const double u2 = to_unit(b);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  std::uint64_t next_below(std::uint64_t bound) noexcept {
    // Bounded draw by 128-bit multiply-shift; bias is negligible for the
    // desk-scale bounds used here (vocab sizes, episode counts).
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
  }

  static std::uint64_t mix(std::uint64_t z) noexcept {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
  static constexpr double kTwoPi = 6.283185307179586476925286766559;

  std::uint64_t state_;
};

}  // namespace coral
