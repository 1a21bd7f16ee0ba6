// Copyright (c) 2026 The coral Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace coral {

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ull;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

// Streaming FNV-1a 64-bit. Used for adapter file trailers and weight-table
// fingerprints.
class Fnv64 {
 public:
  void update(const void* bytes, std::size_t len) noexcept {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < len; ++i) {
      state_ ^= p[i];
      state_ *= kFnvPrime;
    }
  }

  void update(std::string_view sv) noexcept { update(sv.data(), sv.size()); }

  std::uint64_t digest() const noexcept { return state_; }

 private:
  std::uint64_t state_ = kFnvOffsetBasis;
};

inline std::uint64_t fnv1a64(const void* bytes, std::size_t len) noexcept {
  Fnv64 h;
  h.update(bytes, len);
  return h.digest();
}

inline std::uint64_t fnv1a64(std::string_view sv) noexcept {
  return fnv1a64(sv.data(), sv.size());
}

}  // namespace coral
