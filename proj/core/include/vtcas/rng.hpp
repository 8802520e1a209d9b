// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string_view>

namespace vtcas {

/// Counter-based generator: the i-th draw is a pure function of (key, i), so
/// a stream can be reproduced or forked without carrying hidden state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(mix(seed ^ 0x6a09e667f3bcc908ULL)) {}

  std::uint64_t next_u64() { return mix(key_ + kGolden * ++counter_); }

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; consumes two draws per call.
  double normal();

  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Independent sub-stream keyed by name. Does not advance this stream.
  [[nodiscard]] Rng fork(std::string_view name) const;

  std::uint64_t counter() const { return counter_; }

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  Rng(std::uint64_t key, std::uint64_t /*tag*/) : key_(key) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// 64-bit FNV-1a, used for config hashes and stream names.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace vtcas
