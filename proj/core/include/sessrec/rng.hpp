#pragma once

#include <cstdint>
#include <string_view>

#include "sessrec/linalg.hpp"

namespace sessrec {

/// Deterministic seedable generator. The core is SplitMix64 (Steele, Lea &
/// Flood; the constants below are the published ones), so the full draw
/// sequence is a pure function of the seed on every platform. Normal draws
/// use Box-Muller with both branches consumed pairwise: a call for n draws
/// always advances the stream by exactly 2*ceil(n/2) uniforms, and nothing
/// is cached across calls.
class RngState {
 public:
  explicit RngState(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t next_u64();

  /// Uniform in [0, 1), 53-bit resolution.
  double next_unit();

  /// Uniform in (0, 1]; safe as a log() argument.
  double next_unit_open();

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t next_below(std::uint64_t n);

  /// n independent standard-normal draws.
  Vector draw_std_normal(std::size_t n);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t state() const { return state_; }

  static RngState restore(std::uint64_t seed, std::uint64_t state) {
    RngState r(seed);
    r.state_ = state;
    return r;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

/// FNV-1a over bytes; used to key per-session streams.
std::uint64_t fnv1a64(std::string_view s);

/// Seed for a named substream (e.g. one evaluation session), independent of
/// the order substreams are consumed in.
std::uint64_t derive_stream_seed(std::uint64_t seed, std::string_view tag);

}  // namespace sessrec
