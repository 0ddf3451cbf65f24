#pragma once

#include <cstdint>

namespace rainseg {

/// Counter-based 64-bit generator.
///
/// Every draw is a pure function of (seed, stream, index):
///
///   key  = seed ^ (stream * 0xD1B54A32D192ED03)
///   z    = key + (index + 1) * 0x9E3779B97F4A7C15
///   bits = splitmix64_finalize(z)
///
/// with the SplitMix64 finalizer (xor-shift 30, mul 0xBF58476D1CE4E5B9,
/// xor-shift 27, mul 0x94D049BB133111EB, xor-shift 31). Uniforms take the top
/// 53 bits: u = (bits >> 11) * 2^-53 in [0, 1). Normals use Box-Muller on two
/// consecutive draws (u1 = 1 - u(2i), u2 = u(2i+1)) and keep the cosine branch,
/// evaluated in double precision. Any language with 64-bit wrapping integers
/// reproduces the same streams.
class CounterRng {
 public:
  constexpr CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : key_(seed ^ (stream * 0xD1B54A32D192ED03ULL)) {}

  static constexpr std::uint64_t finalize(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  constexpr std::uint64_t bits_at(std::uint64_t index) const noexcept {
    return finalize(key_ + (index + 1) * 0x9E3779B97F4A7C15ULL);
  }

  constexpr double uniform_at(std::uint64_t index) const noexcept {
    return static_cast<double>(bits_at(index) >> 11) * 0x1.0p-53;
  }

  double normal_at(std::uint64_t index) const noexcept;

  // Sequential interface. A normal draw at position i reads the uniform slots
  // 2i and 2i+1, so a given generator should be used for one kind of draw.
  std::uint64_t next_bits() noexcept { return bits_at(counter_++); }
  double next_uniform() noexcept { return uniform_at(counter_++); }
  double next_normal() noexcept { return normal_at(counter_++); }
  // Uniform integer in [0, n) by multiply-shift on the top 32 bits; n > 0.
  std::uint64_t next_below(std::uint64_t n) noexcept;

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Derives an independent child seed, e.g. per epoch or per component.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept {
  return CounterRng::finalize(seed ^ CounterRng::finalize(tag + 0x632BE59BD9B4E019ULL));
}

}  // namespace rainseg
