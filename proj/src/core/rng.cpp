#include "rainseg/core/rng.hpp"

#include <cmath>
#include <numbers>

namespace rainseg {

double CounterRng::normal_at(std::uint64_t index) const noexcept {
  const double u1 = 1.0 - uniform_at(2 * index);
  const double u2 = uniform_at(2 * index + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t CounterRng::next_below(std::uint64_t n) noexcept {
  if (n <= 1) {
    ++counter_;
    return 0;
  }
  const std::uint64_t r = next_bits();
  if (n <= 0xFFFFFFFFULL) {
    return ((r >> 32) * n) >> 32;
  }
  return r % n;
}

}  // namespace rainseg
