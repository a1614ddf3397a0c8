#include "headprobe/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "headprobe/errors.hpp"

namespace headprobe {

std::uint64_t SeededRng::next_u64() {
  ++position_;
  return engine_();
}

double SeededRng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

std::uint64_t SeededRng::below(std::uint64_t n) {
  if (n == 0) throw InvalidArgument("SeededRng::below: n must be positive");
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max - (max % n + 1) % n;  // largest multiple of n, minus one
  std::uint64_t x = next_u64();
  while (x > limit) x = next_u64();
  return x % n;
}

double SeededRng::normal() {
  double u1 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace headprobe
