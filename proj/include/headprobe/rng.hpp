#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace headprobe {

/// Deterministic pseudorandom source.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The standard distributions are implementation-defined, so every
/// conversion from raw 64-bit words to numbers is done here:
///   uniform01  = (word >> 11) * 2^-53
///   below(n)   = rejection sampling on the top of the word range
///   normal     = Box-Muller on two uniform01 draws (no caching)
/// Together these make a seed reproduce the same stream on every platform.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t position() const noexcept { return position_; }

  std::uint64_t next_u64();
  double uniform01();
  double uniform(double lo, double hi);
  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  double normal();

  // Fisher-Yates, drawing from below().
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::uint64_t position_ = 0;
};

}  // namespace headprobe
