#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace headprobe {

struct RankedIndices {
  std::vector<std::size_t> indices;
  std::vector<double> scores;  // scores[i] belongs to indices[i]
};

/// Top-k indices by score descending, ties broken by ascending index.
/// Throws InvalidArgument when k exceeds the number of scores.
RankedIndices top_k_stable(std::span<const double> scores, std::size_t k);

/// Number of items retained at selection ratio `alpha` out of `n`: floor(alpha * n).
/// A 1e-9 guard absorbs representation error of decimal ratios such as 0.3 * 10.
std::size_t budget(double alpha, std::size_t n);

}  // namespace headprobe
