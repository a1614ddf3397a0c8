#include "headprobe/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "headprobe/errors.hpp"

namespace headprobe {

RankedIndices top_k_stable(std::span<const double> scores, std::size_t k) {
  if (k > scores.size()) {
    throw InvalidArgument("top_k_stable: k=" + std::to_string(k) + " exceeds " +
                          std::to_string(scores.size()) + " scores");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto before = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    before);
  order.resize(k);

  RankedIndices out;
  out.scores.reserve(k);
  for (auto i : order) out.scores.push_back(scores[i]);
  out.indices = std::move(order);
  return out;
}

std::size_t budget(double alpha, std::size_t n) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("selection ratio must lie in [0, 1]");
  const auto k = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n) + 1e-9));
  return std::min(k, n);
}

}  // namespace headprobe
