#pragma once

#include <optional>
#include <string>
#include <vector>

#include "headprobe/attribution.hpp"

namespace headprobe {

/// LWP: per-layer budgets k_l = floor(alpha * n_l), top-k_l heads of each layer by score.
/// GWP: one pool, top floor(alpha * N) heads overall.
enum class Strategy { lwp, gwp };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

struct AllocationSpec {
  Strategy strategy = Strategy::lwp;
  double alpha = 1.0;
  // When set, only these layers take part (their heads form the pool for GWP).
  std::optional<std::vector<int>> layers;

  void validate(const HeadLayout& layout) const;
  bool uses_layer(int layer) const;
  // LWP: k_l per layer (0 for excluded layers). GWP: not meaningful.
  std::vector<std::size_t> layer_budgets(const HeadLayout& layout) const;
  // Total number of heads the allocation selects.
  std::size_t total_budget(const HeadLayout& layout) const;
};

HeadSet allocate_heads(const HeadScoreTable& scores, const AllocationSpec& spec);

}  // namespace headprobe
