#include "headprobe/allocation.hpp"

#include <algorithm>

#include "headprobe/errors.hpp"
#include "headprobe/ranking.hpp"

namespace headprobe {

std::string to_string(Strategy s) { return s == Strategy::lwp ? "lwp" : "gwp"; }

Strategy strategy_from_string(const std::string& s) {
  if (s == "lwp") return Strategy::lwp;
  if (s == "gwp") return Strategy::gwp;
  throw InvalidArgument("unknown allocation strategy '" + s + "' (expected lwp or gwp)");
}

void AllocationSpec::validate(const HeadLayout& layout) const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in (0, 1]");
  if (layers) {
    for (int l : *layers) {
      if (l < 0 || l >= layout.num_layers()) {
        throw InvalidArgument("allocation layer " + std::to_string(l) + " out of range");
      }
    }
  }
}

bool AllocationSpec::uses_layer(int layer) const {
  return !layers || std::find(layers->begin(), layers->end(), layer) != layers->end();
}

std::vector<std::size_t> AllocationSpec::layer_budgets(const HeadLayout& layout) const {
  std::vector<std::size_t> k(static_cast<std::size_t>(layout.num_layers()), 0);
  for (int l = 0; l < layout.num_layers(); ++l) {
    if (uses_layer(l)) {
      k[static_cast<std::size_t>(l)] = budget(alpha, static_cast<std::size_t>(layout.heads_in(l)));
    }
  }
  return k;
}

std::size_t AllocationSpec::total_budget(const HeadLayout& layout) const {
  if (strategy == Strategy::lwp) {
    std::size_t total = 0;
    for (auto k : layer_budgets(layout)) total += k;
    return total;
  }
  std::size_t pool = 0;
  for (int l = 0; l < layout.num_layers(); ++l) {
    if (uses_layer(l)) pool += static_cast<std::size_t>(layout.heads_in(l));
  }
  return budget(alpha, pool);
}

HeadSet allocate_heads(const HeadScoreTable& scores, const AllocationSpec& spec) {
  const HeadLayout& layout = scores.layout;
  spec.validate(layout);
  HeadSet out;
  if (spec.strategy == Strategy::lwp) {
    const auto budgets = spec.layer_budgets(layout);
    for (int l = 0; l < layout.num_layers(); ++l) {
      std::vector<double> layer_scores;
      for (int h = 0; h < layout.heads_in(l); ++h) layer_scores.push_back(scores.score({l, h}));
      for (auto h : top_k_stable(layer_scores, budgets[static_cast<std::size_t>(l)]).indices) {
        out.push_back({l, static_cast<int>(h)});
      }
    }
  } else {
    std::vector<HeadId> pool;
    std::vector<double> pool_scores;
    for (const auto& id : layout.all_heads()) {
      if (!spec.uses_layer(id.layer)) continue;
      pool.push_back(id);
      pool_scores.push_back(scores.score(id));
    }
    for (auto i : top_k_stable(pool_scores, budget(spec.alpha, pool.size())).indices) {
      out.push_back(pool[i]);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace headprobe
