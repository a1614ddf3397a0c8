#include "headprobe/oracles.hpp"

#include <bit>
#include <cmath>
#include <limits>

#include "headprobe/errors.hpp"
#include "headprobe/logistic.hpp"
#include "headprobe/ranking.hpp"

namespace headprobe {

namespace {

// True when the safe probability at logit s is at least p0. Above 0.5 the comparison is
// made on the complement, which stays accurate as p0 approaches 1.
bool reaches(double s, double p0) {
  if (p0 <= 0.5) return sigmoid(s) >= p0;
  return sigmoid(-s) <= 1.0 - p0;
}

double epsilon_on_support(const SafetyProbe& probe, const Eigen::VectorXd& e, double norm,
                          double p0) {
  const double s = probe.w.dot(e) + probe.b;
  return std::max(0.0, (logit(p0) - s) / norm);
}

}  // namespace

double epsilon_bisection(const SafetyProbe& probe, const Eigen::VectorXd& e,
                         const Eigen::VectorXd& v, double p0, const BisectionOptions& options) {
  if (e.size() != probe.dim() || v.size() != probe.dim()) {
    throw InvalidArgument("epsilon_bisection: dimension mismatch");
  }
  if (!(p0 > 0.0 && p0 < 1.0)) throw DomainError("p0 must lie in (0, 1)");
  if (!(probe.w.dot(v) > 0.0)) throw NoCrossing("direction does not raise the probe logit");

  const auto logit_at = [&](double eps) {
    const Eigen::VectorXd moved = e + eps * v;
    return probe.w.dot(moved) + probe.b;
  };
  if (reaches(logit_at(0.0), p0)) return 0.0;

  double lo = 0.0;
  double hi = 1.0;
  while (!reaches(logit_at(hi), p0)) {
    lo = hi;
    hi *= 2.0;
    if (hi > options.bracket_cap) throw NoCrossing("no crossing within the bracket cap");
  }
  for (int it = 0; it < options.max_iters; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;  // bracket exhausted at double resolution
    const double s = logit_at(mid);
    if (reaches(s, p0)) {
      hi = mid;
    } else {
      lo = mid;
    }
    const double gap = std::abs(sigmoid(logit_at(hi)) - p0);
    if (gap < options.tolerance && hi - lo <= 1e-13 * hi) break;
  }
  return hi;
}

SupportChoice exhaustive_best_support(const SafetyProbe& probe, const HeadLayout& layout,
                                      const Eigen::VectorXd& e, std::size_t k, double p0) {
  const int n = layout.total_heads();
  if (n > kMaxExhaustiveHeads) {
    throw InvalidArgument("exhaustive search refused: " + std::to_string(n) + " heads exceeds " +
                          std::to_string(kMaxExhaustiveHeads));
  }
  if (k > static_cast<std::size_t>(n)) throw InvalidArgument("support size exceeds head count");
  if (probe.dim() != layout.feature_dim()) throw InvalidArgument("probe/layout mismatch");

  std::vector<double> slice_sq(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    slice_sq[static_cast<std::size_t>(i)] = layout.slice(probe.w, layout.head_at(i)).squaredNorm();
  }

  SupportChoice best;
  best.epsilon = std::numeric_limits<double>::infinity();
  std::uint32_t best_mask = 0;
  bool found = false;
  const std::uint32_t end = std::uint32_t{1} << n;
  for (std::uint32_t mask = 0; mask < end; ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) != k) continue;
    double sq = 0.0;
    for (int i = 0; i < n; ++i) {
      if (mask & (std::uint32_t{1} << i)) sq += slice_sq[static_cast<std::size_t>(i)];
    }
    if (!(sq > 0.0)) continue;
    const double norm = std::sqrt(sq);
    const double eps = epsilon_on_support(probe, e, norm, p0);
    if (!found || eps < best.epsilon) {
      found = true;
      best.epsilon = eps;
      best.weight_norm = norm;
      best_mask = mask;
    }
  }
  if (!found) throw BlindSupport("every support of this size has zero probe weight");
  for (int i = 0; i < n; ++i) {
    if (best_mask & (std::uint32_t{1} << i)) best.heads.push_back(layout.head_at(i));
  }
  return best;
}

SupportChoice greedy_norm_support(const SafetyProbe& probe, const HeadLayout& layout,
                                  const Eigen::VectorXd& e, std::size_t k, double p0) {
  std::vector<double> norms;
  for (const auto& id : layout.all_heads()) norms.push_back(layout.slice(probe.w, id).norm());
  SupportChoice out;
  double sq = 0.0;
  for (auto i : top_k_stable(norms, k).indices) {
    out.heads.push_back(layout.head_at(static_cast<int>(i)));
    sq += norms[i] * norms[i];
  }
  std::sort(out.heads.begin(), out.heads.end());
  if (!(sq > 0.0)) throw BlindSupport("greedy support has zero probe weight");
  out.weight_norm = std::sqrt(sq);
  out.epsilon = epsilon_on_support(probe, e, out.weight_norm, p0);
  return out;
}

}  // namespace headprobe
