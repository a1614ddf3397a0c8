#pragma once

#include <Eigen/Core>
#include <cstddef>

#include "headprobe/attribution.hpp"
#include "headprobe/probe.hpp"

namespace headprobe {

struct BisectionOptions {
  double tolerance = 1e-9;  // on |prob - p0|
  double bracket_cap = 1e6;
  int max_iters = 400;
};

/// Numeric minimal epsilon: bisection on eps -> P(safe | e + eps v), evaluated by forming the
/// perturbed vector explicitly. Returns the upper bracket end, which always reaches p0.
/// Throws NoCrossing when w.v <= 0 or the bracket outgrows `bracket_cap`.
double epsilon_bisection(const SafetyProbe& probe, const Eigen::VectorXd& e,
                         const Eigen::VectorXd& v, double p0, const BisectionOptions& options = {});

struct SupportChoice {
  HeadSet heads;
  double epsilon = 0.0;
  double weight_norm = 0.0;  // |w_S|
};

inline constexpr int kMaxExhaustiveHeads = 16;

/// Enumerates every k-subset of heads and returns the one whose optimal-direction
/// epsilon is smallest (first in enumeration order among ties).
/// Refuses layouts with more than kMaxExhaustiveHeads heads.
SupportChoice exhaustive_best_support(const SafetyProbe& probe, const HeadLayout& layout,
                                      const Eigen::VectorXd& e, std::size_t k, double p0);

/// The k heads with the largest probe-weight slice norms (ties by head order).
SupportChoice greedy_norm_support(const SafetyProbe& probe, const HeadLayout& layout,
                                  const Eigen::VectorXd& e, std::size_t k, double p0);

}  // namespace headprobe
