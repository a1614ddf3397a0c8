#pragma once

#include <cmath>

#include "headprobe/errors.hpp"

namespace headprobe {

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  // Branch on sign so exp never overflows.
  if (x >= Scalar(0)) {
    return Scalar(1) / (Scalar(1) + std::exp(-x));
  }
  const Scalar z = std::exp(x);
  return z / (Scalar(1) + z);
}

template <typename Scalar>
Scalar logit(Scalar p) {
  if (!(p > Scalar(0) && p < Scalar(1))) {
    throw DomainError("logit requires 0 < p < 1");
  }
  return std::log(p) - std::log1p(-p);
}

// Cross-entropy of the safe class at logit s: -log(sigmoid(s)) = log(1 + exp(-s)).
template <typename Scalar>
Scalar safe_class_loss(Scalar s) {
  if (s >= Scalar(0)) {
    return std::log1p(std::exp(-s));
  }
  return -s + std::log1p(std::exp(s));
}

/// Target quantities for a desired safe-class confidence p0.
template <typename Scalar>
struct TargetConfidence {
  Scalar p0;
  Scalar logit_target;  // S0 = log(p0 / (1 - p0))
  Scalar loss_target;   // L0 = -log(p0)

  explicit TargetConfidence(Scalar p)
      : p0(p), logit_target(logit(p)), loss_target(-std::log(p)) {}
};

}  // namespace headprobe
