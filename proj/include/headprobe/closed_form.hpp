#pragma once

// Minimal perturbation along a direction for a linear-logistic probe.
//
// With s(e) = w.e + b, moving along v changes the logit linearly:
// s(e + eps v) = s(e) + eps (w.v). Reaching safe-class confidence p0 therefore needs
//   eps = (S0 - s) / (w.v),  S0 = log(p0 / (1 - p0)),
// and for a fixed support S the gain w.v over unit v is maximized by v = w_S / |w_S|.

#include <Eigen/Core>
#include <algorithm>

#include "headprobe/errors.hpp"
#include "headprobe/logistic.hpp"
#include "headprobe/model_config.hpp"
#include "headprobe/probe.hpp"

namespace headprobe {

/// 0/1 mask over feature coordinates covered by the heads in `support`.
template <typename Range>
Eigen::VectorXd support_mask(const HeadLayout& layout, const Range& support) {
  Eigen::VectorXd mask = Eigen::VectorXd::Zero(layout.feature_dim());
  for (const HeadId& id : support) layout.slice(mask, id).setOnes();
  return mask;
}

/// w restricted to the support's coordinates (zero elsewhere).
template <typename Derived, typename Range>
Eigen::VectorXd restrict_to(const Eigen::MatrixBase<Derived>& w, const HeadLayout& layout,
                            const Range& support) {
  if (w.size() != layout.feature_dim()) throw InvalidArgument("restrict_to: dimension mismatch");
  return w.cwiseProduct(support_mask(layout, support));
}

/// v* = w_S / |w_S|. Throws BlindSupport when w_S = 0.
template <typename Derived, typename Range>
Eigen::VectorXd optimal_direction(const Eigen::MatrixBase<Derived>& w, const HeadLayout& layout,
                                  const Range& support) {
  Eigen::VectorXd ws = restrict_to(w, layout, support);
  const double norm = ws.norm();
  if (!(norm > 0.0)) throw BlindSupport("probe weights vanish on the selected heads");
  return ws / norm;
}

template <typename Range>
Eigen::VectorXd optimal_direction(const SafetyProbe& probe, const HeadLayout& layout,
                                  const Range& support) {
  return optimal_direction(probe.w, layout, support);
}

/// Smallest eps >= 0 with sigmoid(w.(e + eps v) + b) >= p0. Throws NoCrossing when w.v <= 0.
template <typename DerivedW, typename DerivedE, typename DerivedV>
typename DerivedW::Scalar minimal_epsilon_exact(const Eigen::MatrixBase<DerivedW>& w,
                                                typename DerivedW::Scalar b,
                                                const Eigen::MatrixBase<DerivedE>& e,
                                                const Eigen::MatrixBase<DerivedV>& v,
                                                typename DerivedW::Scalar p0) {
  using Scalar = typename DerivedW::Scalar;
  if (w.size() != e.size() || w.size() != v.size()) {
    throw InvalidArgument("minimal_epsilon_exact: dimension mismatch");
  }
  const Scalar gain = w.dot(v);
  if (!(gain > Scalar(0))) throw NoCrossing("direction does not raise the probe logit");
  const Scalar s = w.dot(e) + b;
  return std::max(Scalar(0), (logit(p0) - s) / gain);
}

/// First-order estimate from linearizing the safe-class loss around e:
///   eps ~ (L(e) - L0) / ((1 - sigmoid(s)) w.v),  L(e) = -log sigmoid(s), L0 = -log p0.
/// It underestimates the exact value (the loss is convex in eps); clamped at 0.
template <typename DerivedW, typename DerivedE, typename DerivedV>
typename DerivedW::Scalar minimal_epsilon_taylor(const Eigen::MatrixBase<DerivedW>& w,
                                                 typename DerivedW::Scalar b,
                                                 const Eigen::MatrixBase<DerivedE>& e,
                                                 const Eigen::MatrixBase<DerivedV>& v,
                                                 typename DerivedW::Scalar p0) {
  using Scalar = typename DerivedW::Scalar;
  if (w.size() != e.size() || w.size() != v.size()) {
    throw InvalidArgument("minimal_epsilon_taylor: dimension mismatch");
  }
  const Scalar gain = w.dot(v);
  if (!(gain > Scalar(0))) throw NoCrossing("direction does not raise the probe logit");
  const TargetConfidence<Scalar> target(p0);
  const Scalar s = w.dot(e) + b;
  const Scalar excess = safe_class_loss(s) - target.loss_target;
  return std::max(Scalar(0), excess / (sigmoid(-s) * gain));
}

template <typename DerivedE, typename DerivedV>
double minimal_epsilon_exact(const SafetyProbe& probe, const Eigen::MatrixBase<DerivedE>& e,
                             const Eigen::MatrixBase<DerivedV>& v, double p0) {
  return minimal_epsilon_exact(probe.w, probe.b, e, v, p0);
}

template <typename DerivedE, typename DerivedV>
double minimal_epsilon_taylor(const SafetyProbe& probe, const Eigen::MatrixBase<DerivedE>& e,
                              const Eigen::MatrixBase<DerivedV>& v, double p0) {
  return minimal_epsilon_taylor(probe.w, probe.b, e, v, p0);
}

}  // namespace headprobe
