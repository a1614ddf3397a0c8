#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "headprobe/corpus.hpp"
#include "headprobe/errors.hpp"
#include "headprobe/logistic.hpp"
#include "headprobe/transformer.hpp"

namespace headprobe {

struct ProbeHyper {
  double step_size = 0.0;  // <= 0 selects 1 / (smoothness bound) from the data
  int max_iters = 2000;
  double tolerance = 1e-6;  // on the gradient norm
  double l2 = 1e-4;
  double eval_fraction = 0.3;
  std::uint64_t split_seed = 0;
};

struct ProbeMeta {
  int iterations = 0;
  double final_loss = 0.0;
  double step_size = 0.0;
  double l2 = 0.0;
  double eval_fraction = 0.3;
  std::uint64_t split_seed = 0;
  std::vector<double> loss_history;  // objective before each step; not serialized
};

/// Latent safety probe: P(safe | e) = sigmoid(w.e + b).
struct SafetyProbe {
  Eigen::VectorXd w;
  double b = 0.0;
  ProbeMeta meta;

  Eigen::Index dim() const { return w.size(); }
};

struct ClassifierOutput {
  double logit = 0.0;
  double prob_safe = 0.5;
  int label = 1;  // 1 iff prob_safe >= 0.5
};

template <typename Derived>
ClassifierOutput classify(const SafetyProbe& probe, const Eigen::MatrixBase<Derived>& e);

// Indices into a dataset, each list ascending.
struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> eval;
};

/// Stratified split: round(eval_fraction * n_c) samples of each class c go to eval.
DatasetSplit split_dataset(const ProbeDataset& data, double eval_fraction, std::uint64_t seed);

/// Final-position head-output features, one row per listed sample.
Eigen::MatrixXd feature_matrix(const Model& model, const ProbeDataset& data,
                               const std::vector<std::size_t>& indices,
                               std::span<const HeadIntervention> interventions = {});

Eigen::VectorXd label_vector(const ProbeDataset& data, const std::vector<std::size_t>& indices);

/// Full-batch gradient descent on mean cross-entropy + (l2/2)|w|^2 (bias unpenalized).
/// Stops when the gradient norm drops below tolerance or after max_iters steps.
/// Throws DegenerateData when y holds a single class.
SafetyProbe fit_logistic(const Eigen::Ref<const Eigen::MatrixXd>& x,
                         const Eigen::Ref<const Eigen::VectorXd>& y, const ProbeHyper& hyper);

/// Splits the dataset, extracts features and fits on the training part.
SafetyProbe train_probe(const Model& model, const ProbeDataset& data, const ProbeHyper& hyper);

double accuracy(const SafetyProbe& probe, const Eigen::Ref<const Eigen::MatrixXd>& x,
                const Eigen::Ref<const Eigen::VectorXd>& y);

/// Probe accuracy on the eval split (recovered from the probe's split seed) with an
/// optional head intervention active during the forward pass.
double accuracy_under_intervention(const Model& model, const SafetyProbe& probe,
                                   const ProbeDataset& data,
                                   const std::optional<HeadIntervention>& intervention = {});

std::string probe_to_json(const SafetyProbe& probe);
SafetyProbe probe_from_json(const std::string& text);

// Implementation

template <typename Derived>
ClassifierOutput classify(const SafetyProbe& probe, const Eigen::MatrixBase<Derived>& e) {
  if (e.size() != probe.w.size()) throw InvalidArgument("classify: dimension mismatch");
  ClassifierOutput out;
  out.logit = probe.w.dot(e.template cast<double>()) + probe.b;
  out.prob_safe = sigmoid(out.logit);
  out.label = out.prob_safe >= 0.5 ? 1 : 0;
  return out;
}

}  // namespace headprobe
