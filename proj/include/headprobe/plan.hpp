#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "headprobe/allocation.hpp"
#include "headprobe/probe.hpp"
#include "headprobe/transformer.hpp"

namespace headprobe {

enum class ApplyMode { probe_space, in_model };

std::string to_string(ApplyMode m);
ApplyMode apply_mode_from_string(const std::string& s);

/// Additive perturbation e -> e + epsilon * direction, with direction a unit vector
/// supported on the heads' feature slices.
struct PerturbationPlan {
  HeadSet heads;
  Eigen::VectorXd direction;  // empty only for the no-op plan
  double epsilon = 0.0;
  double p0 = 0.9;
  ApplyMode mode = ApplyMode::probe_space;

  double logit_target() const { return logit(p0); }
  double loss_target() const { return -std::log(p0); }
};

/// Optimal-direction plan with the exact minimal epsilon for this input.
PerturbationPlan make_plan(const SafetyProbe& probe, const HeadLayout& layout,
                           const Eigen::VectorXd& e, HeadSet heads, double p0,
                           ApplyMode mode = ApplyMode::probe_space);

Eigen::VectorXd apply_probe_space(const Eigen::VectorXd& e, const PerturbationPlan& plan);

/// Runs the model with each planned head's slice of epsilon * direction added to that
/// head's output at the final position.
Trace apply_in_model(const Model& model, std::span<const int> tokens, const PerturbationPlan& plan);

/// Plan file: one allocation applied to many samples.
struct PlanRecord {
  AllocationSpec spec;
  double p0 = 0.9;
  ApplyMode mode = ApplyMode::probe_space;
  HeadSet heads;
  std::vector<std::size_t> sample_indices;
  std::vector<double> epsilon_per_sample;
};

Json to_json(const PlanRecord& record);

}  // namespace headprobe
