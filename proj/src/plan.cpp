#include "headprobe/plan.hpp"

#include "headprobe/closed_form.hpp"
#include "headprobe/errors.hpp"

namespace headprobe {

std::string to_string(ApplyMode m) { return m == ApplyMode::probe_space ? "probe-space" : "in-model"; }

ApplyMode apply_mode_from_string(const std::string& s) {
  if (s == "probe-space") return ApplyMode::probe_space;
  if (s == "in-model") return ApplyMode::in_model;
  throw InvalidArgument("unknown mode '" + s + "' (expected probe-space or in-model)");
}

PerturbationPlan make_plan(const SafetyProbe& probe, const HeadLayout& layout,
                           const Eigen::VectorXd& e, HeadSet heads, double p0, ApplyMode mode) {
  if (e.size() != layout.feature_dim() || probe.dim() != layout.feature_dim()) {
    throw InvalidArgument("make_plan: dimension mismatch");
  }
  PerturbationPlan plan;
  plan.direction = optimal_direction(probe, layout, heads);
  plan.epsilon = minimal_epsilon_exact(probe, e, plan.direction, p0);
  plan.heads = std::move(heads);
  plan.p0 = p0;
  plan.mode = mode;
  return plan;
}

Eigen::VectorXd apply_probe_space(const Eigen::VectorXd& e, const PerturbationPlan& plan) {
  if (plan.direction.size() == 0) {
    if (plan.epsilon != 0.0) throw InvalidArgument("plan without direction must have epsilon 0");
    return e;
  }
  if (plan.direction.size() != e.size()) throw InvalidArgument("apply_probe_space: dimension mismatch");
  return e + plan.epsilon * plan.direction;
}

Trace apply_in_model(const Model& model, std::span<const int> tokens, const PerturbationPlan& plan) {
  const HeadLayout layout = model.layout();
  std::vector<HeadIntervention> hooks;
  if (!plan.heads.empty()) {
    if (plan.direction.size() != layout.feature_dim()) {
      throw InvalidArgument("apply_in_model: plan direction does not match the model");
    }
    const Eigen::VectorXd step = plan.epsilon * plan.direction;
    for (const auto& id : plan.heads) {
      hooks.push_back(HeadIntervention::inject(id, layout.slice(step, id), TokenScope::final));
    }
  }
  return forward(model, tokens, hooks);
}

Json to_json(const PlanRecord& r) {
  Json heads = Json::array();
  for (const auto& id : r.heads) heads.push_back({id.layer, id.head});
  return Json{{"strategy", to_string(r.spec.strategy)},
              {"alpha", r.spec.alpha},
              {"P0", r.p0},
              {"mode", to_string(r.mode)},
              {"heads", heads},
              {"sample_indices", r.sample_indices},
              {"epsilon_per_sample", r.epsilon_per_sample}};
}

}  // namespace headprobe
