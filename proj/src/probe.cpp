#include "headprobe/probe.hpp"

#include <cmath>

#include "headprobe/json_io.hpp"
#include "headprobe/logistic.hpp"
#include "headprobe/rng.hpp"

namespace headprobe {

namespace {

double objective(const Eigen::VectorXd& logits, const Eigen::Ref<const Eigen::VectorXd>& y,
                 const Eigen::VectorXd& w, double l2) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    // softplus(s) - y s
    sum += safe_class_loss(-logits(i)) - y(i) * logits(i);
  }
  return sum / static_cast<double>(logits.size()) + 0.5 * l2 * w.squaredNorm();
}

}  // namespace

DatasetSplit split_dataset(const ProbeDataset& data, double eval_fraction, std::uint64_t seed) {
  if (!(eval_fraction >= 0.0 && eval_fraction < 1.0)) {
    throw InvalidArgument("eval_fraction must lie in [0, 1)");
  }
  SeededRng rng(seed);
  DatasetSplit split;
  for (int label : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.samples[i].label == label) members.push_back(i);
    }
    rng.shuffle(members);
    const auto n_eval = static_cast<std::size_t>(
        std::floor(eval_fraction * static_cast<double>(members.size()) + 0.5));
    split.eval.insert(split.eval.end(), members.begin(),
                      members.begin() + static_cast<std::ptrdiff_t>(n_eval));
    split.train.insert(split.train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_eval),
                       members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.eval.begin(), split.eval.end());
  return split;
}

Eigen::MatrixXd feature_matrix(const Model& model, const ProbeDataset& data,
                               const std::vector<std::size_t>& indices,
                               std::span<const HeadIntervention> interventions) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(indices.size()), model.layout().feature_dim());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto trace = forward(model, data.samples.at(indices[r]).tokens, interventions);
    x.row(static_cast<Eigen::Index>(r)) = extract_features(trace).transpose();
  }
  return x;
}

Eigen::VectorXd label_vector(const ProbeDataset& data, const std::vector<std::size_t>& indices) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t r = 0; r < indices.size(); ++r) {
    y(static_cast<Eigen::Index>(r)) = data.samples.at(indices[r]).label;
  }
  return y;
}

SafetyProbe fit_logistic(const Eigen::Ref<const Eigen::MatrixXd>& x,
                         const Eigen::Ref<const Eigen::VectorXd>& y, const ProbeHyper& hyper) {
  const Eigen::Index n = x.rows();
  if (n == 0 || y.size() != n) throw InvalidArgument("fit_logistic: empty or mismatched data");
  const double positives = y.sum();
  if (positives == 0.0 || positives == static_cast<double>(n)) {
    throw DegenerateData("probe training data contains a single class");
  }
  if (hyper.max_iters < 0 || hyper.l2 < 0.0 || hyper.tolerance < 0.0) {
    throw InvalidArgument("fit_logistic: negative hyperparameter");
  }

  // The objective's gradient is Lipschitz with constant at most mean(|x|^2 + 1)/4 + l2.
  double step = hyper.step_size;
  if (step <= 0.0) {
    const double smooth = 0.25 * (x.rowwise().squaredNorm().array() + 1.0).mean() + hyper.l2;
    step = 1.0 / smooth;
  }

  SafetyProbe probe;
  probe.w = Eigen::VectorXd::Zero(x.cols());
  probe.b = 0.0;
  probe.meta.step_size = step;
  probe.meta.l2 = hyper.l2;
  probe.meta.eval_fraction = hyper.eval_fraction;
  probe.meta.split_seed = hyper.split_seed;

  const double inv_n = 1.0 / static_cast<double>(n);
  int it = 0;
  for (;; ++it) {
    const Eigen::VectorXd logits = (x * probe.w).array() + probe.b;
    probe.meta.loss_history.push_back(objective(logits, y, probe.w, hyper.l2));
    const Eigen::VectorXd residual =
        logits.unaryExpr([](double s) { return sigmoid(s); }) - y;
    const Eigen::VectorXd grad_w = inv_n * (x.transpose() * residual) + hyper.l2 * probe.w;
    const double grad_b = inv_n * residual.sum();
    const double gnorm = std::sqrt(grad_w.squaredNorm() + grad_b * grad_b);
    if (gnorm < hyper.tolerance || it >= hyper.max_iters) break;
    probe.w -= step * grad_w;
    probe.b -= step * grad_b;
  }
  probe.meta.iterations = it;
  probe.meta.final_loss = probe.meta.loss_history.back();
  return probe;
}

SafetyProbe train_probe(const Model& model, const ProbeDataset& data, const ProbeHyper& hyper) {
  const auto split = split_dataset(data, hyper.eval_fraction, hyper.split_seed);
  const Eigen::MatrixXd x = feature_matrix(model, data, split.train);
  return fit_logistic(x, label_vector(data, split.train), hyper);
}

double accuracy(const SafetyProbe& probe, const Eigen::Ref<const Eigen::MatrixXd>& x,
                const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (x.rows() == 0) throw InvalidArgument("accuracy: empty evaluation set");
  if (x.cols() != probe.dim()) throw InvalidArgument("accuracy: dimension mismatch");
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (classify(probe, x.row(i).transpose()).label == static_cast<int>(y(i))) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(x.rows());
}

double accuracy_under_intervention(const Model& model, const SafetyProbe& probe,
                                   const ProbeDataset& data,
                                   const std::optional<HeadIntervention>& intervention) {
  const auto split = split_dataset(data, probe.meta.eval_fraction, probe.meta.split_seed);
  if (split.eval.empty()) throw InvalidArgument("accuracy_under_intervention: empty eval split");
  std::span<const HeadIntervention> hooks;
  if (intervention) hooks = std::span<const HeadIntervention>(&*intervention, 1);
  const Eigen::MatrixXd x = feature_matrix(model, data, split.eval, hooks);
  return accuracy(probe, x, label_vector(data, split.eval));
}

std::string probe_to_json(const SafetyProbe& probe) {
  const std::vector<double> w(probe.w.data(), probe.w.data() + probe.w.size());
  const Json j{{"w", w},
               {"b", probe.b},
               {"dim", probe.dim()},
               {"meta",
                {{"iterations", probe.meta.iterations},
                 {"final_loss", probe.meta.final_loss},
                 {"step_size", probe.meta.step_size},
                 {"l2", probe.meta.l2},
                 {"eval_fraction", probe.meta.eval_fraction},
                 {"split_seed", probe.meta.split_seed}}}};
  return dump(j);
}

SafetyProbe probe_from_json(const std::string& text) {
  try {
    const Json j = Json::parse(text);
    SafetyProbe p;
    const auto w = j.at("w").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != j.at("dim").get<Eigen::Index>()) {
      throw IoError("probe dim disagrees with weight length");
    }
    p.w = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    p.b = j.at("b").get<double>();
    const Json& m = j.at("meta");
    p.meta.iterations = m.at("iterations").get<int>();
    p.meta.final_loss = m.at("final_loss").get<double>();
    p.meta.step_size = m.at("step_size").get<double>();
    p.meta.l2 = m.at("l2").get<double>();
    p.meta.eval_fraction = m.at("eval_fraction").get<double>();
    p.meta.split_seed = m.at("split_seed").get<std::uint64_t>();
    if (!p.w.allFinite() || !std::isfinite(p.b)) throw IoError("probe has non-finite entries");
    return p;
  } catch (const Json::exception& e) {
    throw IoError(std::string("malformed probe file: ") + e.what());
  }
}

}  // namespace headprobe
