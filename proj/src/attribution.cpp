#include "headprobe/attribution.hpp"

#include <cmath>
#include <cstdio>

#include "headprobe/errors.hpp"
#include "headprobe/ranking.hpp"

namespace headprobe {

namespace {

std::string format_row(const HeadId& id, double value) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%d,%d,%.17g\n", id.layer, id.head, value);
  return buf;
}

}  // namespace

std::string to_string(ScoreMethod m) { return m == ScoreMethod::air ? "air" : "apr"; }

ScoreMethod score_method_from_string(const std::string& s) {
  if (s == "air") return ScoreMethod::air;
  if (s == "apr") return ScoreMethod::apr;
  throw InvalidArgument("unknown attribution method '" + s + "' (expected air or apr)");
}

AlphaGrid AlphaGrid::defaults() {
  AlphaGrid g;
  for (int pct = 25; pct <= 100; pct += 5) g.ratios.push_back(pct / 100.0);
  return g;
}

void AlphaGrid::validate() const {
  if (ratios.empty()) throw InvalidArgument("alpha grid is empty");
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    if (!(ratios[i] > 0.0 && ratios[i] <= 1.0)) {
      throw InvalidArgument("alpha grid values must lie in (0, 1]");
    }
    if (i > 0 && !(ratios[i] > ratios[i - 1])) {
      throw InvalidArgument("alpha grid must be strictly increasing");
    }
  }
}

HeadScoreTable air_scores(const Model& model, const SafetyProbe& probe, const ProbeDataset& data) {
  const HeadLayout layout = model.layout();
  HeadScoreTable table;
  table.method = ScoreMethod::air;
  table.layout = layout;
  table.scores.resize(layout.total_heads());
  const double base = accuracy_under_intervention(model, probe, data);
  table.acc_orig = base;
  for (const auto& id : layout.all_heads()) {
    const double acc =
        accuracy_under_intervention(model, probe, data, HeadIntervention::ablate(id));
    table.scores(layout.index(id)) = base - acc;
  }
  return table;
}

HeadScoreTable apr_scores(const Model& model, const ProbeDataset& data, const ProbeHyper& hyper) {
  const HeadLayout layout = model.layout();
  const auto split = split_dataset(data, hyper.eval_fraction, hyper.split_seed);
  if (split.eval.empty()) throw InvalidArgument("apr_scores: empty eval split");
  const Eigen::MatrixXd train = feature_matrix(model, data, split.train);
  const Eigen::MatrixXd eval = feature_matrix(model, data, split.eval);
  const Eigen::VectorXd y_train = label_vector(data, split.train);
  const Eigen::VectorXd y_eval = label_vector(data, split.eval);

  HeadScoreTable table;
  table.method = ScoreMethod::apr;
  table.layout = layout;
  table.scores.resize(layout.total_heads());
  const Eigen::Index dh = layout.d_head();
  for (const auto& id : layout.all_heads()) {
    const Eigen::Index c0 = layout.offset(id);
    const SafetyProbe head_probe = fit_logistic(train.middleCols(c0, dh), y_train, hyper);
    table.scores(layout.index(id)) = accuracy(head_probe, eval.middleCols(c0, dh), y_eval);
  }
  return table;
}

std::vector<HeadId> ranked_heads(const HeadScoreTable& table, std::size_t k) {
  const auto ranked = top_k_stable({table.scores.data(), static_cast<std::size_t>(table.scores.size())}, k);
  std::vector<HeadId> out;
  out.reserve(ranked.indices.size());
  for (auto i : ranked.indices) out.push_back(table.layout.head_at(static_cast<int>(i)));
  return out;
}

FrequencyMap selection_frequency(const HeadScoreTable& table, const AlphaGrid& grid) {
  grid.validate();
  const auto n = static_cast<std::size_t>(table.layout.total_heads());
  if (n == 0) throw InvalidArgument("selection_frequency: no heads");
  FrequencyMap freq;
  freq.layout = table.layout;
  freq.grid = grid;
  freq.frequency = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (double alpha : grid.ratios) {
    for (const auto& id : ranked_heads(table, budget(alpha, n))) {
      freq.frequency(table.layout.index(id)) += 1.0;
    }
  }
  freq.frequency /= static_cast<double>(grid.size());
  return freq;
}

CriticalHeadSet critical_head_set(const FrequencyMap& freq, std::size_t k) {
  const auto ranked =
      top_k_stable({freq.frequency.data(), static_cast<std::size_t>(freq.frequency.size())}, k);
  CriticalHeadSet out;
  out.k = k;
  for (auto i : ranked.indices) out.heads.push_back(freq.layout.head_at(static_cast<int>(i)));
  return out;
}

std::string scores_to_csv(const HeadScoreTable& table) {
  std::string out = "layer,head,score\n";
  for (const auto& id : table.layout.all_heads()) out += format_row(id, table.score(id));
  return out;
}

std::string frequency_to_csv(const FrequencyMap& freq) {
  std::string out = "layer,head,f\n";
  for (const auto& id : freq.layout.all_heads()) {
    out += format_row(id, freq.frequency(freq.layout.index(id)));
  }
  return out;
}

Json to_json(const HeadScoreTable& table) {
  Json rows = Json::array();
  for (const auto& id : table.layout.all_heads()) {
    rows.push_back({{"layer", id.layer}, {"head", id.head}, {"score", table.score(id)}});
  }
  Json j{{"method", to_string(table.method)}, {"scores", rows}};
  j["acc_orig"] = table.acc_orig ? Json(*table.acc_orig) : Json(nullptr);
  return j;
}

HeadScoreTable score_table_from_json(const Json& j, const HeadLayout& layout) {
  HeadScoreTable t;
  t.method = score_method_from_string(j.at("method").get<std::string>());
  t.layout = layout;
  t.scores = Eigen::VectorXd::Zero(layout.total_heads());
  const Json& rows = j.at("scores");
  if (rows.size() != static_cast<std::size_t>(layout.total_heads())) {
    throw IoError("score table does not cover every head");
  }
  for (const auto& r : rows) {
    const HeadId id{r.at("layer").get<int>(), r.at("head").get<int>()};
    t.scores(layout.index(id)) = r.at("score").get<double>();
  }
  if (!j.at("acc_orig").is_null()) t.acc_orig = j.at("acc_orig").get<double>();
  return t;
}

Json to_json(const FrequencyMap& freq) {
  Json rows = Json::array();
  for (const auto& id : freq.layout.all_heads()) {
    rows.push_back({{"layer", id.layer}, {"head", id.head}, {"f", freq.frequency(freq.layout.index(id))}});
  }
  return Json{{"grid", freq.grid.ratios}, {"frequency", rows}};
}

}  // namespace headprobe
