#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "headprobe/json_io.hpp"
#include "headprobe/probe.hpp"

namespace headprobe {

// Heads sorted by (layer, head).
using HeadSet = std::vector<HeadId>;

enum class ScoreMethod { air, apr };

std::string to_string(ScoreMethod m);
ScoreMethod score_method_from_string(const std::string& s);

/// Per-head importance. AIR: score_i = acc_orig - acc with head i ablated.
/// APR: score_i = eval accuracy of a linear probe on head i's output alone.
struct HeadScoreTable {
  ScoreMethod method = ScoreMethod::air;
  HeadLayout layout;
  Eigen::VectorXd scores;         // indexed by global head index
  std::optional<double> acc_orig;  // AIR only

  double score(const HeadId& id) const { return scores(layout.index(id)); }
};

/// Selection ratios, strictly increasing within (0, 1].
struct AlphaGrid {
  std::vector<double> ratios;

  // {0.25, 0.30, ..., 1.00}: 16 values.
  static AlphaGrid defaults();
  void validate() const;
  std::size_t size() const { return ratios.size(); }
};

struct FrequencyMap {
  HeadLayout layout;
  Eigen::VectorXd frequency;  // fraction of grid ratios at which each head is selected
  AlphaGrid grid;
};

struct CriticalHeadSet {
  std::vector<HeadId> heads;  // ranked, most frequent first
  std::size_t k = 0;
};

HeadScoreTable air_scores(const Model& model, const SafetyProbe& probe, const ProbeDataset& data);

/// Per-head probes reuse `hyper` (including its split) for a like-for-like comparison.
HeadScoreTable apr_scores(const Model& model, const ProbeDataset& data, const ProbeHyper& hyper);

/// Global top-k heads of a score table, ranked (score desc, index asc).
std::vector<HeadId> ranked_heads(const HeadScoreTable& table, std::size_t k);

/// S_alpha = global top-floor(alpha * N) heads; frequency = membership fraction over the grid.
FrequencyMap selection_frequency(const HeadScoreTable& table, const AlphaGrid& grid);

CriticalHeadSet critical_head_set(const FrequencyMap& freq, std::size_t k);

// layer,head,score CSV (header included), rows in head order.
std::string scores_to_csv(const HeadScoreTable& table);
std::string frequency_to_csv(const FrequencyMap& freq);
Json to_json(const HeadScoreTable& table);
HeadScoreTable score_table_from_json(const Json& j, const HeadLayout& layout);
Json to_json(const FrequencyMap& freq);

}  // namespace headprobe
