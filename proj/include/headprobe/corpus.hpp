#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "headprobe/model_config.hpp"
#include "headprobe/rng.hpp"

namespace headprobe {

/// Label convention: 1 = benign (safe), 0 = malicious.
struct Sample {
  std::vector<int> tokens;
  int label = 1;

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct ProbeDataset {
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  std::size_t count_label(int label) const;

  friend bool operator==(const ProbeDataset&, const ProbeDataset&) = default;
};

struct CorpusSpec {
  int n_benign = 100;
  int n_malicious = 100;
  int min_len = 6;
  int max_len = 12;
};

/// Synthetic corpus. Benign sequences use ordinary tokens only; each malicious sequence
/// carries one or two copies of a single planted trigger token. With nothing planted the
/// two classes are drawn identically.
/// The combined list is shuffled.
ProbeDataset generate_corpus(const ModelConfig& config, const CorpusSpec& spec, SeededRng& rng);

// JSON lines, one {"tokens": [...], "label": y} per line.
void save_corpus(const std::filesystem::path& path, const ProbeDataset& data);
ProbeDataset load_corpus(const std::filesystem::path& path);
std::string corpus_to_jsonl(const ProbeDataset& data);

}  // namespace headprobe
