#include "headprobe/corpus.hpp"

#include <algorithm>
#include <sstream>

#include "headprobe/errors.hpp"
#include "headprobe/json_io.hpp"

namespace headprobe {

std::size_t ProbeDataset::count_label(int label) const {
  return static_cast<std::size_t>(std::count_if(samples.begin(), samples.end(),
                                                [&](const Sample& s) { return s.label == label; }));
}

ProbeDataset generate_corpus(const ModelConfig& config, const CorpusSpec& spec, SeededRng& rng) {
  if (spec.n_benign < 0 || spec.n_malicious < 0) {
    throw InvalidArgument("corpus sizes must be nonnegative");
  }
  if (spec.n_benign + spec.n_malicious < 1) throw InvalidArgument("corpus request is empty");
  if (spec.min_len < 1 || spec.max_len < spec.min_len || spec.max_len > config.max_seq_len) {
    throw InvalidArgument("corpus lengths must satisfy 1 <= min_len <= max_len <= max_seq_len");
  }

  const auto triggers = config.trigger_tokens();
  const auto refusals = config.refusal_tokens();
  std::vector<int> ordinary;
  for (int t = 0; t < config.vocab_size; ++t) {
    const bool reserved = std::find(triggers.begin(), triggers.end(), t) != triggers.end() ||
                          std::find(refusals.begin(), refusals.end(), t) != refusals.end();
    if (!reserved) ordinary.push_back(t);
  }
  if (ordinary.empty()) throw InvalidArgument("vocabulary has no ordinary tokens");

  const auto draw_sequence = [&] {
    const auto span = static_cast<std::uint64_t>(spec.max_len - spec.min_len + 1);
    const int len = spec.min_len + static_cast<int>(rng.below(span));
    std::vector<int> seq(static_cast<std::size_t>(len));
    for (auto& t : seq) t = ordinary[rng.below(ordinary.size())];
    return seq;
  };

  ProbeDataset data;
  data.samples.reserve(static_cast<std::size_t>(spec.n_benign + spec.n_malicious));
  for (int i = 0; i < spec.n_benign; ++i) data.samples.push_back({draw_sequence(), 1});
  for (int i = 0; i < spec.n_malicious; ++i) {
    auto seq = draw_sequence();
    // Without planted heads both classes share one distribution (a null control).
    if (!triggers.empty()) {
      const int trigger = triggers[rng.below(triggers.size())];
      const int copies = 1 + static_cast<int>(rng.below(2));
      for (int c = 0; c < copies; ++c) seq[rng.below(seq.size())] = trigger;
    }
    data.samples.push_back({std::move(seq), 0});
  }
  rng.shuffle(data.samples);
  return data;
}

std::string corpus_to_jsonl(const ProbeDataset& data) {
  std::string out;
  for (const auto& s : data.samples) {
    out += Json{{"tokens", s.tokens}, {"label", s.label}}.dump();
    out += '\n';
  }
  return out;
}

void save_corpus(const std::filesystem::path& path, const ProbeDataset& data) {
  write_file(path, corpus_to_jsonl(data));
}

ProbeDataset load_corpus(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  ProbeDataset data;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const Json j = Json::parse(line);
      Sample s{j.at("tokens").get<std::vector<int>>(), j.at("label").get<int>()};
      if (s.label != 0 && s.label != 1) throw IoError("label must be 0 or 1");
      data.samples.push_back(std::move(s));
    } catch (const Json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return data;
}

}  // namespace headprobe
