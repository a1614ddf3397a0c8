#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "headprobe/attribution.hpp"
#include "headprobe/run_config.hpp"

namespace headprobe::testing {

// Everything a test needs from one pipeline run, built in memory with the same seeds
// as the CLI would use.
struct Fixture {
  RunConfig config;
  Model model;
  ProbeDataset data;
  SafetyProbe probe;
  HeadScoreTable air;
};

inline RunConfig seeded(RunConfig c, std::uint64_t seed) {
  c.seed = seed;
  c.apply_seed(seed);
  return c;
}

inline Fixture build_fixture(const RunConfig& c) {
  Model model = build_planted_model<double>(c.model);
  SeededRng rng(c.corpus_seed());
  ProbeDataset data = generate_corpus(c.model, c.corpus, rng);
  SafetyProbe probe = train_probe(model, data, c.probe);
  HeadScoreTable air = air_scores(model, probe, data);
  return {c, std::move(model), std::move(data), std::move(probe), std::move(air)};
}

// Default 4x8 fixture with four planted heads at seed 7, built once per process.
inline const Fixture& default_fixture() {
  static const Fixture f = build_fixture(default_run_config());
  return f;
}

inline bool is_planted(const ModelConfig& c, const HeadId& id) {
  for (const auto& p : c.planted) {
    if (p.head == id) return true;
  }
  return false;
}

// Gaussian probe over `layout` with bias chosen uniformly in [-2, 2].
inline SafetyProbe random_probe(SeededRng& rng, const HeadLayout& layout) {
  SafetyProbe p;
  p.w.resize(layout.feature_dim());
  for (Eigen::Index i = 0; i < p.w.size(); ++i) p.w(i) = rng.normal();
  p.b = rng.uniform(-2.0, 2.0);
  return p;
}

inline Eigen::VectorXd random_vector(SeededRng& rng, Eigen::Index n, double scale = 1.0) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = scale * rng.normal();
  return v;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("headprobe_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace headprobe::testing
