#pragma once

#include <cstdint>
#include <string>

#include "headprobe/allocation.hpp"
#include "headprobe/corpus.hpp"
#include "headprobe/json_io.hpp"
#include "headprobe/plan.hpp"
#include "headprobe/probe.hpp"

namespace headprobe {

inline constexpr int kConfigSchemaVersion = 1;

/// Everything a pipeline run depends on. Sub-seeds derive from `seed`:
/// model weights use seed, the corpus seed + 1, the train/eval split seed + 2.
struct RunConfig {
  std::uint64_t seed = 7;
  ModelConfig model;
  CorpusSpec corpus;
  ProbeHyper probe;
  ScoreMethod attribution = ScoreMethod::air;
  AllocationSpec allocation{Strategy::lwp, 0.5, std::nullopt};
  AlphaGrid grid = AlphaGrid::defaults();
  double p0 = 0.9;
  ApplyMode mode = ApplyMode::probe_space;
  std::size_t critical_k = 8;

  // Pushes `seed` into the derived seeds.
  void apply_seed(std::uint64_t s);
  std::uint64_t corpus_seed() const { return seed + 1; }
};

/// L=4, H=8, d_head=8 with four planted heads; 100 + 100 samples; 16-ratio grid.
RunConfig default_run_config();

/// Strict parse: unknown keys and out-of-range values raise ConfigError naming the field.
/// Missing sections fall back to default_run_config().
RunConfig run_config_from_json(const Json& j);
Json to_json(const RunConfig& config);

// First 16 hex digits of SHA-256 over the canonical JSON.
std::string config_hash(const RunConfig& config);
std::string json_hash(const Json& j);

}  // namespace headprobe
