#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "headprobe/attribution.hpp"
#include "headprobe/evaluation.hpp"
#include "headprobe/run_config.hpp"

namespace headprobe {

inline constexpr int kReportSchemaVersion = 1;

/// Fixed layout of a run directory.
struct RunPaths {
  std::filesystem::path root;

  std::filesystem::path config() const { return root / "config.json"; }
  std::filesystem::path model() const { return root / "model.bin"; }
  std::filesystem::path corpus() const { return root / "corpus.jsonl"; }
  std::filesystem::path probe() const { return root / "probe.json"; }
  std::filesystem::path scores_csv() const { return root / "scores.csv"; }
  std::filesystem::path scores_json() const { return root / "scores.json"; }
  std::filesystem::path frequency_csv() const { return root / "frequency.csv"; }
  std::filesystem::path frequency_json() const { return root / "frequency.json"; }
  std::filesystem::path plans() const { return root / "plans"; }
  std::filesystem::path report() const { return root / "report.json"; }
  std::filesystem::path curves_csv() const { return root / "curves.csv"; }
  std::filesystem::path heatmap_csv(const std::string& label) const {
    return root / ("heatmap_" + label + ".csv");
  }
  std::filesystem::path plots() const { return root / "plots"; }
  std::filesystem::path stages() const { return root / "stages.json"; }
  // Wall-clock timestamps live here, outside every hashed artifact.
  std::filesystem::path run_info() const { return root / "run_info.json"; }
  std::filesystem::path lock() const { return root / ".lock"; }
};

/// Exclusive ownership of a run directory for the lifetime of the object.
class RunLock {
 public:
  explicit RunLock(const RunPaths& paths);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path path_;
};

struct AttackSummary {
  std::filesystem::path plan_file;
  double flip_rate = 0.0;
  double mean_epsilon = 0.0;
};

/// Stage-by-stage pipeline over one run directory. Each stage is cached: its outputs are
/// reused when stages.json records the same upstream key and the files still match
/// their recorded content hashes.
class Pipeline {
 public:
  Pipeline(std::filesystem::path dir, RunConfig config);

  // Reads <dir>/config.json. Throws MissingStage when absent.
  static RunConfig load_config(const std::filesystem::path& dir);

  const RunConfig& config() const { return config_; }
  const RunPaths& paths() const { return paths_; }

  void write_config();
  // Throws MissingStage unless each named stage ("model", "corpus", "probe", "scores",
  // "frequency", "report") has up-to-date outputs for this config.
  void require(const std::vector<std::string>& stages) const;
  const Model& model();
  const ProbeDataset& corpus();
  const SafetyProbe& probe();
  const HeadScoreTable& air();
  const HeadScoreTable& apr();
  const HeadScoreTable& primary_scores();
  const FrequencyMap& frequency();
  AttackSummary attack(const AllocationSpec& spec, double p0, ApplyMode mode);
  Json evaluate();
  // Runs every stage and renders the plots.
  Json run_all();

  // Stage names whose outputs were reused rather than recomputed in this session.
  const std::vector<std::string>& reused() const { return reused_; }

 private:
  bool fresh(const std::string& stage, const std::string& key,
             const std::vector<std::filesystem::path>& files) const;
  void record(const std::string& stage, const std::string& key,
              const std::vector<std::filesystem::path>& files);
  std::string model_key() const;
  std::string corpus_key() const;
  std::string probe_key() const;
  std::string scores_key() const;
  std::string frequency_key() const;
  std::vector<std::filesystem::path> stage_files(const std::string& stage) const;
  std::string stage_key(const std::string& stage) const;
  void ensure_scores();

  RunPaths paths_;
  RunConfig config_;
  Json stages_;
  std::optional<Model> model_;
  std::optional<ProbeDataset> corpus_;
  std::optional<SafetyProbe> probe_;
  std::optional<HeadScoreTable> air_;
  std::optional<HeadScoreTable> apr_;
  std::optional<FrequencyMap> frequency_;
  std::vector<std::string> reused_;
};

/// Writes curves/heatmap CSVs (always) and SVG plots (when `svg`) from report.json.
/// Throws MissingStage naming every absent upstream artifact.
std::vector<std::filesystem::path> emit_report(const RunPaths& paths, bool svg);

std::string curves_csv(const Json& report);
std::string heatmap_csv(const Json& heatmap);

}  // namespace headprobe
