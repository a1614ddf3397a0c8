// headprobe: run-directory front end for the probe / attribution / perturbation pipeline.
//
// Exit codes:
//   0  success
//   1  internal error
//   2  invalid configuration or usage (message names the field path)
//   3  degenerate data, blind support or unreachable target
//   4  I/O failure
//   5  missing or stale upstream stage
//
// stdout carries one compact JSON object per invocation; diagnostics go to stderr.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "headprobe/errors.hpp"
#include "headprobe/pipeline.hpp"

namespace fs = std::filesystem;
using namespace headprobe;

namespace {

enum ExitCode { kOk = 0, kInternal = 1, kUsage = 2, kDegenerate = 3, kIo = 4, kMissingStage = 5 };

struct Common {
  std::string config;
  std::string out = "run";
};

RunConfig parse_config_file(const fs::path& path) {
  const std::string text = read_file(path);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError("<root>", std::string("malformed JSON: ") + e.what());
  }
  return run_config_from_json(j);
}

std::optional<std::uint64_t> env_seed() {
  const char* raw = std::getenv("HEADPROBE_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  const std::string text(raw);
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.front() == '-') {
    throw ConfigError("HEADPROBE_SEED", "expected a nonnegative integer, got '" + text + "'");
  }
  return v;
}

// --config wins, then <out>/config.json, then the built-in default (only when allowed).
RunConfig resolve_config(const Common& c, bool allow_default) {
  RunConfig cfg;
  if (!c.config.empty()) {
    cfg = parse_config_file(c.config);
  } else if (fs::exists(fs::path(c.out) / "config.json")) {
    cfg = parse_config_file(fs::path(c.out) / "config.json");
  } else if (allow_default) {
    cfg = default_run_config();
  } else {
    throw MissingStage("missing artifacts: " + (fs::path(c.out) / "config.json").string() +
                       " (run gen-model first or pass --config)");
  }
  if (auto s = env_seed()) cfg.apply_seed(*s);
  return cfg;
}

void emit(const Json& j) { std::cout << j.dump() << '\n'; }

Json path_list(const std::vector<fs::path>& paths) {
  Json out = Json::array();
  for (const auto& p : paths) out.push_back(p.string());
  return out;
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Run configuration (JSON)");
  cmd->add_option("--out,--dir", c.out, "Run directory")->capture_default_str();
}

int dispatch(int argc, char** argv) {
  CLI::App app{"Safety-probe head attribution and perturbation toolkit"};
  app.require_subcommand(1);

  Common common;
  std::string alpha_text, strategy_text, p0_text, mode_text;
  bool svg = false;

  auto* gen_model = app.add_subcommand("gen-model", "Write config.json and model.bin");
  auto* gen_corpus = app.add_subcommand("gen-corpus", "Write corpus.jsonl");
  auto* train = app.add_subcommand("train-probe", "Fit the safety probe (probe.json)");
  auto* score = app.add_subcommand("score", "Head attribution scores (scores.csv, scores.json)");
  auto* frequency = app.add_subcommand("frequency", "Selection frequency over the ratio grid");
  auto* attack = app.add_subcommand("attack", "Build and evaluate one perturbation plan");
  auto* eval = app.add_subcommand("eval", "Full evaluation sweep (report.json, CSV tables)");
  auto* report = app.add_subcommand("report", "Regenerate CSV tables and, with --svg, plots");
  auto* run_all = app.add_subcommand("run-all", "Every stage end to end");
  auto* run = app.add_subcommand("run", "Alias of run-all");
  for (auto* cmd : {gen_model, gen_corpus, train, score, frequency, attack, eval, report, run_all, run}) {
    add_common(cmd, common);
  }
  attack->add_option("--alpha", alpha_text, "Head ratio in (0, 1]");
  attack->add_option("--strategy", strategy_text, "lwp or gwp");
  attack->add_option("--p0", p0_text, "Target benign confidence in (0, 1)");
  attack->add_option("--mode", mode_text, "probe-space or in-model");
  report->add_flag("--svg", svg, "Also render plots/*.svg");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  const bool starts_run = gen_model->parsed() || run_all->parsed() || run->parsed();
  if (report->parsed()) {
    const auto written = emit_report(RunPaths{common.out}, svg);
    emit({{"command", "report"}, {"outputs", path_list(written)}});
    return kOk;
  }

  RunConfig cfg = resolve_config(common, starts_run);
  if (attack->parsed()) {
    // Flags override the configured attack without touching config.json.
    try {
      if (!alpha_text.empty()) cfg.allocation.alpha = std::stod(alpha_text);
      if (!p0_text.empty()) cfg.p0 = std::stod(p0_text);
    } catch (const std::exception&) {
      throw ConfigError(alpha_text.empty() ? "--p0" : "--alpha", "expected a number");
    }
    try {
      if (!strategy_text.empty()) cfg.allocation.strategy = strategy_from_string(strategy_text);
    } catch (const std::exception& e) {
      throw ConfigError("--strategy", e.what());
    }
    try {
      if (!mode_text.empty()) cfg.mode = apply_mode_from_string(mode_text);
    } catch (const std::exception& e) {
      throw ConfigError("--mode", e.what());
    }
    if (!(cfg.p0 > 0.0 && cfg.p0 < 1.0)) throw ConfigError("--p0", "must lie in (0, 1)");
    try {
      cfg.allocation.validate(cfg.model.layout());
    } catch (const std::exception& e) {
      throw ConfigError("--alpha", e.what());
    }
  }

  Pipeline pipe(common.out, cfg);
  RunLock lock(pipe.paths());
  const auto& paths = pipe.paths();

  if (gen_model->parsed()) {
    pipe.write_config();
    pipe.model();
    emit({{"command", "gen-model"}, {"outputs", path_list({paths.config(), paths.model()})}});
  } else if (gen_corpus->parsed()) {
    pipe.require({"model"});
    pipe.corpus();
    emit({{"command", "gen-corpus"}, {"outputs", path_list({paths.corpus()})}});
  } else if (train->parsed()) {
    pipe.require({"model", "corpus"});
    const auto& probe = pipe.probe();
    emit({{"command", "train-probe"},
          {"outputs", path_list({paths.probe()})},
          {"iterations", probe.meta.iterations},
          {"final_loss", probe.meta.final_loss}});
  } else if (score->parsed()) {
    pipe.require({"model", "corpus", "probe"});
    const auto& air = pipe.air();
    emit({{"command", "score"},
          {"outputs", path_list({paths.scores_csv(), paths.scores_json()})},
          {"acc_orig", air.acc_orig.value_or(0.0)}});
  } else if (frequency->parsed()) {
    pipe.require({"model", "corpus", "probe", "scores"});
    pipe.frequency();
    emit({{"command", "frequency"}, {"outputs", path_list({paths.frequency_csv(), paths.frequency_json()})}});
  } else if (attack->parsed()) {
    pipe.require({"model", "corpus", "probe", "scores"});
    const auto summary = pipe.attack(cfg.allocation, cfg.p0, cfg.mode);
    emit({{"command", "attack"},
          {"outputs", path_list({summary.plan_file})},
          {"flip_rate", summary.flip_rate},
          {"mean_epsilon", summary.mean_epsilon}});
  } else if (eval->parsed()) {
    pipe.require({"model", "corpus", "probe", "scores", "frequency"});
    const Json r = pipe.evaluate();
    emit({{"command", "eval"},
          {"outputs", path_list({paths.report(), paths.curves_csv()})},
          {"flip_rate", r["attack"]["flip_rate"]}});
  } else {
    const Json r = pipe.run_all();
    emit({{"command", "run-all"},
          {"outputs", path_list({paths.report(), paths.plots()})},
          {"config_hash", r["config_hash"]},
          {"acc_orig", r["acc_orig"]},
          {"flip_rate", r["attack"]["flip_rate"]}});
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "headprobe: invalid config: " << e.what() << '\n';
    return kUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "headprobe: invalid argument: " << e.what() << '\n';
    return kUsage;
  } catch (const DegenerateData& e) {
    std::cerr << "headprobe: degenerate data: " << e.what() << '\n';
    return kDegenerate;
  } catch (const BlindSupport& e) {
    std::cerr << "headprobe: blind support: " << e.what() << '\n';
    return kDegenerate;
  } catch (const NoCrossing& e) {
    std::cerr << "headprobe: target unreachable: " << e.what() << '\n';
    return kDegenerate;
  } catch (const DomainError& e) {
    std::cerr << "headprobe: domain error: " << e.what() << '\n';
    return kDegenerate;
  } catch (const IoError& e) {
    std::cerr << "headprobe: I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "headprobe: I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const MissingStage& e) {
    std::cerr << "headprobe: " << e.what() << '\n';
    return kMissingStage;
  } catch (const std::exception& e) {
    std::cerr << "headprobe: internal error: " << e.what() << '\n';
    return kInternal;
  }
}
