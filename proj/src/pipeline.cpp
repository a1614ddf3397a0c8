#include "headprobe/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>

#include "headprobe/closed_form.hpp"
#include "headprobe/errors.hpp"
#include "headprobe/hash.hpp"
#include "headprobe/model_io.hpp"
#include "headprobe/svg.hpp"

namespace headprobe {

namespace fs = std::filesystem;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Json curve_json(const CurveSeries& c) { return Json{{"label", c.label}, {"x", c.x}, {"y", c.y}}; }

CurveSeries curve_from_json(const Json& j) {
  return {j.at("label").get<std::string>(), j.at("x").get<std::vector<double>>(),
          j.at("y").get<std::vector<double>>()};
}

Json heatmap_json(const HeatmapGrid& h) {
  Json rows = Json::array();
  for (Eigen::Index l = 0; l < h.values.rows(); ++l) {
    std::vector<double> row(static_cast<std::size_t>(h.values.cols()));
    for (Eigen::Index a = 0; a < h.values.cols(); ++a) row[static_cast<std::size_t>(a)] = h.values(l, a);
    rows.push_back(row);
  }
  return Json{{"label", h.label}, {"alphas", h.alphas}, {"values", rows}};
}

HeatmapGrid heatmap_from_json(const Json& j) {
  HeatmapGrid h;
  h.label = j.at("label").get<std::string>();
  h.alphas = j.at("alphas").get<std::vector<double>>();
  const auto rows = j.at("values").get<std::vector<std::vector<double>>>();
  h.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(h.alphas.size()));
  for (std::size_t l = 0; l < rows.size(); ++l) {
    for (std::size_t a = 0; a < h.alphas.size(); ++a) {
      h.values(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(a)) = rows[l].at(a);
    }
  }
  return h;
}

Json heads_json(const std::vector<HeadId>& heads) {
  Json out = Json::array();
  for (const auto& id : heads) out.push_back({id.layer, id.head});
  return out;
}

std::string csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Taylor-vs-exact epsilon on points just below the target logit: s = S0 - gap.
Json taylor_study(const SafetyProbe& probe, const Eigen::VectorXd& anchor, double p0) {
  const double target = logit(p0);
  const double wsq = probe.w.squaredNorm();
  const Eigen::VectorXd v = probe.w / std::sqrt(wsq);
  double worst = 0.0;
  Json failing = Json::array();
  constexpr int kPoints = 100;
  constexpr double kBand = 0.1;
  constexpr double kBound = 0.05;
  for (int i = 1; i <= kPoints; ++i) {
    const double gap = kBand * i / kPoints;
    const double shift = (target - gap) - (probe.w.dot(anchor) + probe.b);
    const Eigen::VectorXd e = anchor + (shift / wsq) * probe.w;
    const double exact = minimal_epsilon_exact(probe, e, v, p0);
    const double approx = minimal_epsilon_taylor(probe, e, v, p0);
    const double rel = std::abs(approx - exact) / std::max(exact, 1e-12);
    worst = std::max(worst, rel);
    if (rel > kBound) failing.push_back({{"gap", gap}, {"relative_deviation", rel}});
  }
  return Json{{"points", kPoints}, {"band", kBand}, {"bound", kBound},
              {"max_relative_deviation", worst}, {"failing", failing}};
}

}  // namespace

RunLock::RunLock(const RunPaths& paths) : path_(paths.lock()) {
  std::error_code ec;
  fs::create_directories(paths.root, ec);
  if (ec) throw IoError("cannot create run directory " + paths.root.string());
  std::FILE* f = std::fopen(path_.c_str(), "wx");
  if (f == nullptr) {
    throw IoError("run directory " + paths.root.string() + " is locked (remove " + path_.string() +
                  " if no other process owns it)");
  }
  std::fclose(f);
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

Pipeline::Pipeline(fs::path dir, RunConfig config) : paths_{std::move(dir)}, config_(std::move(config)) {
  stages_ = Json::object();
  if (fs::exists(paths_.stages())) {
    try {
      stages_ = read_json(paths_.stages());
    } catch (const IoError&) {
      stages_ = Json::object();
    }
  }
}

RunConfig Pipeline::load_config(const fs::path& dir) {
  const RunPaths paths{dir};
  if (!fs::exists(paths.config())) {
    throw MissingStage("missing artifacts: " + paths.config().string() +
                       " (run gen-model with --config first)");
  }
  return run_config_from_json(read_json(paths.config()));
}

bool Pipeline::fresh(const std::string& stage, const std::string& key,
                     const std::vector<fs::path>& files) const {
  if (!stages_.contains(stage) || stages_[stage].value("key", "") != key) return false;
  const Json& outputs = stages_[stage].value("outputs", Json::object());
  for (const auto& f : files) {
    const auto name = f.filename().string();
    if (!fs::exists(f) || !outputs.contains(name)) return false;
    if (outputs[name] != sha256_hex(read_file(f))) return false;
  }
  return true;
}

void Pipeline::record(const std::string& stage, const std::string& key,
                      const std::vector<fs::path>& files) {
  Json outputs = Json::object();
  for (const auto& f : files) outputs[f.filename().string()] = sha256_hex(read_file(f));
  stages_[stage] = {{"key", key}, {"config_hash", config_hash(config_)}, {"outputs", outputs}};
  write_file(paths_.stages(), dump(stages_));
  Json info = Json::object();
  if (fs::exists(paths_.run_info())) {
    try {
      info = read_json(paths_.run_info());
    } catch (const IoError&) {
    }
  }
  info[stage] = utc_now();
  write_file(paths_.run_info(), dump(info));
}

std::string Pipeline::model_key() const {
  return json_hash({{"stage", "model"}, {"model", to_json(config_.model)}});
}

std::string Pipeline::corpus_key() const {
  const Json spec{{"benign", config_.corpus.n_benign}, {"malicious", config_.corpus.n_malicious},
                  {"min_len", config_.corpus.min_len}, {"max_len", config_.corpus.max_len}};
  return json_hash({{"stage", "corpus"}, {"model", model_key()}, {"spec", spec},
                    {"seed", config_.corpus_seed()}});
}

std::string Pipeline::probe_key() const {
  const auto& p = config_.probe;
  const Json hyper{{"step_size", p.step_size}, {"max_iters", p.max_iters}, {"tolerance", p.tolerance},
                   {"l2", p.l2}, {"eval_fraction", p.eval_fraction}, {"split_seed", p.split_seed}};
  return json_hash({{"stage", "probe"}, {"corpus", corpus_key()}, {"hyper", hyper}});
}

std::string Pipeline::scores_key() const {
  return json_hash({{"stage", "scores"}, {"probe", probe_key()}});
}

std::string Pipeline::frequency_key() const {
  return json_hash({{"stage", "frequency"}, {"scores", scores_key()},
                    {"method", to_string(config_.attribution)}, {"grid", config_.grid.ratios},
                    {"critical_k", config_.critical_k}});
}

std::vector<fs::path> Pipeline::stage_files(const std::string& stage) const {
  if (stage == "model") return {paths_.model()};
  if (stage == "corpus") return {paths_.corpus()};
  if (stage == "probe") return {paths_.probe()};
  if (stage == "scores") return {paths_.scores_json(), paths_.scores_csv()};
  if (stage == "frequency") return {paths_.frequency_csv(), paths_.frequency_json()};
  if (stage == "report") return {paths_.report()};
  throw InvalidArgument("unknown stage " + stage);
}

std::string Pipeline::stage_key(const std::string& stage) const {
  if (stage == "model") return model_key();
  if (stage == "corpus") return corpus_key();
  if (stage == "probe") return probe_key();
  if (stage == "scores") return scores_key();
  if (stage == "frequency") return frequency_key();
  throw InvalidArgument("unknown stage " + stage);
}

void Pipeline::require(const std::vector<std::string>& stages) const {
  std::string missing;
  for (const auto& stage : stages) {
    const auto files = stage_files(stage);
    const bool ok = stage == "report" ? fs::exists(files.front()) : fresh(stage, stage_key(stage), files);
    if (ok) continue;
    for (const auto& f : files) missing += " " + f.string();
  }
  if (!missing.empty()) throw MissingStage("missing or stale artifacts:" + missing);
}

void Pipeline::write_config() { write_file(paths_.config(), dump(to_json(config_))); }

const Model& Pipeline::model() {
  if (model_) return *model_;
  const auto key = model_key();
  if (fresh("model", key, {paths_.model()})) {
    model_ = load_model(paths_.model());
    reused_.push_back("model");
  } else {
    model_ = build_planted_model<double>(config_.model);
    save_model(paths_.model(), *model_);
    record("model", key, {paths_.model()});
  }
  return *model_;
}

const ProbeDataset& Pipeline::corpus() {
  if (corpus_) return *corpus_;
  const auto key = corpus_key();
  if (fresh("corpus", key, {paths_.corpus()})) {
    corpus_ = load_corpus(paths_.corpus());
    reused_.push_back("corpus");
  } else {
    SeededRng rng(config_.corpus_seed());
    corpus_ = generate_corpus(config_.model, config_.corpus, rng);
    save_corpus(paths_.corpus(), *corpus_);
    record("corpus", key, {paths_.corpus()});
  }
  return *corpus_;
}

const SafetyProbe& Pipeline::probe() {
  if (probe_) return *probe_;
  const auto key = probe_key();
  if (fresh("probe", key, {paths_.probe()})) {
    probe_ = probe_from_json(read_file(paths_.probe()));
    reused_.push_back("probe");
  } else {
    probe_ = train_probe(model(), corpus(), config_.probe);
    write_file(paths_.probe(), probe_to_json(*probe_));
    record("probe", key, {paths_.probe()});
  }
  return *probe_;
}

void Pipeline::ensure_scores() {
  if (air_ && apr_) return;
  const auto key = scores_key();
  const HeadLayout layout = config_.model.layout();
  if (fresh("scores", key, {paths_.scores_json(), paths_.scores_csv()})) {
    const Json j = read_json(paths_.scores_json());
    air_ = score_table_from_json(j.at("air"), layout);
    apr_ = score_table_from_json(j.at("apr"), layout);
    reused_.push_back("scores");
  } else {
    air_ = air_scores(model(), probe(), corpus());
    apr_ = apr_scores(model(), corpus(), config_.probe);
    const Json j{{"config_hash", config_hash(config_)}, {"air", to_json(*air_)}, {"apr", to_json(*apr_)}};
    write_file(paths_.scores_json(), dump(j));
  }
  // scores.csv always reflects the configured method.
  write_file(paths_.scores_csv(), scores_to_csv(primary_scores()));
  record("scores", key, {paths_.scores_json(), paths_.scores_csv()});
}

const HeadScoreTable& Pipeline::air() {
  ensure_scores();
  return *air_;
}

const HeadScoreTable& Pipeline::apr() {
  ensure_scores();
  return *apr_;
}

const HeadScoreTable& Pipeline::primary_scores() {
  if (!air_ || !apr_) ensure_scores();
  return config_.attribution == ScoreMethod::air ? *air_ : *apr_;
}

const FrequencyMap& Pipeline::frequency() {
  if (frequency_) return *frequency_;
  const auto& scores = primary_scores();
  frequency_ = selection_frequency(scores, config_.grid);
  const auto key = frequency_key();
  if (fresh("frequency", key, {paths_.frequency_csv(), paths_.frequency_json()})) {
    reused_.push_back("frequency");
    return *frequency_;
  }
  const auto critical = critical_head_set(*frequency_, config_.critical_k);
  Json j = to_json(*frequency_);
  j["config_hash"] = config_hash(config_);
  j["method"] = to_string(config_.attribution);
  j["critical_heads"] = heads_json(critical.heads);
  write_file(paths_.frequency_csv(), frequency_to_csv(*frequency_));
  write_file(paths_.frequency_json(), dump(j));
  record("frequency", key, {paths_.frequency_csv(), paths_.frequency_json()});
  return *frequency_;
}

AttackSummary Pipeline::attack(const AllocationSpec& spec, double p0, ApplyMode mode) {
  const auto outcome = flip_outcomes(model(), probe(), corpus(), primary_scores(), spec, p0, mode);
  PlanRecord record_;
  record_.spec = spec;
  record_.p0 = p0;
  record_.mode = mode;
  record_.heads = outcome.heads;
  record_.sample_indices = outcome.samples;
  record_.epsilon_per_sample = outcome.epsilon;
  Json j = to_json(record_);
  j["config_hash"] = config_hash(config_);
  j["flip_rate"] = outcome.rate;

  char name[96];
  std::snprintf(name, sizeof name, "%s_a%.2f_p%.4g_%s.json", to_string(spec.strategy).c_str(),
                spec.alpha, p0, to_string(mode).c_str());
  AttackSummary summary;
  summary.plan_file = paths_.plans() / name;
  summary.flip_rate = outcome.rate;
  double sum = 0.0;
  for (double e : outcome.epsilon) sum += e;
  summary.mean_epsilon = sum / static_cast<double>(outcome.epsilon.size());
  write_file(summary.plan_file, dump(j));
  return summary;
}

Json Pipeline::evaluate() {
  const Model& m = model();
  const ProbeDataset& data = corpus();
  const SafetyProbe& p = probe();
  const HeadScoreTable& scores = primary_scores();
  const FrequencyMap& freq = frequency();
  const auto& cfg = config_;

  const auto probe_space = flip_outcomes(m, p, data, scores, cfg.allocation, cfg.p0, ApplyMode::probe_space);
  const auto in_model = flip_outcomes(m, p, data, scores, cfg.allocation, cfg.p0, ApplyMode::in_model);
  const auto& chosen = cfg.mode == ApplyMode::probe_space ? probe_space : in_model;

  const HeadLayout layout = m.layout();
  const Eigen::MatrixXd features = feature_matrix(m, data, probe_space.samples);
  double fidelity_sum = 0.0;
  double eps_sum = 0.0;
  for (std::size_t r = 0; r < probe_space.samples.size(); ++r) {
    const Eigen::VectorXd e = features.row(static_cast<Eigen::Index>(r)).transpose();
    const auto plan = make_plan(p, layout, e, probe_space.heads, cfg.p0);
    fidelity_sum += fidelity(e, apply_probe_space(e, plan));
    eps_sum += plan.epsilon;
  }
  const double n_mal = static_cast<double>(probe_space.samples.size());

  Json report;
  report["schema_version"] = kReportSchemaVersion;
  report["config_hash"] = config_hash(cfg);
  report["seed"] = cfg.seed;
  report["config"] = to_json(cfg);
  report["acc_orig"] = air().acc_orig.value_or(0.0);
  report["attribution"] = to_string(cfg.attribution);
  report["critical_heads"] = heads_json(critical_head_set(freq, cfg.critical_k).heads);
  report["attack"] = {{"strategy", to_string(cfg.allocation.strategy)},
                      {"alpha", cfg.allocation.alpha},
                      {"p0", cfg.p0},
                      {"mode", to_string(cfg.mode)},
                      {"heads", heads_json(chosen.heads)},
                      {"flip_rate", chosen.rate},
                      {"flip_rate_probe_space", probe_space.rate},
                      {"flip_rate_in_model", in_model.rate},
                      {"mean_epsilon", eps_sum / n_mal},
                      {"mean_fidelity", fidelity_sum / n_mal}};
  if (!cfg.model.planted.empty()) {
    const auto b = behavioral_asr(m, p, data, scores, cfg.allocation, cfg.p0);
    report["behavioral"] = {{"asr", b.asr},
                            {"baseline_refusal", b.baseline_refusal},
                            {"benign_unchanged", b.benign_unchanged}};
  } else {
    report["behavioral"] = nullptr;
  }

  const auto lwp = epsilon_profile(m, p, data, scores, cfg.grid, Strategy::lwp, cfg.p0);
  const auto gwp = epsilon_profile(m, p, data, scores, cfg.grid, Strategy::gwp, cfg.p0);
  CurveSeries fid_lwp{"fidelity_lwp", cfg.grid.ratios, lwp.mean_fidelity};
  CurveSeries fid_gwp{"fidelity_gwp", cfg.grid.ratios, gwp.mean_fidelity};
  const std::vector<CurveSeries> curves{
      lwp.curve,
      gwp.curve,
      flip_rate_curve(m, p, data, scores, cfg.grid, Strategy::lwp, cfg.p0, cfg.mode),
      flip_rate_curve(m, p, data, scores, cfg.grid, Strategy::gwp, cfg.p0, cfg.mode),
      fid_lwp,
      fid_gwp,
      jaccard_sweep(air(), apr(), cfg.grid, Strategy::lwp, Strategy::lwp),
      jaccard_sweep(air(), apr(), cfg.grid, Strategy::gwp, Strategy::gwp),
      jaccard_sweep(air(), air(), cfg.grid, Strategy::lwp, Strategy::gwp),
      jaccard_sweep(apr(), apr(), cfg.grid, Strategy::lwp, Strategy::gwp),
  };
  report["curves"] = Json::array();
  for (const auto& c : curves) report["curves"].push_back(curve_json(c));
  report["heatmaps"] = Json::array({heatmap_json(lwp.heatmap), heatmap_json(gwp.heatmap)});
  report["taylor_study"] = taylor_study(p, features.row(0).transpose(), cfg.p0);

  write_file(paths_.report(), dump(report));
  emit_report(paths_, false);
  return report;
}

Json Pipeline::run_all() {
  write_config();
  model();
  corpus();
  probe();
  ensure_scores();
  frequency();
  attack(config_.allocation, config_.p0, config_.mode);
  Json report = evaluate();
  emit_report(paths_, true);
  return report;
}

std::string curves_csv(const Json& report) {
  std::string out = "label,alpha,value\n";
  for (const auto& c : report.at("curves")) {
    const auto curve = curve_from_json(c);
    for (std::size_t i = 0; i < curve.x.size(); ++i) {
      out += curve.label + "," + csv_number(curve.x[i]) + "," + csv_number(curve.y[i]) + "\n";
    }
  }
  return out;
}

std::string heatmap_csv(const Json& heatmap) {
  const auto h = heatmap_from_json(heatmap);
  std::string out = "layer,alpha,value\n";
  for (Eigen::Index l = 0; l < h.values.rows(); ++l) {
    for (Eigen::Index a = 0; a < h.values.cols(); ++a) {
      out += std::to_string(l) + "," + csv_number(h.alphas[static_cast<std::size_t>(a)]) + "," +
             csv_number(h.values(l, a)) + "\n";
    }
  }
  return out;
}

std::vector<fs::path> emit_report(const RunPaths& paths, bool svg) {
  std::vector<std::string> missing;
  for (const auto& f : {paths.config(), paths.model(), paths.corpus(), paths.probe(), paths.scores_csv(),
                        paths.frequency_csv(), paths.report()}) {
    if (!fs::exists(f)) missing.push_back(f.string());
  }
  if (!missing.empty()) {
    std::string msg = "missing artifacts:";
    for (const auto& m : missing) msg += " " + m;
    throw MissingStage(msg);
  }
  const Json report = read_json(paths.report());
  std::vector<fs::path> written;
  write_file(paths.curves_csv(), curves_csv(report));
  written.push_back(paths.curves_csv());
  for (const auto& h : report.at("heatmaps")) {
    const std::string label = h.at("label").get<std::string>();
    const std::string stem = label.substr(label.find('_') + 1);  // "R_lwp" -> "lwp"
    write_file(paths.heatmap_csv(stem), heatmap_csv(h));
    written.push_back(paths.heatmap_csv(stem));
  }
  if (!svg) return written;

  std::vector<CurveSeries> eps, flips, jac;
  for (const auto& c : report.at("curves")) {
    auto curve = curve_from_json(c);
    if (curve.label.rfind("epsilon_", 0) == 0) eps.push_back(std::move(curve));
    else if (curve.label.rfind("flip_rate_", 0) == 0) flips.push_back(std::move(curve));
    else if (curve.label.rfind("jaccard_", 0) == 0) jac.push_back(std::move(curve));
  }
  const auto put = [&](const std::string& name, const std::string& body) {
    const auto path = paths.plots() / name;
    write_file(path, body);
    written.push_back(path);
  };
  put("epsilon.svg", line_chart_svg("Layer-averaged perturbation magnitude", "epsilon(alpha)", eps));
  put("flip_rate.svg", line_chart_svg("Probe flip rate", "flip rate", flips));
  put("jaccard.svg", line_chart_svg("Head-set Jaccard similarity", "Jaccard", jac));
  for (const auto& h : report.at("heatmaps")) {
    const auto grid = heatmap_from_json(h);
    const std::string stem = grid.label.substr(grid.label.find('_') + 1);
    put("heatmap_" + stem + ".svg", heatmap_svg("Per-head perturbation magnitude R_l(alpha), " + stem, grid));
  }
  return written;
}

}  // namespace headprobe
