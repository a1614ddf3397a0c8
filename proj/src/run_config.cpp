#include "headprobe/run_config.hpp"

#include "headprobe/errors.hpp"
#include "headprobe/hash.hpp"

namespace headprobe {

namespace {

template <typename Fn>
auto convert(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const InvalidArgument& e) {
    throw ConfigError(path, e.what());
  }
}

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ConfigError(path, what);
}

}  // namespace

void RunConfig::apply_seed(std::uint64_t s) {
  seed = s;
  model.seed = s;
  probe.split_seed = s + 2;
}

RunConfig default_run_config() {
  RunConfig c;
  c.model = ModelConfig::uniform(4, 8, 8, 64, 16, 0);
  c.model.planted = {{{1, 4}, 10, 50}, {{2, 3}, 11, 50}, {{3, 0}, 12, 50}, {{3, 7}, 13, 50}};
  c.apply_seed(c.seed);
  return c;
}

RunConfig run_config_from_json(const Json& j) {
  RunConfig c = default_run_config();
  StrictObject root(j, "");
  const int version = root.get_int("schema_version");
  require(version == kConfigSchemaVersion, "schema_version",
          "unsupported version " + std::to_string(version));
  const std::uint64_t seed = root.get_u64("seed", c.seed);

  if (root.has("model")) {
    const Json& m = root.at("model");
    require(!m.is_object() || !m.contains("seed"), "model.seed",
            "set the run seed at the top level");
    c.model = model_config_from_json(m, "model");
  }

  if (root.has("corpus")) {
    StrictObject o(root.at("corpus"), "corpus");
    c.corpus.n_benign = o.get_int("benign", c.corpus.n_benign);
    c.corpus.n_malicious = o.get_int("malicious", c.corpus.n_malicious);
    c.corpus.min_len = o.get_int("min_len", c.corpus.min_len);
    c.corpus.max_len = o.get_int("max_len", c.corpus.max_len);
    o.finish();
  }
  require(c.corpus.n_benign >= 0, "corpus.benign", "must be nonnegative");
  require(c.corpus.n_malicious >= 0, "corpus.malicious", "must be nonnegative");
  require(c.corpus.n_benign + c.corpus.n_malicious >= 1, "corpus", "requests no samples");
  require(c.corpus.min_len >= 1, "corpus.min_len", "must be at least 1");
  require(c.corpus.max_len >= c.corpus.min_len, "corpus.max_len", "must be >= min_len");
  require(c.corpus.max_len <= c.model.max_seq_len, "corpus.max_len", "exceeds model.max_seq_len");

  if (root.has("probe")) {
    StrictObject o(root.at("probe"), "probe");
    c.probe.step_size = o.get_double("step_size", c.probe.step_size);
    c.probe.max_iters = o.get_int("max_iters", c.probe.max_iters);
    c.probe.tolerance = o.get_double("tolerance", c.probe.tolerance);
    c.probe.l2 = o.get_double("l2", c.probe.l2);
    c.probe.eval_fraction = o.get_double("eval_fraction", c.probe.eval_fraction);
    o.finish();
  }
  require(c.probe.max_iters >= 1, "probe.max_iters", "must be at least 1");
  require(c.probe.tolerance >= 0.0, "probe.tolerance", "must be nonnegative");
  require(c.probe.l2 >= 0.0, "probe.l2", "must be nonnegative");
  require(c.probe.eval_fraction > 0.0 && c.probe.eval_fraction < 1.0, "probe.eval_fraction",
          "must lie in (0, 1)");

  if (root.has("attribution")) {
    const auto s = root.get_string("attribution");
    c.attribution = convert("attribution", [&] { return score_method_from_string(s); });
  }
  if (root.has("allocation")) {
    StrictObject o(root.at("allocation"), "allocation");
    if (o.has("strategy")) {
      const auto s = o.get_string("strategy");
      c.allocation.strategy = convert(o.child("strategy"), [&] { return strategy_from_string(s); });
    }
    c.allocation.alpha = o.get_double("alpha", c.allocation.alpha);
    o.finish();
  }
  require(c.allocation.alpha > 0.0 && c.allocation.alpha <= 1.0, "allocation.alpha",
          "must lie in (0, 1]");
  if (root.has("grid")) {
    const Json& g = root.at("grid");
    require(g.is_array(), "grid", "expected an array");
    c.grid.ratios.clear();
    for (std::size_t i = 0; i < g.size(); ++i) {
      require(g[i].is_number(), "grid[" + std::to_string(i) + "]", "expected a number");
      c.grid.ratios.push_back(g[i].get<double>());
    }
    convert("grid", [&] { c.grid.validate(); return 0; });
  }
  c.p0 = root.get_double("p0", c.p0);
  require(c.p0 > 0.0 && c.p0 < 1.0, "p0", "must lie in (0, 1)");
  if (root.has("mode")) {
    const auto s = root.get_string("mode");
    c.mode = convert("mode", [&] { return apply_mode_from_string(s); });
  }
  if (root.has("critical_k")) {
    const int k = root.get_int("critical_k");
    require(k >= 0, "critical_k", "must be nonnegative");
    c.critical_k = static_cast<std::size_t>(k);
  }
  require(c.critical_k <= static_cast<std::size_t>(c.model.layout().total_heads()), "critical_k",
          "exceeds the number of heads");
  root.finish();
  c.apply_seed(seed);
  return c;
}

Json to_json(const RunConfig& c) {
  Json model = to_json(c.model);
  model.erase("seed");
  return Json{{"schema_version", kConfigSchemaVersion},
              {"seed", c.seed},
              {"model", model},
              {"corpus",
               {{"benign", c.corpus.n_benign},
                {"malicious", c.corpus.n_malicious},
                {"min_len", c.corpus.min_len},
                {"max_len", c.corpus.max_len}}},
              {"probe",
               {{"step_size", c.probe.step_size},
                {"max_iters", c.probe.max_iters},
                {"tolerance", c.probe.tolerance},
                {"l2", c.probe.l2},
                {"eval_fraction", c.probe.eval_fraction}}},
              {"attribution", to_string(c.attribution)},
              {"allocation", {{"strategy", to_string(c.allocation.strategy)}, {"alpha", c.allocation.alpha}}},
              {"grid", c.grid.ratios},
              {"p0", c.p0},
              {"mode", to_string(c.mode)},
              {"critical_k", c.critical_k}};
}

std::string json_hash(const Json& j) { return sha256_hex(j.dump()).substr(0, 16); }

std::string config_hash(const RunConfig& config) { return json_hash(to_json(config)); }

}  // namespace headprobe
