#include "headprobe/json_io.hpp"

#include <fstream>
#include <sstream>

#include "headprobe/errors.hpp"

namespace headprobe {

StrictObject::StrictObject(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
  if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
}

const Json& StrictObject::at(const std::string& key) {
  if (!j_.contains(key)) throw ConfigError(child(key), "missing required field");
  seen_.insert(key);
  return j_.at(key);
}

int StrictObject::get_int(const std::string& key, std::optional<int> fallback) {
  if (!has(key) && fallback) return *fallback;
  const Json& v = at(key);
  if (!v.is_number_integer()) throw ConfigError(child(key), "expected an integer");
  return v.get<int>();
}

std::uint64_t StrictObject::get_u64(const std::string& key, std::optional<std::uint64_t> fallback) {
  if (!has(key) && fallback) return *fallback;
  const Json& v = at(key);
  if (!v.is_number_unsigned()) throw ConfigError(child(key), "expected a nonnegative integer");
  return v.get<std::uint64_t>();
}

double StrictObject::get_double(const std::string& key, std::optional<double> fallback) {
  if (!has(key) && fallback) return *fallback;
  const Json& v = at(key);
  if (!v.is_number()) throw ConfigError(child(key), "expected a number");
  return v.get<double>();
}

std::string StrictObject::get_string(const std::string& key, std::optional<std::string> fallback) {
  if (!has(key) && fallback) return *fallback;
  const Json& v = at(key);
  if (!v.is_string()) throw ConfigError(child(key), "expected a string");
  return v.get<std::string>();
}

void StrictObject::finish() const {
  for (const auto& [key, _] : j_.items()) {
    if (seen_.count(key) == 0) throw ConfigError(child(key), "unknown field");
  }
}

Json to_json(const HeadId& id) { return Json{{"layer", id.layer}, {"head", id.head}}; }

HeadId head_id_from_json(const Json& j, const std::string& path) {
  StrictObject o(j, path);
  HeadId id{o.get_int("layer"), o.get_int("head")};
  o.finish();
  return id;
}

Json to_json(const ModelConfig& c) {
  Json planted = Json::array();
  for (const auto& p : c.planted) {
    planted.push_back({{"layer", p.head.layer},
                       {"head", p.head.head},
                       {"trigger", p.trigger_token},
                       {"refusal", p.refusal_token}});
  }
  Json dead = Json::array();
  for (const auto& d : c.dead) dead.push_back(to_json(d));
  return Json{{"heads_per_layer", c.heads_per_layer},
              {"d_head", c.d_head},
              {"d_model", c.d_model},
              {"vocab_size", c.vocab_size},
              {"max_seq_len", c.max_seq_len},
              {"seed", c.seed},
              {"planted", planted},
              {"dead", dead}};
}

ModelConfig model_config_from_json(const Json& j, const std::string& path) {
  StrictObject o(j, path);
  ModelConfig c;
  if (o.has("heads_per_layer")) {
    if (o.has("layers") || o.has("heads")) {
      throw ConfigError(o.child("heads_per_layer"), "give either heads_per_layer or layers/heads");
    }
    const Json& hpl = o.at("heads_per_layer");
    if (!hpl.is_array()) throw ConfigError(o.child("heads_per_layer"), "expected an array");
    for (std::size_t i = 0; i < hpl.size(); ++i) {
      if (!hpl[i].is_number_integer()) {
        throw ConfigError(o.child("heads_per_layer") + "[" + std::to_string(i) + "]",
                          "expected an integer");
      }
      c.heads_per_layer.push_back(hpl[i].get<int>());
    }
  } else {
    const int layers = o.get_int("layers");
    const int heads = o.get_int("heads");
    if (layers < 1) throw ConfigError(o.child("layers"), "must be at least 1");
    if (heads < 1) throw ConfigError(o.child("heads"), "must be at least 1");
    c.heads_per_layer.assign(static_cast<std::size_t>(layers), heads);
  }
  c.d_head = o.get_int("d_head", 8);
  int widest = 0;
  for (int h : c.heads_per_layer) widest = std::max(widest, h);
  c.d_model = o.get_int("d_model", widest * c.d_head);
  c.vocab_size = o.get_int("vocab_size", 64);
  c.max_seq_len = o.get_int("max_seq_len", 16);
  c.seed = o.get_u64("seed", 0);
  if (o.has("planted")) {
    const Json& arr = o.at("planted");
    if (!arr.is_array()) throw ConfigError(o.child("planted"), "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      StrictObject p(arr[i], o.child("planted") + "[" + std::to_string(i) + "]");
      PlantedHead ph;
      ph.head = {p.get_int("layer"), p.get_int("head")};
      ph.trigger_token = p.get_int("trigger");
      ph.refusal_token = p.get_int("refusal");
      p.finish();
      c.planted.push_back(ph);
    }
  }
  if (o.has("dead")) {
    const Json& arr = o.at("dead");
    if (!arr.is_array()) throw ConfigError(o.child("dead"), "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      c.dead.push_back(head_id_from_json(arr[i], o.child("dead") + "[" + std::to_string(i) + "]"));
    }
  }
  o.finish();
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(path.empty() ? "model" : path, e.what());
  }
  return c;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory " + path.parent_path().string());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string());
}

Json read_json(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace headprobe
