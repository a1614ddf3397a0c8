#include "headprobe/model_io.hpp"

#include <bit>
#include <cstring>
#include <map>

#include "headprobe/errors.hpp"
#include "headprobe/json_io.hpp"

namespace headprobe {

namespace {

static_assert(std::endian::native == std::endian::little, "model container assumes little-endian");

constexpr const char* kFormat = "headprobe-model";
constexpr int kVersion = 1;

}  // namespace

std::string serialize_model(const Model& model) {
  Json tensors = Json::array();
  std::string data;
  model.for_each_tensor([&](const std::string& name, const MatrixX<double>& m) {
    tensors.push_back({{"name", name}, {"shape", {m.rows(), m.cols()}}, {"offset", data.size()}});
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const auto f = static_cast<float>(m(r, c));
        char buf[sizeof f];
        std::memcpy(buf, &f, sizeof f);
        data.append(buf, sizeof f);
      }
    }
  });
  const Json manifest{{"format", kFormat},
                      {"version", kVersion},
                      {"config", to_json(model.config)},
                      {"tensors", tensors},
                      {"data_bytes", data.size()}};
  return manifest.dump() + "\n" + data;
}

Model deserialize_model(const std::string& bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw IoError("model container has no manifest line");
  Json manifest;
  try {
    manifest = Json::parse(bytes.substr(0, nl));
  } catch (const Json::parse_error& e) {
    throw IoError(std::string("malformed model manifest: ") + e.what());
  }
  if (manifest.value("format", "") != kFormat || manifest.value("version", 0) != kVersion) {
    throw IoError("not a headprobe-model v1 container");
  }
  const std::size_t base = nl + 1;
  const auto data_bytes = manifest.at("data_bytes").get<std::size_t>();
  if (bytes.size() - base != data_bytes) throw IoError("model container truncated");

  Model model;
  try {
    model.config = model_config_from_json(manifest.at("config"), "config");
  } catch (const ConfigError& e) {
    throw IoError(std::string("bad model config: ") + e.what());
  }
  model.blocks.resize(model.config.heads_per_layer.size());

  std::map<std::string, Json> directory;
  for (const auto& t : manifest.at("tensors")) directory[t.at("name").get<std::string>()] = t;

  model.for_each_tensor([&](const std::string& name, MatrixX<double>& m) {
    const auto it = directory.find(name);
    if (it == directory.end()) throw IoError("model container lacks tensor " + name);
    const auto rows = it->second.at("shape").at(0).get<Eigen::Index>();
    const auto cols = it->second.at("shape").at(1).get<Eigen::Index>();
    const auto offset = it->second.at("offset").get<std::size_t>();
    const auto count = static_cast<std::size_t>(rows * cols);
    if (offset + count * sizeof(float) > data_bytes) throw IoError("tensor " + name + " overruns data");
    m.resize(rows, cols);
    const char* p = bytes.data() + base + offset;
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c, p += sizeof(float)) {
        float f;
        std::memcpy(&f, p, sizeof f);
        m(r, c) = static_cast<double>(f);
      }
    }
  });
  try {
    model.check_shapes();
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("inconsistent model container: ") + e.what());
  }
  return model;
}

void save_model(const std::filesystem::path& path, const Model& model) {
  write_file(path, serialize_model(model));
}

Model load_model(const std::filesystem::path& path) { return deserialize_model(read_file(path)); }

}  // namespace headprobe
