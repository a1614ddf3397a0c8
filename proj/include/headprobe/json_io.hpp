#pragma once

#include <filesystem>
#include <initializer_list>
#include <optional>
#include <set>
#include <string>

#include "json.hpp"
#include "headprobe/model_config.hpp"

namespace headprobe {

using Json = nlohmann::json;

/// Reads a JSON object field by field, recording the dotted path for error messages.
/// finish() rejects keys that were never read.
class StrictObject {
 public:
  StrictObject(const Json& j, std::string path);

  bool has(const std::string& key) const { return j_.contains(key); }
  const Json& at(const std::string& key);
  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const std::string& path() const { return path_; }

  int get_int(const std::string& key, std::optional<int> fallback = std::nullopt);
  std::uint64_t get_u64(const std::string& key, std::optional<std::uint64_t> fallback = std::nullopt);
  double get_double(const std::string& key, std::optional<double> fallback = std::nullopt);
  std::string get_string(const std::string& key, std::optional<std::string> fallback = std::nullopt);

  void finish() const;

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Json to_json(const HeadId& id);
HeadId head_id_from_json(const Json& j, const std::string& path);

Json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const Json& j, const std::string& path);

// Deterministic dump (sorted keys, 2-space indent, trailing newline).
std::string dump(const Json& j);

std::string read_file(const std::filesystem::path& path);
// Writes through a temporary file and rename.
void write_file(const std::filesystem::path& path, const std::string& bytes);
Json read_json(const std::filesystem::path& path);

}  // namespace headprobe
