#pragma once

#include <filesystem>
#include <string>

#include "headprobe/transformer.hpp"

namespace headprobe {

// Model container: one line of JSON manifest
//   {"format":"headprobe-model","version":1,"config":{...},
//    "tensors":[{"name":..,"shape":[rows,cols],"offset":bytes},...],"data_bytes":n}
// followed by '\n' and the tensors as row-major little-endian float32, back to back.
// Offsets are relative to the first byte after the newline.

std::string serialize_model(const Model& model);
Model deserialize_model(const std::string& bytes);

void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

}  // namespace headprobe
