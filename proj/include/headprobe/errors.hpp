#pragma once

#include <stdexcept>
#include <string>

namespace headprobe {

// Error taxonomy. Each class maps to one stable CLI exit code (see tools/headprobe.cpp).

struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Training or evaluation data cannot support the requested fit (e.g. a single class).
struct DegenerateData : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The probe weight restricted to the selected support is identically zero.
struct BlindSupport : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The direction cannot raise the probe logit (w.v <= 0), so no magnitude reaches the target.
struct NoCrossing : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// A report was requested from a run directory that lacks upstream artifacts.
struct MissingStage : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace headprobe
