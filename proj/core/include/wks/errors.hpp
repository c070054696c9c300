#pragma once

#include <stdexcept>
#include <string>

namespace wks {

/// Invalid run configuration or command-line usage. CLI exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite activations or loss detected during training.
struct TrainingDiverged : std::runtime_error {
  explicit TrainingDiverged(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace wks
