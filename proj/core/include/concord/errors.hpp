#pragma once

#include <stdexcept>
#include <string>

namespace concord {

/**
 * @brief Invalid configuration detected before any data is touched.
 *
 * Raised for bad experiment files, impossible level definitions
 * (horizon not divisible by the window length, non-positive weights)
 * and forecaster parameters that can never be satisfied.
 */
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Input data violates a precondition: missing file, absent column,
/// series shorter than the requested split, malformed numeric cell.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// A numerical routine failed outright (singular normal equations,
/// quantities that must be finite turning infinite). Optimizer
/// non-convergence is reported through diagnostics instead.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace concord
