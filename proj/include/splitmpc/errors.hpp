#pragma once

#include <stdexcept>
#include <string>

namespace splitmpc {

/// Precondition violation on a scalar parameter (sampling time, mass, ...).
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A state that was required to lie in a set does not.
class Infeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scenario file could not be read or failed validation. `key()` names the
/// offending config key (empty for file-level problems).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Closed-loop run cannot continue (non-finite plant state).
class SolverAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace splitmpc
