#pragma once

#include <stdexcept>
#include <string>

namespace sdore {

/// Caller broke a documented precondition (shape mismatch, empty batch, ...).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input file (checkpoint, CSV, config).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input parsed but describes an invalid object.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Requested a quantity the producing computation did not provide.
class CapabilityError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Configuration schema violation; `field` names the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace sdore
