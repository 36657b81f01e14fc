#pragma once

#include <stdexcept>
#include <string>

namespace cbqg {

// Bad call arguments: shapes, ranges, sizes.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Mathematically undefined input, e.g. a zero-norm vector.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Operation invoked in the wrong state (stale tape, missing forward graph).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Inconsistent configuration: invalid field, vocab mismatch, bad checkpoint.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg, std::string field = {})
      : std::runtime_error(msg), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// A file could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or unusable input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cbqg
