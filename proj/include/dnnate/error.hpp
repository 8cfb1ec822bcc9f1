#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dnnate {

// Bad arguments, shapes, or preconditions supplied by the caller.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite loss during training. Carries the epoch at which it happened.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::size_t epoch, const std::string& what)
      : std::runtime_error(what), epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

// A CSV header that does not carry a column the schema asks for.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Row-level data problems. `row` is 1-based and counts data rows (header excluded).
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::size_t row, const std::string& what)
      : std::runtime_error(what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

// Configuration file or flag problems; the CLI maps these to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dnnate
