#pragma once

#include <stdexcept>
#include <string>

namespace calopf {

/// Malformed input text: carries the 1-based source line and the offending field.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line = 0, std::string field = {})
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line),
        field_(std::move(field)) {}

  int line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  int line_;
  std::string field_;
};

/// Well-formed input that violates a domain invariant (missing slack, disconnected grid, ...).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A calibration margin that cannot be applied to a particular line or slack generator.
class CalibrationError : public ValidationError {
 public:
  CalibrationError(const std::string& what, int line_index = -1)
      : ValidationError(what), line_index_(line_index) {}

  /// Offending branch index, or -1 when the slack range is at fault.
  int line_index() const noexcept { return line_index_; }

 private:
  int line_index_;
};

/// Factorization breakdown, NaN during training, and similar numerical failures.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Corrupted or mismatched dataset/model files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace calopf
