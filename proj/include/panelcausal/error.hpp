#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace panelcausal {

/// Base class for every error raised by the library.
///
/// Errors derived from ConfigError are usage problems (CLI exit code 1);
/// everything else is a data or estimation problem (exit code 2).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class DuplicateRowError : public Error {
 public:
  DuplicateRowError(const std::string& message, std::size_t line)
      : Error(message), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

class EnumValueError : public Error {
 public:
  using Error::Error;
};

class DuplicateEventError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class EmptyDesignError : public Error {
 public:
  using Error::Error;
};

class RankDeficientError : public Error {
 public:
  RankDeficientError(const std::string& message, std::vector<std::string> columns)
      : Error(message), columns_(std::move(columns)) {}
  /// Columns that take part in at least one exact linear dependency.
  const std::vector<std::string>& columns() const { return columns_; }

 private:
  std::vector<std::string> columns_;
};

class FixedEffectsDegenerateError : public Error {
 public:
  using Error::Error;
};

class DegenerateDecompositionError : public Error {
 public:
  using Error::Error;
};

class FoldConfigError : public Error {
 public:
  using Error::Error;
};

class DiagnosticUnavailableError : public Error {
 public:
  using Error::Error;
};

class HarnessError : public Error {
 public:
  using Error::Error;
};

}  // namespace panelcausal
