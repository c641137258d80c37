#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace bltune {

enum class ErrorCode {
  MalformedProblem,
  NumericalFailure,
  NonnegativityMissing,
  InvalidBigM,
  Unbounded,
  NodeLimitExceeded,
  DimensionMismatch,
  InfeasibleModel,
  EmptyFlipSet,
  ParseError,
  MissingLabelColumn,
  SingleClassData,
  InsufficientSamples,
  DegenerateReference,
  ConfigError,
  InvariantViolation,
};

std::string_view to_string(ErrorCode code);

/// Base exception for every failure raised by the library. The code lets
/// callers (the CLI in particular) map failures onto exit statuses without
/// string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t row, std::string column, const std::string& what)
      : Error(ErrorCode::ParseError, "row " + std::to_string(row) + ", column '" + column + "': " + what),
        row_(row),
        column_(std::move(column)) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedProblem: return "MalformedProblem";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::NonnegativityMissing: return "NonnegativityMissing";
    case ErrorCode::InvalidBigM: return "InvalidBigM";
    case ErrorCode::Unbounded: return "Unbounded";
    case ErrorCode::NodeLimitExceeded: return "NodeLimitExceeded";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InfeasibleModel: return "InfeasibleModel";
    case ErrorCode::EmptyFlipSet: return "EmptyFlipSet";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MissingLabelColumn: return "MissingLabelColumn";
    case ErrorCode::SingleClassData: return "SingleClassData";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::DegenerateReference: return "DegenerateReference";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

}  // namespace bltune
