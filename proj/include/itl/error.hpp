#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace itl {

enum class ErrorKind {
  NotSPD,
  NoConvergence,
  NegativeSpectrum,
  DimensionMismatch,
  InvalidSize,
  UnsatisfiableFlag,
  RetriesExhausted,
  SmootherInvalid,
  RankCondition,
  BreakdownNumerical,
  SingularBlock,
  SubspaceMismatch,
  BranchMismatch,
  NegativeRadicand,
  UnknownSolver,
  UnknownParameter,
  ConfigError,
  IoError,
  ParseError,
  InvariantViolation,
};

std::string_view to_string(ErrorKind kind);

/// Exception carrying a machine-readable kind; `what()` is prefixed with the kind name.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace itl
