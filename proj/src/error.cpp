#include "itl/error.hpp"

namespace itl {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotSPD: return "NotSPD";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::NegativeSpectrum: return "NegativeSpectrum";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidSize: return "InvalidSize";
    case ErrorKind::UnsatisfiableFlag: return "UnsatisfiableFlag";
    case ErrorKind::RetriesExhausted: return "RetriesExhausted";
    case ErrorKind::SmootherInvalid: return "SmootherInvalid";
    case ErrorKind::RankCondition: return "RankCondition";
    case ErrorKind::BreakdownNumerical: return "BreakdownNumerical";
    case ErrorKind::SingularBlock: return "SingularBlock";
    case ErrorKind::SubspaceMismatch: return "SubspaceMismatch";
    case ErrorKind::BranchMismatch: return "BranchMismatch";
    case ErrorKind::NegativeRadicand: return "NegativeRadicand";
    case ErrorKind::UnknownSolver: return "UnknownSolver";
    case ErrorKind::UnknownParameter: return "UnknownParameter";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::InvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

}  // namespace itl
