#include "sdma/error.hpp"

namespace sdma {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::NonPositiveValue: return "NonPositiveValue";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::NonFiniteSample: return "NonFiniteSample";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteResidual: return "NonFiniteResidual";
    case ErrorCode::LinearSolveFailure: return "LinearSolveFailure";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::CoefficientOverflow: return "CoefficientOverflow";
    case ErrorCode::NameArityMismatch: return "NameArityMismatch";
    case ErrorCode::UnsupportedClass: return "UnsupportedClass";
    case ErrorCode::Format: return "Format";
  }
  return "Unknown";
}

}  // namespace sdma
