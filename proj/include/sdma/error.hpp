#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sdma {

enum class ErrorCode {
  InvalidArgument,
  Io,
  MalformedRow,
  NonPositiveValue,
  EmptyFile,
  NonFiniteSample,
  DimensionMismatch,
  NonFiniteResidual,
  LinearSolveFailure,
  NonFiniteGradient,
  DegenerateData,
  CoefficientOverflow,
  NameArityMismatch,
  UnsupportedClass,
  Format,
};

const char* to_string(ErrorCode code);

/// Exception type thrown by every fallible operation in the library.
/// `row()` is the 0-based data row for CSV errors, or npos.
class Error : public std::runtime_error {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  Error(ErrorCode code, const std::string& what, std::size_t row = npos)
      : std::runtime_error(what), code_(code), row_(row) {}

  ErrorCode code() const noexcept { return code_; }
  std::size_t row() const noexcept { return row_; }

 private:
  ErrorCode code_;
  std::size_t row_;
};

}  // namespace sdma
