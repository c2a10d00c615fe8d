#pragma once

#include <stdexcept>
#include <string>

namespace skewcast {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  ZeroDenominator,
  DuplicateModelId,
  UnknownModelId,
  EmptyInput,
  ShapeInconsistent,
  ParseError,
  IoError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::DimensionMismatch: return "dimension_mismatch";
    case ErrorCode::ZeroDenominator: return "zero_denominator";
    case ErrorCode::DuplicateModelId: return "duplicate_model_id";
    case ErrorCode::UnknownModelId: return "unknown_model_id";
    case ErrorCode::EmptyInput: return "empty_input";
    case ErrorCode::ShapeInconsistent: return "shape_inconsistent";
    case ErrorCode::ParseError: return "parse_error";
    case ErrorCode::IoError: return "io_error";
  }
  return "unknown";
}

/// Library-wide exception carrying a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace skewcast
