#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dccfr {

enum class ErrorCode {
  // input validation
  MalformedRow,
  NonUniformSpacing,
  OutOfRange,
  EmptyFile,
  IncompatibleStep,
  WrongKind,
  BadDays,
  BadUtilization,
  ConfigInvalid,
  InvalidAction,
  MaskedAction,
  ShapeMismatch,
  LengthMismatch,
  AllMasked,
  Empty,
  MissingRuns,
  NoTrace,
  // runtime
  NonFinite,
  EmptyBuffer,
  NonFiniteLoss,
  IoError,
};

inline std::string_view to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::NonUniformSpacing: return "NonUniformSpacing";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::IncompatibleStep: return "IncompatibleStep";
    case ErrorCode::WrongKind: return "WrongKind";
    case ErrorCode::BadDays: return "BadDays";
    case ErrorCode::BadUtilization: return "BadUtilization";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::InvalidAction: return "InvalidAction";
    case ErrorCode::MaskedAction: return "MaskedAction";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::AllMasked: return "AllMasked";
    case ErrorCode::Empty: return "Empty";
    case ErrorCode::MissingRuns: return "MissingRuns";
    case ErrorCode::NoTrace: return "NoTrace";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::EmptyBuffer: return "EmptyBuffer";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Validation errors are caused by bad inputs (exit code 2 in the CLI);
/// everything else is a runtime failure (exit code 1).
inline bool is_validation_error(ErrorCode c) {
  switch (c) {
    case ErrorCode::NonFinite:
    case ErrorCode::EmptyBuffer:
    case ErrorCode::NonFiniteLoss:
    case ErrorCode::IoError:
      return false;
    default:
      return true;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dccfr
