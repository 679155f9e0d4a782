#pragma once

#include <stdexcept>
#include <string>

namespace occult {

enum class ErrorCode {
  InvalidArgument = 1,
  UnreadableFile,
  UnsupportedFormat,
  IoFailure,
  DegenerateSize,
  NoForeground,
  NegativeInput,
  GridMismatch,
  TooFewAngles,
  NonMonotoneWarp,
  MissingExternalImage,
  InvalidParams,
  SingleClass,
  DimensionMismatch,
  EmptyInput,
  WindowTooLarge,
  LengthMismatch,
  ZeroVariance,
  Numerical,
};

const char* error_code_name(ErrorCode code) noexcept;

// Every failure raised by the library carries one of the codes above so the
// C layer can translate it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace occult
