#include "occult/error.hpp"

namespace occult {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UnreadableFile: return "UnreadableFile";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::DegenerateSize: return "DegenerateSize";
    case ErrorCode::NoForeground: return "NoForeground";
    case ErrorCode::NegativeInput: return "NegativeInput";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::TooFewAngles: return "TooFewAngles";
    case ErrorCode::NonMonotoneWarp: return "NonMonotoneWarp";
    case ErrorCode::MissingExternalImage: return "MissingExternalImage";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::WindowTooLarge: return "WindowTooLarge";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::Numerical: return "Numerical";
  }
  return "Unknown";
}

}  // namespace occult
