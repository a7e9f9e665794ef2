#pragma once

#include <stdexcept>
#include <string>

namespace vadfuse {

enum class ErrorCode {
  kNotWav,
  kUnsupportedFormat,
  kWrongRate,
  kTooShort,
  kDimMismatch,
  kNonFiniteLoss,
  kBadMagic,
  kDimHeaderMismatch,
  kTruncatedFile,
  kInvalidTraceback,
  kSpanOutOfRange,
  kSilentClean,
  kOverlappingSegments,
  kLengthMismatch,
  kEmptyGrid,
  kIoError,
  kBadConfig,
};

inline const char* error_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::kNotWav: return "NotWav";
    case ErrorCode::kUnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::kWrongRate: return "WrongRate";
    case ErrorCode::kTooShort: return "TooShort";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kDimHeaderMismatch: return "DimHeaderMismatch";
    case ErrorCode::kTruncatedFile: return "TruncatedFile";
    case ErrorCode::kInvalidTraceback: return "InvalidTraceback";
    case ErrorCode::kSpanOutOfRange: return "SpanOutOfRange";
    case ErrorCode::kSilentClean: return "SilentClean";
    case ErrorCode::kOverlappingSegments: return "OverlappingSegments";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kEmptyGrid: return "EmptyGrid";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kBadConfig: return "BadConfig";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vadfuse
