#pragma once

#include <stdexcept>
#include <string>

namespace rvcalign {

enum class ErrorCode {
  InvalidArgument,
  InsufficientFloorPoints,
  SensorOutsideScene,
  EmptySlab,
  EmptyCloud,
  NoMissingRegion,
  BoundaryNotVisible,
  CompletionFailed,
  ZeroConfidenceGroup,
  InvalidSpec,
  InvalidConfig,
  IoError,
};

const char* to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (the pipeline, the CLI) can route on it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InsufficientFloorPoints: return "InsufficientFloorPoints";
    case ErrorCode::SensorOutsideScene: return "SensorOutsideScene";
    case ErrorCode::EmptySlab: return "EmptySlab";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::NoMissingRegion: return "NoMissingRegion";
    case ErrorCode::BoundaryNotVisible: return "BoundaryNotVisible";
    case ErrorCode::CompletionFailed: return "CompletionFailed";
    case ErrorCode::ZeroConfidenceGroup: return "ZeroConfidenceGroup";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace rvcalign
