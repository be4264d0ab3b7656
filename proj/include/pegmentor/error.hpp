#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pegmentor {

enum class ErrorCode {
  FrameMismatch,
  BehindCamera,
  TooFewPoints,
  DegenerateGeometry,
  EpisodeFinished,
  ShapeMismatch,
  EmptyBuffer,
  MalformedFile,
  WrongMode,
  TooManyClicks,
  GuidanceUnavailable,
  BadMessage,
  InvalidArgument,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Base exception for every recoverable failure in the library. The code is
/// stable and is what the wire protocol and the CLI report.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code),
        detail_(detail) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace pegmentor
