#include "pegmentor/error.hpp"

namespace pegmentor {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::FrameMismatch: return "FrameMismatch";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::EpisodeFinished: return "EpisodeFinished";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyBuffer: return "EmptyBuffer";
    case ErrorCode::MalformedFile: return "MalformedFile";
    case ErrorCode::WrongMode: return "WrongMode";
    case ErrorCode::TooManyClicks: return "TooManyClicks";
    case ErrorCode::GuidanceUnavailable: return "GuidanceUnavailable";
    case ErrorCode::BadMessage: return "BadMessage";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace pegmentor
