#include "deskpipe/errors.hpp"

namespace deskpipe {

std::string_view error_class_name(ErrorClass cls) noexcept {
  switch (cls) {
    case ErrorClass::InvalidEvent: return "InvalidEvent";
    case ErrorClass::IoFailure: return "IoFailure";
    case ErrorClass::MediaMissing: return "MediaMissing";
    case ErrorClass::CorruptChunk: return "CorruptChunk";
    case ErrorClass::NoFooter: return "NoFooter";
    case ErrorClass::NotAContainer: return "NotAContainer";
    case ErrorClass::FrameOutOfRange: return "FrameOutOfRange";
    case ErrorClass::DimensionMismatch: return "DimensionMismatch";
    case ErrorClass::CorruptFrame: return "CorruptFrame";
    case ErrorClass::EndOfStream: return "EndOfStream";
    case ErrorClass::OutOfRange: return "OutOfRange";
    case ErrorClass::MalformedEvent: return "MalformedEvent";
    case ErrorClass::GapTooLarge: return "GapTooLarge";
    case ErrorClass::EventTooLarge: return "EventTooLarge";
    case ErrorClass::LengthMismatch: return "LengthMismatch";
    case ErrorClass::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

void throw_error(ErrorClass cls, const std::string& message) {
  throw Error(cls, message);
}

}  // namespace deskpipe
