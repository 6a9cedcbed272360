#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace deskpipe {

// Machine-readable error classes. The CLI prints the class name verbatim.
enum class ErrorClass {
  InvalidEvent,
  IoFailure,
  MediaMissing,
  CorruptChunk,
  NoFooter,
  NotAContainer,
  FrameOutOfRange,
  DimensionMismatch,
  CorruptFrame,
  EndOfStream,
  OutOfRange,
  MalformedEvent,
  GapTooLarge,
  EventTooLarge,
  LengthMismatch,
  InvalidArgument,
};

std::string_view error_class_name(ErrorClass cls) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& message)
      : std::runtime_error(message), cls_(cls) {}

  ErrorClass error_class() const noexcept { return cls_; }

 private:
  ErrorClass cls_;
};

[[noreturn]] void throw_error(ErrorClass cls, const std::string& message);

inline void enforce(bool condition, ErrorClass cls, const char* message) {
  if (!condition) [[unlikely]] throw_error(cls, message);
}

inline void enforce(bool condition, ErrorClass cls, const std::string& message) {
  if (!condition) [[unlikely]] throw_error(cls, message);
}

}  // namespace deskpipe
