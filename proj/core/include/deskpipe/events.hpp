#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace deskpipe {

// Nanoseconds since episode start.
struct Timestamp {
  std::uint64_t ns = 0;

  static constexpr Timestamp from_ms(std::uint64_t ms) { return {ms * 1'000'000}; }
  static constexpr Timestamp from_s(double s) {
    return {static_cast<std::uint64_t>(s * 1e9 + 0.5)};
  }
  constexpr std::uint64_t ms() const { return ns / 1'000'000; }
  constexpr double seconds() const { return static_cast<double>(ns) / 1e9; }

  friend constexpr auto operator<=>(Timestamp, Timestamp) = default;
};

enum class MediaKind : std::uint8_t { External = 0, Embedded = 1 };

// Points a screen event at its pixels: a path to an external media store, or
// a handle ("embedded:<n>") to a payload carried inside the same container.
struct MediaRef {
  MediaKind kind = MediaKind::External;
  std::string uri;
  std::optional<std::uint32_t> frame_index;

  friend bool operator==(const MediaRef&, const MediaRef&) = default;
};

enum class KeyAction : std::uint8_t { Press = 0, Release = 1 };

// Windows raw-mouse button flags.
namespace mouse_flags {
inline constexpr std::uint16_t kLeftDown = 0x0001;
inline constexpr std::uint16_t kLeftUp = 0x0002;
inline constexpr std::uint16_t kRightDown = 0x0004;
inline constexpr std::uint16_t kRightUp = 0x0008;
inline constexpr std::uint16_t kMiddleDown = 0x0010;
inline constexpr std::uint16_t kMiddleUp = 0x0020;
inline constexpr std::uint16_t kButton4Down = 0x0040;
inline constexpr std::uint16_t kButton4Up = 0x0080;
inline constexpr std::uint16_t kButton5Down = 0x0100;
inline constexpr std::uint16_t kButton5Up = 0x0200;
inline constexpr std::uint16_t kWheel = 0x0400;
inline constexpr std::uint16_t kHWheel = 0x0800;
inline constexpr std::uint16_t kAllDefined = 0x0FFF;
inline constexpr std::uint16_t kAnyWheel = kWheel | kHWheel;
}  // namespace mouse_flags

inline constexpr std::int32_t kMaxMouseDelta = 1999;
inline constexpr std::int32_t kMaxScroll = 9;

struct ScreenEvent {
  Timestamp t;
  MediaRef media;
  std::uint32_t frame_index = 0;

  MediaRef frame_ref() const {
    MediaRef ref = media;
    ref.frame_index = frame_index;
    return ref;
  }

  friend bool operator==(const ScreenEvent&, const ScreenEvent&) = default;
};

struct KeyboardEvent {
  Timestamp t;
  std::uint16_t vk = 0;
  KeyAction action = KeyAction::Press;

  friend bool operator==(const KeyboardEvent&, const KeyboardEvent&) = default;
};

struct MouseEvent {
  Timestamp t;
  std::int32_t dx = 0;
  std::int32_t dy = 0;
  std::uint16_t button_flags = 0;
  std::optional<std::int32_t> scroll;

  friend bool operator==(const MouseEvent&, const MouseEvent&) = default;
};

// Alternative order is the tie-break rank at equal timestamps.
using Event = std::variant<ScreenEvent, KeyboardEvent, MouseEvent>;

enum class Topic : std::uint8_t { Screen = 0, Keyboard = 1, Mouse = 2 };

inline Topic topic_of(const Event& e) { return static_cast<Topic>(e.index()); }
Timestamp timestamp_of(const Event& e);
void set_timestamp(Event& e, Timestamp t);
inline bool is_action(const Event& e) { return !std::holds_alternative<ScreenEvent>(e); }
const char* topic_name(Topic topic);

struct Episode {
  std::string id;
  std::vector<Event> events;
  std::map<std::string, std::string> meta;

  friend bool operator==(const Episode&, const Episode&) = default;
};

// Throws InvalidEvent describing the first broken invariant.
void validate_event(const Event& e);

// Sorts by (timestamp, screen < keyboard < mouse, insertion order) and keeps
// only the last screen event among screens sharing a timestamp. Throws
// InvalidEvent naming the offending input index.
Episode normalize_stream(std::vector<Event> raw, std::string id = {},
                         std::map<std::string, std::string> meta = {});

// Bins screen and mouse events into fixed intervals; keyboard passes through.
// Screen: the latest frame per bin survives. Mouse: deltas and scroll summed,
// flags OR-merged, emitted at the bin start, clamped to the legal range. A bin
// with both vertical and horizontal wheel input yields a second event for the
// horizontal scroll. The number of clamped events is recorded in meta["resample_clamped"].
Episode resample_stream(const Episode& ep, std::uint32_t interval_ms = 50);

// Collapses action-free spans longer than `threshold_s` down to exactly
// `threshold_s` of lead-in before the next action. Screen-only episodes
// come back empty.
Episode filter_inactive(const Episode& ep, double threshold_s = 10.0);

struct Segment {
  double start_s = 0;
  double end_s = 0;

  friend bool operator==(const Segment&, const Segment&) = default;
};

// Two-minute windows over [60 s, duration - 120 s]; a trailing remainder is dropped.
std::vector<Segment> segment_screen_stream(std::uint64_t frame_count, double fps = 20.0);

// One line per event: `t_ns TYPE fields...`.
std::string format_event(const Event& e);

}  // namespace deskpipe
