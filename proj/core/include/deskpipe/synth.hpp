#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "deskpipe/codec.hpp"
#include "deskpipe/events.hpp"

namespace deskpipe {

// Procedural desktop session: a rectangle on a flat background, moved by the
// synthetic mouse stream and brightened while any key is held.
struct SynthConfig {
  std::uint64_t seed = 42;
  double duration_s = 10.0;
  double fps = 20.0;
  std::uint16_t width = 160;
  std::uint16_t height = 96;
  std::string actor = "rect-chase";  // or "random-walk"
  double idle_rate = 0.01;           // idle spans started per second
  double idle_min_s = 3.0;
  double idle_max_s = 15.0;

  void validate() const;
};

inline constexpr std::uint8_t kSynthBackground = 32;
inline constexpr std::uint8_t kSynthRect = 200;
inline constexpr std::uint8_t kSynthRectKeyed = 255;
inline constexpr std::uint16_t kSynthRectW = 16;
inline constexpr std::uint16_t kSynthRectH = 12;

struct SynthSession {
  Episode episode;
  std::vector<Frame> frames;
  // Rectangle top-left at each frame; equals the wrapped sum of all mouse
  // deltas strictly before that frame's timestamp.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> positions;
};

// Screen event i sits at i / fps and points at frame i of `media_uri`. Mouse
// events fall strictly between frames. Throws InvalidArgument.
SynthSession synth_generate(const SynthConfig& cfg, const std::string& media_uri,
                            const std::string& episode_id = "synthetic");

// Locates the rectangle's top-left corner. Throws CorruptFrame when absent.
std::pair<std::uint32_t, std::uint32_t> locate_rect(const Frame& frame);

// Ground-truth inverse dynamics for synthetic sessions: recovers the mouse
// displacement between consecutive screen frames and emits it as one mouse
// event at the earlier frame's timestamp. Screen events are copied through.
Episode oracle_idm(const MediaStore& store, const Episode& ep);

}  // namespace deskpipe
