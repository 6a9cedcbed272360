#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "deskpipe/codec.hpp"
#include "deskpipe/events.hpp"

namespace deskpipe::testing {

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "deskpipe-test-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) std::abort();
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::int64_t uniform(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

// Valid mouse flags: any 12-bit mask with at most one wheel bit.
inline std::uint16_t random_flags(std::mt19937_64& rng) {
  auto f = static_cast<std::uint16_t>(uniform(rng, 0, 0xFFF));
  if ((f & mouse_flags::kAnyWheel) == mouse_flags::kAnyWheel) f &= ~mouse_flags::kHWheel;
  return f;
}

inline MouseEvent random_mouse(std::mt19937_64& rng, Timestamp t) {
  MouseEvent m;
  m.t = t;
  m.dx = static_cast<std::int32_t>(uniform(rng, -kMaxMouseDelta, kMaxMouseDelta));
  m.dy = static_cast<std::int32_t>(uniform(rng, -kMaxMouseDelta, kMaxMouseDelta));
  m.button_flags = random_flags(rng);
  if (m.button_flags & mouse_flags::kAnyWheel) {
    m.scroll = static_cast<std::int32_t>(uniform(rng, -kMaxScroll, kMaxScroll));
  }
  return m;
}

inline KeyboardEvent random_key(std::mt19937_64& rng, Timestamp t) {
  return {t, static_cast<std::uint16_t>(uniform(rng, 0, 255)),
          uniform(rng, 0, 1) ? KeyAction::Press : KeyAction::Release};
}

inline ScreenEvent screen_at(Timestamp t, std::uint32_t frame, const std::string& uri = "media.gops") {
  return {t, MediaRef{MediaKind::External, uri, std::nullopt}, frame};
}

inline Event random_event(std::mt19937_64& rng, Timestamp t, std::uint32_t frame = 0) {
  switch (uniform(rng, 0, 2)) {
    case 0: return screen_at(t, frame);
    case 1: return random_key(rng, t);
    default: return random_mouse(rng, t);
  }
}

// Normalized episode with 10 ms aligned timestamps and gaps below `max_gap_ms`.
inline Episode random_episode(std::mt19937_64& rng, std::size_t n, std::int64_t max_gap_ms = 500) {
  std::vector<Event> raw;
  std::int64_t ms = 0;
  std::uint32_t frame = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ms += uniform(rng, 0, max_gap_ms / 10) * 10;
    auto e = random_event(rng, Timestamp::from_ms(static_cast<std::uint64_t>(ms)), frame);
    if (std::holds_alternative<ScreenEvent>(e)) {
      ++frame;
      ms += 10;  // keep screen timestamps distinct so normalization keeps them all
      set_timestamp(e, Timestamp::from_ms(static_cast<std::uint64_t>(ms)));
    }
    raw.push_back(std::move(e));
  }
  return normalize_stream(std::move(raw), "random");
}

inline std::vector<Frame> random_frames(std::mt19937_64& rng, std::size_t n, std::uint16_t w,
                                        std::uint16_t h) {
  // Mostly-static content with sparse changes, like a desktop capture.
  std::vector<Frame> out;
  Frame cur(w, h, static_cast<std::uint8_t>(uniform(rng, 0, 255)));
  for (std::size_t i = 0; i < n; ++i) {
    const auto edits = uniform(rng, 0, 40);
    for (std::int64_t k = 0; k < edits; ++k) {
      cur.pixels[static_cast<std::size_t>(uniform(rng, 0, w * h - 1))] =
          static_cast<std::uint8_t>(uniform(rng, 0, 255));
    }
    out.push_back(cur);
  }
  return out;
}

}  // namespace deskpipe::testing
