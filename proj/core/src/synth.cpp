#include "deskpipe/synth.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

#include "deskpipe/errors.hpp"

namespace deskpipe {

namespace {

constexpr std::int32_t kStepMax = 8;       // per mouse event, per axis
constexpr int kMaxMovesPerInterval = 3;

std::int64_t frame_time_ns(std::uint64_t i, double fps) {
  return std::llround(static_cast<double>(i) * 1e9 / fps);
}

std::uint32_t wrap(std::int64_t v, std::uint32_t m) {
  const auto r = v % static_cast<std::int64_t>(m);
  return static_cast<std::uint32_t>(r < 0 ? r + m : r);
}

std::int32_t wrapped_delta(std::uint32_t from, std::uint32_t to, std::uint32_t m) {
  auto d = static_cast<std::int64_t>(to) - static_cast<std::int64_t>(from);
  const auto half = static_cast<std::int64_t>(m) / 2;
  while (d >= half) d -= m;
  while (d < -half) d += m;
  return static_cast<std::int32_t>(d);
}

void draw(Frame& f, std::uint32_t x0, std::uint32_t y0, std::uint8_t value) {
  for (std::uint32_t dy = 0; dy < kSynthRectH; ++dy) {
    for (std::uint32_t dx = 0; dx < kSynthRectW; ++dx) {
      f.at((x0 + dx) % f.width, (y0 + dy) % f.height) = value;
    }
  }
}

}  // namespace

void SynthConfig::validate() const {
  enforce(duration_s >= 0.0 && std::isfinite(duration_s), ErrorClass::InvalidArgument,
          "duration must be non-negative");
  enforce(fps > 0.0 && fps <= 1000.0, ErrorClass::InvalidArgument, "fps must be in (0, 1000]");
  enforce(width > 2 * kSynthRectW && height > 2 * kSynthRectH, ErrorClass::InvalidArgument,
          "frame must be larger than twice the rectangle");
  // Per-interval motion must stay under half the frame so wrapping stays unambiguous.
  enforce(kMaxMovesPerInterval * kStepMax < std::min(width, height) / 2, ErrorClass::InvalidArgument,
          "frame too small for the motion model");
  if (!(actor == "rect-chase" || actor == "random-walk")) {
    throw_error(ErrorClass::InvalidArgument, "unknown actor '" + actor + "'");
  }
  enforce(idle_rate >= 0.0 && idle_min_s >= 0.0 && idle_max_s >= idle_min_s,
          ErrorClass::InvalidArgument, "bad idle span settings");
}

SynthSession synth_generate(const SynthConfig& cfg, const std::string& media_uri,
                            const std::string& episode_id) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  auto uniform = [&](std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
  };
  auto chance = [&](double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; };

  const auto n = static_cast<std::uint64_t>(std::llround(cfg.duration_s * cfg.fps));
  const double dt_s = 1.0 / cfg.fps;
  const bool chase = cfg.actor == "rect-chase";

  SynthSession out;
  out.episode.id = episode_id;
  out.episode.meta = {{"source", "synthetic"},
                      {"actor", cfg.actor},
                      {"seed", std::to_string(cfg.seed)},
                      {"fps", std::to_string(cfg.fps)},
                      {"resolution", std::to_string(cfg.width) + "x" + std::to_string(cfg.height)}};

  std::vector<Event> raw;
  std::int64_t px = uniform(0, cfg.width - 1);
  std::int64_t py = uniform(0, cfg.height - 1);
  std::int64_t tx = uniform(0, cfg.width - 1);
  std::int64_t ty = uniform(0, cfg.height - 1);
  std::int64_t idle_until = -1;
  std::optional<std::uint16_t> held;
  std::int64_t release_at = 0;
  bool button_down = false;

  for (std::uint64_t i = 0; i < n; ++i) {
    const auto t = frame_time_ns(i, cfg.fps);
    const auto pos = std::make_pair(wrap(px, cfg.width), wrap(py, cfg.height));
    out.positions.push_back(pos);

    Frame f(cfg.width, cfg.height, kSynthBackground);
    draw(f, pos.first, pos.second, held ? kSynthRectKeyed : kSynthRect);
    out.frames.push_back(std::move(f));
    raw.push_back(ScreenEvent{Timestamp{static_cast<std::uint64_t>(t)},
                              MediaRef{MediaKind::External, media_uri, std::nullopt},
                              static_cast<std::uint32_t>(i)});

    if (i + 1 == n) break;
    const auto t_next = frame_time_ns(i + 1, cfg.fps);
    const auto ms_lo = t / 1'000'000 + 1;
    const auto ms_hi = (t_next - 1) / 1'000'000;
    if (ms_hi < ms_lo) continue;
    auto at = [&](std::int64_t ms) { return Timestamp{static_cast<std::uint64_t>(ms * 1'000'000)}; };

    if (held && release_at <= ms_hi) {
      raw.push_back(KeyboardEvent{at(std::max(release_at, ms_lo)), *held, KeyAction::Release});
      held.reset();
    }

    if (t < idle_until) continue;
    if (chance(cfg.idle_rate * dt_s)) {
      idle_until = t + std::llround(std::uniform_real_distribution<double>(cfg.idle_min_s,
                                                                           cfg.idle_max_s)(rng) * 1e9);
      continue;
    }

    const auto moves = static_cast<int>(uniform(0, kMaxMovesPerInterval));
    std::vector<std::int64_t> times;
    for (int m = 0; m < moves; ++m) times.push_back(uniform(ms_lo, ms_hi));
    std::sort(times.begin(), times.end());
    for (auto ms : times) {
      std::int32_t dx = 0;
      std::int32_t dy = 0;
      if (chase) {
        if (chance(0.02)) {
          tx = uniform(0, cfg.width - 1);
          ty = uniform(0, cfg.height - 1);
        }
        const auto ex = wrapped_delta(wrap(px, cfg.width), static_cast<std::uint32_t>(tx), cfg.width);
        const auto ey = wrapped_delta(wrap(py, cfg.height), static_cast<std::uint32_t>(ty), cfg.height);
        dx = std::clamp(ex / 2 + static_cast<std::int32_t>(uniform(-2, 2)), -kStepMax, kStepMax);
        dy = std::clamp(ey / 2 + static_cast<std::int32_t>(uniform(-2, 2)), -kStepMax, kStepMax);
      } else {
        dx = static_cast<std::int32_t>(uniform(-kStepMax, kStepMax));
        dy = static_cast<std::int32_t>(uniform(-kStepMax, kStepMax));
      }
      std::uint16_t flags = 0;
      if (chance(0.01)) {
        flags = button_down ? mouse_flags::kLeftUp : mouse_flags::kLeftDown;
        button_down = !button_down;
      }
      std::optional<std::int32_t> scroll;
      if (chance(0.005)) {
        flags |= mouse_flags::kWheel;
        scroll = chance(0.5) ? 1 : -1;
      }
      raw.push_back(MouseEvent{at(ms), dx, dy, flags, scroll});
      px += dx;
      py += dy;
    }

    if (!held && chance(0.3 * dt_s)) {
      static constexpr std::uint16_t kKeys[] = {0x20, 0x41, 0x44, 0x53, 0x57, 0x10, 0x25, 0x27};
      held = kKeys[uniform(0, std::size(kKeys) - 1)];
      const auto press_ms = uniform(ms_lo, ms_hi);
      raw.push_back(KeyboardEvent{at(press_ms), *held, KeyAction::Press});
      release_at = press_ms + uniform(100, 600);
    }
  }
  if (held) {
    const auto end_ms = frame_time_ns(n ? n - 1 : 0, cfg.fps) / 1'000'000;
    raw.push_back(KeyboardEvent{Timestamp{static_cast<std::uint64_t>(end_ms) * 1'000'000}, *held,
                                KeyAction::Release});
  }
  if (button_down && !raw.empty()) {
    const auto end = timestamp_of(raw.back());
    raw.push_back(MouseEvent{end, 0, 0, mouse_flags::kLeftUp, std::nullopt});
  }

  auto meta = std::move(out.episode.meta);
  out.episode = normalize_stream(std::move(raw), episode_id, std::move(meta));
  return out;
}

std::pair<std::uint32_t, std::uint32_t> locate_rect(const Frame& frame) {
  for (std::uint32_t y = 0; y < frame.height; ++y) {
    for (std::uint32_t x = 0; x < frame.width; ++x) {
      if (frame.at(x, y) == kSynthBackground) continue;
      const auto left = frame.at((x + frame.width - 1) % frame.width, y);
      const auto up = frame.at(x, (y + frame.height - 1) % frame.height);
      if (left == kSynthBackground && up == kSynthBackground) return {x, y};
    }
  }
  throw_error(ErrorClass::CorruptFrame, "no rectangle in frame");
}

Episode oracle_idm(const MediaStore& store, const Episode& ep) {
  Episode out;
  out.id = ep.id;
  out.meta = ep.meta;
  out.meta["labels"] = "oracle-idm";

  ByteCounter scratch;
  std::optional<SequentialDecoder> dec;
  std::optional<std::pair<std::uint32_t, std::uint32_t>> prev_pos;
  Timestamp prev_t;
  const auto w = store.header().width;
  const auto h = store.header().height;
  for (const auto& e : ep.events) {
    const auto* s = std::get_if<ScreenEvent>(&e);
    if (!s) continue;
    if (!dec || dec->position() != s->frame_index) dec.emplace(store, s->frame_index, scratch);
    const auto pos = locate_rect(dec->next());
    if (prev_pos) {
      const auto dx = wrapped_delta(prev_pos->first, pos.first, w);
      const auto dy = wrapped_delta(prev_pos->second, pos.second, h);
      if (dx != 0 || dy != 0) out.events.push_back(MouseEvent{prev_t, dx, dy, 0, std::nullopt});
    }
    out.events.push_back(*s);
    prev_pos = pos;
    prev_t = s->t;
  }
  // Stable sort: a label stamped at a screen's time goes after that screen.
  return normalize_stream(std::move(out.events), out.id, out.meta);
}

}  // namespace deskpipe
