#include "deskpipe/events.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <numeric>

#include "deskpipe/errors.hpp"

namespace deskpipe {

namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

std::int32_t clamp_to(std::int64_t v, std::int32_t limit, bool& clamped) {
  if (v > limit) {
    clamped = true;
    return limit;
  }
  if (v < -limit) {
    clamped = true;
    return -limit;
  }
  return static_cast<std::int32_t>(v);
}

}  // namespace

Timestamp timestamp_of(const Event& e) {
  return std::visit([](const auto& ev) { return ev.t; }, e);
}

void set_timestamp(Event& e, Timestamp t) {
  std::visit([t](auto& ev) { ev.t = t; }, e);
}

const char* topic_name(Topic topic) {
  switch (topic) {
    case Topic::Screen: return "screen";
    case Topic::Keyboard: return "keyboard";
    case Topic::Mouse: return "mouse";
  }
  return "unknown";
}

void validate_event(const Event& e) {
  std::visit(
      Overloaded{
          [](const ScreenEvent& s) {
            enforce(s.media.kind == MediaKind::External || s.media.kind == MediaKind::Embedded,
                    ErrorClass::InvalidEvent, "unknown media kind");
          },
          [](const KeyboardEvent& k) {
            if (k.vk > 255) {
              throw_error(ErrorClass::InvalidEvent, "virtual key " + std::to_string(k.vk) +
                                                    " outside [0,255]");
            }
            enforce(k.action == KeyAction::Press || k.action == KeyAction::Release,
                    ErrorClass::InvalidEvent, "key action must be press or release");
          },
          [](const MouseEvent& m) {
            if (!(std::abs(m.dx) <= kMaxMouseDelta && std::abs(m.dy) <= kMaxMouseDelta)) {
              throw_error(ErrorClass::InvalidEvent, "mouse delta (" + std::to_string(m.dx) + "," +
                                                    std::to_string(m.dy) + ") outside +/-1999");
            }
            enforce((m.button_flags & ~mouse_flags::kAllDefined) == 0, ErrorClass::InvalidEvent,
                    "undefined mouse button flag bits");
            const bool wheel = (m.button_flags & mouse_flags::kAnyWheel) != 0;
            enforce(wheel == m.scroll.has_value(), ErrorClass::InvalidEvent,
                    "scroll must be present exactly when a wheel flag is set");
          },
      },
      e);
}

Episode normalize_stream(std::vector<Event> raw, std::string id,
                         std::map<std::string, std::string> meta) {
  for (std::size_t i = 0; i < raw.size(); ++i) {
    try {
      validate_event(raw[i]);
    } catch (const Error& err) {
      throw_error(ErrorClass::InvalidEvent,
                  "event " + std::to_string(i) + ": " + err.what());
    }
  }

  std::stable_sort(raw.begin(), raw.end(), [](const Event& a, const Event& b) {
    const auto ta = timestamp_of(a), tb = timestamp_of(b);
    if (ta != tb) return ta < tb;
    return a.index() < b.index();
  });

  Episode ep{std::move(id), {}, std::move(meta)};
  ep.events.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    // Screens with equal timestamps are contiguous after the sort; keep the last.
    if (std::holds_alternative<ScreenEvent>(raw[i]) && i + 1 < raw.size() &&
        std::holds_alternative<ScreenEvent>(raw[i + 1]) &&
        timestamp_of(raw[i]) == timestamp_of(raw[i + 1])) {
      continue;
    }
    ep.events.push_back(std::move(raw[i]));
  }
  return ep;
}

Episode resample_stream(const Episode& ep, std::uint32_t interval_ms) {
  enforce(interval_ms > 0, ErrorClass::InvalidArgument, "resample interval must be positive");
  const std::uint64_t bin_ns = std::uint64_t{interval_ms} * 1'000'000;

  struct MouseBin {
    std::int64_t dx = 0, dy = 0, vscroll = 0, hscroll = 0;
    std::uint16_t flags = 0;  // wheel bits tracked separately below
    bool vwheel = false, hwheel = false;
  };
  std::map<std::uint64_t, MouseBin> mouse_bins;
  std::map<std::uint64_t, const ScreenEvent*> screen_bins;
  std::vector<Event> out;

  for (const auto& e : ep.events) {
    const std::uint64_t bin = timestamp_of(e).ns / bin_ns;
    std::visit(Overloaded{
                   [&](const ScreenEvent& s) { screen_bins[bin] = &s; },
                   [&](const KeyboardEvent& k) { out.emplace_back(k); },
                   [&](const MouseEvent& m) {
                     auto& acc = mouse_bins[bin];
                     acc.dx += m.dx;
                     acc.dy += m.dy;
                     acc.flags |= m.button_flags & ~mouse_flags::kAnyWheel;
                     if (m.button_flags & mouse_flags::kWheel) {
                       acc.vscroll += m.scroll.value_or(0);
                       acc.vwheel = true;
                     } else if (m.button_flags & mouse_flags::kHWheel) {
                       acc.hscroll += m.scroll.value_or(0);
                       acc.hwheel = true;
                     }
                   },
               },
               e);
  }

  std::size_t clamped_count = 0;
  for (const auto& [bin, s] : screen_bins) out.emplace_back(*s);
  for (const auto& [bin, acc] : mouse_bins) {
    bool clamped = false;
    MouseEvent m;
    m.t = Timestamp{bin * bin_ns};
    m.dx = clamp_to(acc.dx, kMaxMouseDelta, clamped);
    m.dy = clamp_to(acc.dy, kMaxMouseDelta, clamped);
    m.button_flags = acc.flags;
    if (acc.vwheel) {
      m.button_flags |= mouse_flags::kWheel;
      m.scroll = clamp_to(acc.vscroll, kMaxScroll, clamped);
    } else if (acc.hwheel) {
      m.button_flags |= mouse_flags::kHWheel;
      m.scroll = clamp_to(acc.hscroll, kMaxScroll, clamped);
    }
    out.emplace_back(m);
    // One event carries one wheel; horizontal scroll gets its own event when both occur.
    if (acc.vwheel && acc.hwheel) {
      out.emplace_back(MouseEvent{m.t, 0, 0, mouse_flags::kHWheel,
                                  clamp_to(acc.hscroll, kMaxScroll, clamped)});
    }
    if (clamped) ++clamped_count;
  }

  auto meta = ep.meta;
  meta["resample_ms"] = std::to_string(interval_ms);
  if (clamped_count > 0) {
    meta["resample_clamped"] = std::to_string(clamped_count);
    std::clog << "warning: resample_stream clamped " << clamped_count
              << " merged mouse event(s) in episode '" << ep.id << "'\n";
  }
  return normalize_stream(std::move(out), ep.id, std::move(meta));
}

Episode filter_inactive(const Episode& ep, double threshold_s) {
  enforce(threshold_s > 0, ErrorClass::InvalidArgument, "inactivity threshold must be positive");
  const std::uint64_t limit = Timestamp::from_s(threshold_s).ns;

  std::vector<std::uint64_t> actions;
  for (const auto& e : ep.events) {
    if (is_action(e)) actions.push_back(timestamp_of(e).ns);
  }
  if (actions.empty()) return Episode{ep.id, {}, ep.meta};

  // Interior gaps: drop events in (lo, hi], pull later events back by `shift`.
  struct Cut {
    std::uint64_t lo, hi, shift;
  };
  std::vector<Cut> cuts;
  for (std::size_t i = 1; i < actions.size(); ++i) {
    const auto gap = actions[i] - actions[i - 1];
    if (gap > limit) cuts.push_back({actions[i - 1], actions[i] - limit, gap - limit});
  }
  const std::uint64_t lead_cut = actions.front() > limit ? actions.front() - limit : 0;
  const std::uint64_t tail_end = actions.back() + limit;

  Episode out{ep.id, {}, ep.meta};
  std::uint64_t shift = lead_cut;
  std::size_t k = 0;
  for (const auto& e : ep.events) {
    const auto t = timestamp_of(e).ns;
    if (t < lead_cut || t > tail_end) continue;
    while (k < cuts.size() && t > cuts[k].hi) shift += cuts[k++].shift;
    if (k < cuts.size() && t > cuts[k].lo) continue;
    Event kept = e;
    set_timestamp(kept, Timestamp{t - shift});
    out.events.push_back(std::move(kept));
  }
  return out;
}

std::vector<Segment> segment_screen_stream(std::uint64_t frame_count, double fps) {
  enforce(fps > 0, ErrorClass::InvalidArgument, "fps must be positive");
  constexpr double kLead = 60.0, kTail = 120.0, kLength = 120.0;
  const double duration = static_cast<double>(frame_count) / fps;
  std::vector<Segment> segments;
  // Tolerance absorbs fps values that do not divide the frame count evenly.
  constexpr double kEps = 1e-9;
  for (double start = kLead; start + kLength <= duration - kTail + kEps; start += kLength) {
    segments.push_back({start, start + kLength});
  }
  return segments;
}

std::string format_event(const Event& e) {
  char buf[128];
  std::string line;
  std::visit(
      Overloaded{
          [&](const ScreenEvent& s) {
            line = std::to_string(s.t.ns) + " SCREEN " +
                   (s.media.kind == MediaKind::External ? "external " : "embedded ") +
                   s.media.uri + " frame=" + std::to_string(s.frame_index);
          },
          [&](const KeyboardEvent& k) {
            std::snprintf(buf, sizeof buf, "%llu KEYBOARD vk=%u %s",
                          static_cast<unsigned long long>(k.t.ns), unsigned{k.vk},
                          k.action == KeyAction::Press ? "press" : "release");
            line = buf;
          },
          [&](const MouseEvent& m) {
            int n = std::snprintf(buf, sizeof buf, "%llu MOUSE dx=%d dy=%d flags=0x%03x",
                                  static_cast<unsigned long long>(m.t.ns), m.dx, m.dy,
                                  unsigned{m.button_flags});
            if (m.scroll && n > 0) {
              std::snprintf(buf + n, sizeof buf - static_cast<std::size_t>(n), " scroll=%d",
                            *m.scroll);
            }
            line = buf;
          },
      },
      e);
  return line;
}

}  // namespace deskpipe
