#pragma once

// Independent models used as test oracles: fetch-strategy costs computed from
// the keyframe list alone, and the NEP-tau placement rule.

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "deskpipe/events.hpp"

namespace deskpipe::testing {

struct SimCost {
  std::uint64_t frames_decoded = 0;
  std::uint64_t seeks = 0;
  std::vector<std::uint32_t> decoded;  // every frame index touched, in order
};

inline std::uint32_t sim_keyframe_before(std::span<const std::uint32_t> kf, std::uint32_t t) {
  return *(std::upper_bound(kf.begin(), kf.end(), t) - 1);
}

inline void sim_decode(SimCost& c, std::uint32_t from, std::uint32_t to) {
  for (auto f = from; f <= to; ++f) c.decoded.push_back(f);
  c.frames_decoded += to - from + 1;
}

inline SimCost sim_per_frame(std::span<const std::uint32_t> plan, std::span<const std::uint32_t> kf) {
  SimCost c;
  for (auto t : plan) {
    ++c.seeks;
    sim_decode(c, sim_keyframe_before(kf, t), t);
  }
  return c;
}

inline SimCost sim_naive(std::span<const std::uint32_t> plan, std::span<const std::uint32_t> kf) {
  SimCost c;
  if (plan.empty()) return c;
  c.seeks = 1;
  sim_decode(c, sim_keyframe_before(kf, plan.front()), plan.back());
  return c;
}

inline SimCost sim_adaptive(std::span<const std::uint32_t> plan, std::span<const std::uint32_t> kf) {
  SimCost c;
  bool positioned = false;
  std::uint32_t p = 0;
  for (auto t : plan) {
    bool kf_between = false;
    for (auto k : kf) kf_between = kf_between || (k > p && k <= t);
    if (positioned && p <= t && !kf_between) {
      sim_decode(c, p, t);
    } else {
      ++c.seeks;
      sim_decode(c, sim_keyframe_before(kf, t), t);
    }
    positioned = true;
    p = t + 1;
  }
  return c;
}

// Counting-only variants for exhaustive sweeps; `kb[t]` is keyframe_before(t)
// and `next_kf[t]` the first keyframe strictly after t (or frame count).
struct SimTables {
  std::vector<std::uint32_t> kb;
  std::vector<std::uint32_t> next_kf;

  SimTables(std::span<const std::uint32_t> kf, std::uint32_t frames) : kb(frames), next_kf(frames) {
    for (std::uint32_t t = 0; t < frames; ++t) {
      kb[t] = sim_keyframe_before(kf, t);
      auto it = std::upper_bound(kf.begin(), kf.end(), t);
      next_kf[t] = it == kf.end() ? frames : *it;
    }
  }
};

inline std::uint64_t count_per_frame(std::span<const std::uint32_t> plan, const SimTables& s) {
  std::uint64_t n = 0;
  for (auto t : plan) n += t - s.kb[t] + 1;
  return n;
}

inline std::uint64_t count_naive(std::span<const std::uint32_t> plan, const SimTables& s) {
  return plan.empty() ? 0 : plan.back() - s.kb[plan.front()] + 1;
}

inline std::uint64_t count_adaptive(std::span<const std::uint32_t> plan, const SimTables& s) {
  std::uint64_t n = 0;
  bool positioned = false;
  std::uint32_t p = 0;
  for (auto t : plan) {
    // No keyframe in (p, t] <=> the first keyframe after p lies beyond t.
    const bool cont = positioned && p <= t && s.next_kf[p] > t;
    n += cont ? t - p + 1 : t - s.kb[t] + 1;
    positioned = true;
    p = t + 1;
  }
  return n;
}

// Placement rule as a stable sort: screen k keys (k, 0); an action after
// screen j keys (min(j + tau, last), 1). Actions before the first screen use
// j = -1, so they only stay in front when tau is 0 or there are no screens.
inline std::vector<Event> nep_oracle(const std::vector<Event>& events, std::uint32_t tau) {
  const auto screens = std::count_if(events.begin(), events.end(),
                                     [](const Event& e) { return !is_action(e); });
  std::vector<std::pair<std::pair<std::int64_t, int>, Event>> keyed;
  std::int64_t j = -1;
  for (const auto& e : events) {
    if (!is_action(e)) {
      ++j;
      keyed.push_back({{j, 0}, e});
    } else {
      keyed.push_back({{std::min<std::int64_t>(j + tau, screens - 1), 1}, e});
    }
  }
  std::stable_sort(keyed.begin(), keyed.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Event> out;
  for (auto& [k, e] : keyed) out.push_back(std::move(e));
  return out;
}

}  // namespace deskpipe::testing
