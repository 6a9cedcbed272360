#pragma once

#include <bitset>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "deskpipe/events.hpp"

namespace deskpipe {

inline constexpr std::uint32_t kButtonCount = 5;  // left, right, middle, x1, x2

struct ActionBin {
  std::int64_t dx = 0;
  std::int64_t dy = 0;
  std::bitset<256> keys;
  std::bitset<kButtonCount> buttons;

  friend bool operator==(const ActionBin&, const ActionBin&) = default;
};

struct BinnedActions {
  std::uint32_t bin_ms = 50;
  std::vector<ActionBin> bins;

  std::size_t n() const noexcept { return bins.size(); }
  std::vector<double> xs() const;
  std::vector<double> ys() const;
  // Appends empty bins up to `n`.
  void pad_to(std::size_t n);
};

// n = floor(t_last / bin_ms) + 1 over all events (0 for an empty episode). A
// key or button counts as held over [press, release) and belongs to every bin
// that interval touches; a press never released stays held to the last bin.
BinnedActions bin_actions(const Episode& ep, std::uint32_t bin_ms = 50);

struct Coefficient {
  double value = 0.0;
  bool defined = true;  // false when either series has zero variance
};

// Throws LengthMismatch.
Coefficient pearson(std::span<const double> a, std::span<const double> b);

struct Ratio {
  double value = 1.0;
  bool infinite = false;
};

struct ScaleRatio {
  Ratio x;
  Ratio y;
};

Ratio scale_ratio(std::span<const double> src, std::span<const double> pred);
ScaleRatio scale_ratio(const BinnedActions& src, const BinnedActions& pred);

struct Accuracy {
  double percent = 100.0;
  bool vacuous = false;  // no bin with activity on either side
  std::size_t qualifying = 0;
  std::size_t matches = 0;
};

struct KeypressAccuracy {
  Accuracy keyboard;
  Accuracy mouse;
};

KeypressAccuracy keypress_accuracy(const BinnedActions& gt, const BinnedActions& pred);

struct MetricsReport {
  std::size_t bins = 0;
  Coefficient pearson_x;
  Coefficient pearson_y;
  ScaleRatio scale;
  KeypressAccuracy keypress;

  // key=value lines, fixed order.
  std::string to_text() const;
};

MetricsReport evaluate(const Episode& gt, const Episode& pred, std::uint32_t bin_ms = 50);

}  // namespace deskpipe
