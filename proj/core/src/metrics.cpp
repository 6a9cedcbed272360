#include "deskpipe/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "deskpipe/errors.hpp"

namespace deskpipe {

namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) {
    throw_error(ErrorClass::LengthMismatch, "series lengths differ: " + std::to_string(a) + " vs " +
                                            std::to_string(b));
  }
}

// Raw-mouse down/up flag pairs, in button order.
constexpr std::uint16_t kDown[kButtonCount] = {mouse_flags::kLeftDown, mouse_flags::kRightDown,
                                               mouse_flags::kMiddleDown, mouse_flags::kButton4Down,
                                               mouse_flags::kButton5Down};
constexpr std::uint16_t kUp[kButtonCount] = {mouse_flags::kLeftUp, mouse_flags::kRightUp,
                                             mouse_flags::kMiddleUp, mouse_flags::kButton4Up,
                                             mouse_flags::kButton5Up};

}  // namespace

std::vector<double> BinnedActions::xs() const {
  std::vector<double> out;
  out.reserve(bins.size());
  for (const auto& b : bins) out.push_back(static_cast<double>(b.dx));
  return out;
}

std::vector<double> BinnedActions::ys() const {
  std::vector<double> out;
  out.reserve(bins.size());
  for (const auto& b : bins) out.push_back(static_cast<double>(b.dy));
  return out;
}

void BinnedActions::pad_to(std::size_t n) {
  if (bins.size() < n) bins.resize(n);
}

BinnedActions bin_actions(const Episode& ep, std::uint32_t bin_ms) {
  enforce(bin_ms > 0, ErrorClass::InvalidArgument, "bin_ms must be positive");
  BinnedActions out;
  out.bin_ms = bin_ms;
  if (ep.events.empty()) return out;

  const std::int64_t bin_ns = std::int64_t{bin_ms} * 1'000'000;
  std::int64_t t_last = 0;
  for (const auto& e : ep.events) {
    t_last = std::max(t_last, static_cast<std::int64_t>(timestamp_of(e).ns));
  }
  out.bins.resize(static_cast<std::size_t>(t_last / bin_ns) + 1);

  // Held intervals are [press, release); a zero-length tap still marks its bin.
  std::array<std::int64_t, 256> key_down;
  std::array<std::int64_t, kButtonCount> button_down;
  key_down.fill(-1);
  button_down.fill(-1);
  const auto last_bin = static_cast<std::int64_t>(out.bins.size()) - 1;
  auto mark = [&](std::int64_t from, std::int64_t to, auto&& set) {
    const auto lo = from / bin_ns;
    const auto hi = to > from ? (to - 1) / bin_ns : lo;
    for (auto b = lo; b <= std::min(hi, last_bin); ++b) set(out.bins[static_cast<std::size_t>(b)]);
  };

  for (const auto& e : ep.events) {
    const auto t = static_cast<std::int64_t>(timestamp_of(e).ns);
    if (const auto* k = std::get_if<KeyboardEvent>(&e)) {
      auto& down = key_down[k->vk];
      if (k->action == KeyAction::Press) {
        if (down < 0) down = t;
      } else if (down >= 0) {
        mark(down, t, [&](ActionBin& b) { b.keys.set(k->vk); });
        down = -1;
      }
    } else if (const auto* m = std::get_if<MouseEvent>(&e)) {
      auto& bin = out.bins[static_cast<std::size_t>(t / bin_ns)];
      bin.dx += m->dx;
      bin.dy += m->dy;
      for (std::uint32_t i = 0; i < kButtonCount; ++i) {
        auto& down = button_down[i];
        if ((m->button_flags & kUp[i]) && down >= 0) {
          mark(down, t, [&](ActionBin& b) { b.buttons.set(i); });
          down = -1;
        }
        if ((m->button_flags & kDown[i]) && down < 0) down = t;
      }
    }
  }
  const auto end = (last_bin + 1) * bin_ns;
  for (std::size_t vk = 0; vk < key_down.size(); ++vk) {
    if (key_down[vk] >= 0) mark(key_down[vk], end, [&](ActionBin& b) { b.keys.set(vk); });
  }
  for (std::uint32_t i = 0; i < kButtonCount; ++i) {
    if (button_down[i] >= 0) mark(button_down[i], end, [&](ActionBin& b) { b.buttons.set(i); });
  }
  return out;
}

Coefficient pearson(std::span<const double> a, std::span<const double> b) {
  check_lengths(a.size(), b.size());
  const auto n = a.size();
  if (n < 2) return {0.0, false};
  double ma = 0.0;
  double mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return {0.0, false};
  return {std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0), true};
}

Ratio scale_ratio(std::span<const double> src, std::span<const double> pred) {
  check_lengths(src.size(), pred.size());
  double s = 0.0;
  double d = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    s += std::fabs(src[i]);
    d += std::fabs(pred[i]);
  }
  // Both sums share the 1/n factor, so their ratio equals the ratio of means.
  if (s == 0.0 && d == 0.0) return {1.0, false};
  if (s == 0.0 || d == 0.0) return {std::numeric_limits<double>::infinity(), true};
  const double r = s / d;
  return {r < 1.0 ? 1.0 / r : r, false};
}

ScaleRatio scale_ratio(const BinnedActions& src, const BinnedActions& pred) {
  check_lengths(src.n(), pred.n());
  return {scale_ratio(src.xs(), pred.xs()), scale_ratio(src.ys(), pred.ys())};
}

KeypressAccuracy keypress_accuracy(const BinnedActions& gt, const BinnedActions& pred) {
  check_lengths(gt.n(), pred.n());
  KeypressAccuracy out;
  for (std::size_t i = 0; i < gt.n(); ++i) {
    const auto& g = gt.bins[i];
    const auto& p = pred.bins[i];
    if (g.keys.any() || p.keys.any()) {
      ++out.keyboard.qualifying;
      out.keyboard.matches += g.keys == p.keys ? 1 : 0;
    }
    if (g.buttons.any() || p.buttons.any()) {
      ++out.mouse.qualifying;
      out.mouse.matches += g.buttons == p.buttons ? 1 : 0;
    }
  }
  for (auto* acc : {&out.keyboard, &out.mouse}) {
    acc->vacuous = acc->qualifying == 0;
    acc->percent = acc->vacuous ? 100.0
                                : 100.0 * static_cast<double>(acc->matches) /
                                      static_cast<double>(acc->qualifying);
  }
  return out;
}

std::string MetricsReport::to_text() const {
  auto num = [](double v) {
    if (std::isinf(v)) return std::string("inf");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  std::ostringstream os;
  os << "bins=" << bins << '\n';
  os << "pearson_x=" << num(pearson_x.value) << '\n';
  os << "pearson_x_defined=" << (pearson_x.defined ? 1 : 0) << '\n';
  os << "pearson_y=" << num(pearson_y.value) << '\n';
  os << "pearson_y_defined=" << (pearson_y.defined ? 1 : 0) << '\n';
  os << "scale_ratio_x=" << num(scale.x.value) << '\n';
  os << "scale_ratio_x_infinite=" << (scale.x.infinite ? 1 : 0) << '\n';
  os << "scale_ratio_y=" << num(scale.y.value) << '\n';
  os << "scale_ratio_y_infinite=" << (scale.y.infinite ? 1 : 0) << '\n';
  os << "keypress_acc_kbd=" << num(keypress.keyboard.percent) << '\n';
  os << "keypress_acc_kbd_vacuous=" << (keypress.keyboard.vacuous ? 1 : 0) << '\n';
  os << "keypress_acc_mouse=" << num(keypress.mouse.percent) << '\n';
  os << "keypress_acc_mouse_vacuous=" << (keypress.mouse.vacuous ? 1 : 0) << '\n';
  return os.str();
}

MetricsReport evaluate(const Episode& gt, const Episode& pred, std::uint32_t bin_ms) {
  auto g = bin_actions(gt, bin_ms);
  auto p = bin_actions(pred, bin_ms);
  const auto n = std::max(g.n(), p.n());
  g.pad_to(n);
  p.pad_to(n);

  MetricsReport r;
  r.bins = n;
  r.pearson_x = pearson(g.xs(), p.xs());
  r.pearson_y = pearson(g.ys(), p.ys());
  r.scale = scale_ratio(g, p);
  r.keypress = keypress_accuracy(g, p);
  return r;
}

}  // namespace deskpipe
