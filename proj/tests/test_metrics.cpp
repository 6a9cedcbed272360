#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "deskpipe/errors.hpp"
#include "deskpipe/metrics.hpp"
#include "support.hpp"

using namespace deskpipe;
using namespace deskpipe::testing;

namespace {

Timestamp ms(std::uint64_t v) { return Timestamp::from_ms(v); }

MouseEvent move(std::uint64_t t, std::int32_t dx, std::int32_t dy) { return {ms(t), dx, dy, 0, std::nullopt}; }

// Textbook two-pass formula in long double.
double pearson_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  long double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= a.size();
  mb /= b.size();
  long double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return static_cast<double>(sab / std::sqrt(saa * sbb));
}

BinnedActions from_xs(const std::vector<double>& xs) {
  BinnedActions b;
  for (auto x : xs) {
    ActionBin bin;
    bin.dx = static_cast<std::int64_t>(x);
    b.bins.push_back(bin);
  }
  return b;
}

Episode motion_episode(std::mt19937_64& rng, std::size_t n) {
  Episode ep{"m", {}, {}};
  for (std::size_t i = 0; i < n; ++i) {
    ep.events.push_back(move(10 * i, static_cast<std::int32_t>(uniform(rng, -40, 40)),
                             static_cast<std::int32_t>(uniform(rng, -40, 40))));
    if (i % 37 == 0) ep.events.push_back(KeyboardEvent{ms(10 * i), static_cast<std::uint16_t>(65 + i % 5), KeyAction::Press});
    if (i % 37 == 20) ep.events.push_back(KeyboardEvent{ms(10 * i), static_cast<std::uint16_t>(65 + (i - 20) % 5), KeyAction::Release});
  }
  return normalize_stream(std::move(ep.events), "m");
}

template <typename F>
ErrorClass error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.error_class();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorClass::InvalidArgument;
}

}  // namespace

TEST(BinActions, SumsMovesPerBin) {
  const Episode ep{"b", {move(5, 3, 0), move(30, -1, 0), move(60, 0, 4)}, {}};
  const auto b = bin_actions(ep);
  ASSERT_EQ(b.n(), 2U);
  EXPECT_EQ(b.bins[0].dx, 2);
  EXPECT_EQ(b.bins[0].dy, 0);
  EXPECT_EQ(b.bins[1].dy, 4);
}

TEST(BinActions, HeldKeySpansBins) {
  const Episode ep{"k", {KeyboardEvent{ms(10), 32, KeyAction::Press}, KeyboardEvent{ms(120), 32, KeyAction::Release},
                         move(260, 1, 1)}, {}};
  const auto b = bin_actions(ep);
  ASSERT_EQ(b.n(), 6U);
  for (std::size_t i = 0; i < b.n(); ++i) EXPECT_EQ(b.bins[i].keys.test(32), i <= 2) << "bin " << i;
}

TEST(BinActions, ReleaseOnBinBoundaryIsExclusive) {
  const Episode ep{"k", {KeyboardEvent{ms(0), 7, KeyAction::Press}, KeyboardEvent{ms(100), 7, KeyAction::Release}}, {}};
  const auto b = bin_actions(ep);
  ASSERT_EQ(b.n(), 3U);
  EXPECT_TRUE(b.bins[0].keys.test(7));
  EXPECT_TRUE(b.bins[1].keys.test(7));
  EXPECT_FALSE(b.bins[2].keys.test(7));
}

TEST(BinActions, MouseButtonsFromFlags) {
  const Episode ep{"mb", {MouseEvent{ms(20), 0, 0, mouse_flags::kRightDown, std::nullopt},
                          MouseEvent{ms(160), 0, 0, mouse_flags::kRightUp, std::nullopt}}, {}};
  const auto b = bin_actions(ep);
  ASSERT_EQ(b.n(), 4U);
  // Held over [20, 160): bins 0..3, since 160 ms lies inside bin 3.
  for (std::size_t i = 0; i < 4; ++i) EXPECT_TRUE(b.bins[i].buttons.test(1)) << i;
  EXPECT_FALSE(b.bins[0].buttons.test(0));
}

TEST(BinActions, EmptyEpisode) { EXPECT_EQ(bin_actions(Episode{"e", {}, {}}).n(), 0U); }

TEST(BinActions, ConservesDisplacement) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto ep = random_episode(rng, 300);
    std::int64_t sx = 0, sy = 0;
    for (const auto& e : ep.events) {
      if (const auto* m = std::get_if<MouseEvent>(&e)) {
        sx += m->dx;
        sy += m->dy;
      }
    }
    const auto b = bin_actions(ep);
    std::int64_t bx = 0, by = 0;
    for (const auto& bin : b.bins) {
      bx += bin.dx;
      by += bin.dy;
    }
    EXPECT_EQ(bx, sx);
    EXPECT_EQ(by, sy);
    if (!ep.events.empty()) {
      EXPECT_EQ(b.n(), timestamp_of(ep.events.back()).ms() / 50 + 1);
    }
  }
}

TEST(Pearson, Examples) {
  const std::vector<double> a{1, 2, 3}, b{2, 4, 7}, neg{-1, -2, -3};
  EXPECT_DOUBLE_EQ(pearson(a, a).value, 1.0);
  EXPECT_DOUBLE_EQ(pearson(a, neg).value, -1.0);
  const auto r = pearson(a, b);
  EXPECT_TRUE(r.defined);
  EXPECT_NEAR(r.value, pearson_oracle(a, b), 1e-12);
  EXPECT_NEAR(r.value, 0.9933992677987828, 1e-12);
}

TEST(Pearson, ZeroVarianceIsFlagged) {
  const std::vector<double> flat{4, 4, 4}, a{1, 2, 3};
  const auto r = pearson(flat, a);
  EXPECT_FALSE(r.defined);
  EXPECT_EQ(r.value, 0.0);
  EXPECT_FALSE(pearson(std::vector<double>{1}, std::vector<double>{2}).defined);
}

TEST(Pearson, LengthMismatch) {
  const std::vector<double> a{1, 2, 3}, b{1, 2};
  EXPECT_EQ(error_of([&] { pearson(a, b); }), ErrorClass::LengthMismatch);
}

TEST(Pearson, RandomSeriesMatchOracleAndAffineInvariance) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<std::size_t>(uniform(rng, 2, 300));
    std::vector<double> a(n), b(n), t(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<double>(uniform(rng, -100, 100));
      b[i] = static_cast<double>(uniform(rng, -100, 100)) + 0.5 * a[i];
    }
    const auto r = pearson(a, b);
    if (!r.defined) continue;
    EXPECT_NEAR(r.value, pearson_oracle(a, b), 1e-9);
    EXPECT_GE(r.value, -1.0);
    EXPECT_LE(r.value, 1.0);
    const double k = static_cast<double>(uniform(rng, 1, 9)), c = static_cast<double>(uniform(rng, -50, 50));
    for (std::size_t i = 0; i < n; ++i) t[i] = k * a[i] + c;
    EXPECT_NEAR(pearson(t, b).value, r.value, 1e-9);
  }
}

TEST(ScaleRatio, Examples) {
  const std::vector<double> src{4, -4, 4, -4}, pred{8, -8, 8, -8}, zero{0, 0, 0, 0};
  EXPECT_DOUBLE_EQ(scale_ratio(src, src).value, 1.0);
  const auto r = scale_ratio(src, pred);
  EXPECT_DOUBLE_EQ(r.value, 2.0);  // 4 / 8 = 0.5, inverted
  EXPECT_FALSE(r.infinite);
  EXPECT_TRUE(scale_ratio(src, zero).infinite);
  EXPECT_TRUE(scale_ratio(zero, src).infinite);
  const auto both = scale_ratio(zero, zero);
  EXPECT_DOUBLE_EQ(both.value, 1.0);
  EXPECT_FALSE(both.infinite);
}

TEST(ScaleRatio, ScalarMultiples) {
  std::mt19937_64 rng(4);
  std::vector<double> s(400);
  for (auto& v : s) v = static_cast<double>(uniform(rng, -60, 60));
  for (double k : {0.5, 2.0, 3.0}) {
    std::vector<double> ks(s);
    for (auto& v : ks) v *= k;
    EXPECT_NEAR(scale_ratio(ks, s).value, std::max(k, 1.0 / k), 1e-12);
    EXPECT_NEAR(scale_ratio(s, ks).value, std::max(k, 1.0 / k), 1e-12);
  }
}

TEST(ScaleRatio, SymmetricPermutationInvariantAtLeastOne) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a(50), b(50);
    for (auto& v : a) v = static_cast<double>(uniform(rng, -30, 30));
    for (auto& v : b) v = static_cast<double>(uniform(rng, -30, 30));
    const auto r = scale_ratio(a, b);
    if (r.infinite) continue;
    EXPECT_GE(r.value, 1.0);
    EXPECT_DOUBLE_EQ(scale_ratio(b, a).value, r.value);
    std::shuffle(b.begin(), b.end(), rng);
    EXPECT_NEAR(scale_ratio(a, b).value, r.value, 1e-12);
  }
}

TEST(ScaleRatio, BinnedLengthMismatch) {
  EXPECT_EQ(error_of([] { scale_ratio(from_xs({1, 2}), from_xs({1})); }), ErrorClass::LengthMismatch);
}

TEST(Keypress, CountingExample) {
  BinnedActions gt, pred;
  gt.bins.resize(6);
  pred.bins.resize(6);
  // Qualifying bins 0..3; bin 3 differs; bins 4, 5 idle on both sides.
  for (std::size_t i = 0; i < 4; ++i) {
    gt.bins[i].keys.set(65 + i);
    pred.bins[i].keys.set(65 + i);
  }
  pred.bins[3].keys.set(90);
  const auto acc = keypress_accuracy(gt, pred);
  EXPECT_EQ(acc.keyboard.qualifying, 4U);
  EXPECT_EQ(acc.keyboard.matches, 3U);
  EXPECT_DOUBLE_EQ(acc.keyboard.percent, 75.0);
  EXPECT_TRUE(acc.mouse.vacuous);
  EXPECT_DOUBLE_EQ(acc.mouse.percent, 100.0);
}

TEST(Keypress, PredictionOnlyBinsQualify) {
  BinnedActions gt, pred;
  gt.bins.resize(2);
  pred.bins.resize(2);
  pred.bins[1].buttons.set(0);
  const auto acc = keypress_accuracy(gt, pred);
  EXPECT_EQ(acc.mouse.qualifying, 1U);
  EXPECT_DOUBLE_EQ(acc.mouse.percent, 0.0);
}

TEST(Evaluate, SelfEvaluation) {
  std::mt19937_64 rng(1);
  const auto ep = motion_episode(rng, 500);
  const auto r = evaluate(ep, ep);
  EXPECT_DOUBLE_EQ(r.pearson_x.value, 1.0);
  EXPECT_DOUBLE_EQ(r.pearson_y.value, 1.0);
  EXPECT_DOUBLE_EQ(r.scale.x.value, 1.0);
  EXPECT_DOUBLE_EQ(r.scale.y.value, 1.0);
  EXPECT_DOUBLE_EQ(r.keypress.keyboard.percent, 100.0);
  EXPECT_FALSE(r.keypress.keyboard.vacuous);
  EXPECT_DOUBLE_EQ(r.keypress.mouse.percent, 100.0);
}

TEST(Evaluate, DoubledDeltas) {
  std::mt19937_64 rng(2);
  const auto ep = motion_episode(rng, 400);
  auto doubled = ep;
  for (auto& e : doubled.events) {
    if (auto* m = std::get_if<MouseEvent>(&e)) {
      m->dx *= 2;
      m->dy *= 2;
    }
  }
  const auto r = evaluate(ep, doubled);
  EXPECT_NEAR(r.pearson_x.value, 1.0, 1e-12);
  EXPECT_NEAR(r.pearson_y.value, 1.0, 1e-12);
  EXPECT_NEAR(r.scale.x.value, 2.0, 1e-12);
  EXPECT_NEAR(r.scale.y.value, 2.0, 1e-12);
}

TEST(Evaluate, ShuffledBinsKeepRatios) {
  std::mt19937_64 rng(3);
  const auto ep = motion_episode(rng, 600);
  const auto bins = bin_actions(ep);
  auto order = std::vector<std::size_t>(bins.n());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  // Rebuild a predicted episode with one move per bin, in shuffled order.
  Episode shuffled{"s", {}, {}};
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& src = bins.bins[order[i]];
    shuffled.events.push_back(move(50 * i, static_cast<std::int32_t>(src.dx), static_cast<std::int32_t>(src.dy)));
  }
  const auto r = evaluate(ep, shuffled);
  EXPECT_NEAR(r.scale.x.value, 1.0, 1e-12);
  EXPECT_NEAR(r.scale.y.value, 1.0, 1e-12);
  EXPECT_LT(r.pearson_x.value, 0.5);
}

TEST(Evaluate, ShorterEpisodeIsPadded) {
  const Episode gt{"g", {move(0, 5, 5), move(420, 3, -2)}, {}};
  const Episode pred{"p", {move(0, 5, 5)}, {}};
  const auto r = evaluate(gt, pred);
  EXPECT_EQ(r.bins, 9U);
  EXPECT_TRUE(r.pearson_x.defined);
}

TEST(Evaluate, ReportText) {
  const Episode ep{"t", {move(0, 1, 2), move(70, -3, 4), KeyboardEvent{ms(80), 9, KeyAction::Press}}, {}};
  const auto text = evaluate(ep, ep).to_text();
  EXPECT_EQ(text,
            "bins=2\n"
            "pearson_x=1.000000\npearson_x_defined=1\n"
            "pearson_y=1.000000\npearson_y_defined=1\n"
            "scale_ratio_x=1.000000\nscale_ratio_x_infinite=0\n"
            "scale_ratio_y=1.000000\nscale_ratio_y_infinite=0\n"
            "keypress_acc_kbd=100.000000\nkeypress_acc_kbd_vacuous=0\n"
            "keypress_acc_mouse=100.000000\nkeypress_acc_mouse_vacuous=1\n");
}
