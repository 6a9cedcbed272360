#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "deskpipe/decode_engine.hpp"
#include "deskpipe/errors.hpp"
#include "deskpipe/fsl.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace deskpipe;
using namespace deskpipe::testing;

namespace {

constexpr Strategy kAll[] = {Strategy::PerFrame, Strategy::NaiveBatch, Strategy::AdaptiveBatch};

MediaStore small_store(std::uint32_t frames, const GopConfig& gop, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  return MediaStore::from_bytes(encode_media(random_frames(rng, frames, 6, 4), gop));
}

std::vector<std::uint32_t> iota_plan(std::uint32_t lo, std::uint32_t hi) {
  std::vector<std::uint32_t> v(hi - lo);
  std::iota(v.begin(), v.end(), lo);
  return v;
}

std::uint64_t record_bytes(const MediaStore& store, std::span<const std::uint32_t> frames) {
  ByteCounter c;
  for (auto f : frames) store.read_record(f, c);
  return c.bytes_read;
}

SimCost simulate(Strategy s, std::span<const std::uint32_t> plan, const MediaStore& store) {
  switch (s) {
    case Strategy::PerFrame: return sim_per_frame(plan, store.keyframes());
    case Strategy::NaiveBatch: return sim_naive(plan, store.keyframes());
    case Strategy::AdaptiveBatch: break;
  }
  return sim_adaptive(plan, store.keyframes());
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

TEST(Strategies, Names) {
  for (auto s : kAll) EXPECT_EQ(parse_strategy(strategy_name(s)), s);
  EXPECT_EQ(parse_strategies("all").size(), 3U);
  EXPECT_EQ(parse_strategies("adaptive_batch,per_frame"),
            (std::vector<Strategy>{Strategy::AdaptiveBatch, Strategy::PerFrame}));
  EXPECT_EQ(error_of([] { parse_strategy("bogus"); }), ErrorClass::InvalidArgument);
}

TEST(Fetch, ContiguousPlanWorkedValues) {
  const auto store = small_store(100, GopConfig::fixed(30));
  const auto plan = iota_plan(0, 10);
  EXPECT_EQ(fetch_frames(plan, store, Strategy::PerFrame).stats.frames_decoded, 55U);
  EXPECT_EQ(fetch_frames(plan, store, Strategy::AdaptiveBatch).stats.frames_decoded, 10U);
  EXPECT_EQ(fetch_frames(plan, store, Strategy::NaiveBatch).stats.frames_decoded, 10U);
}

TEST(Fetch, DistantKeyframesWorkedValues) {
  const auto store = small_store(301, GopConfig::fixed(30));
  const std::vector<std::uint32_t> plan{0, 300};
  const auto adaptive = fetch_frames(plan, store, Strategy::AdaptiveBatch).stats;
  EXPECT_EQ(adaptive.frames_decoded, 2U);
  EXPECT_EQ(adaptive.seeks, 2U);
  EXPECT_EQ(fetch_frames(plan, store, Strategy::NaiveBatch).stats.frames_decoded, 301U);
}

TEST(Fetch, KeyframeTargets) {
  const auto store = small_store(90, GopConfig::fixed(30));
  const std::vector<std::uint32_t> plan{0, 30, 60};
  const auto s = fetch_frames(plan, store, Strategy::AdaptiveBatch).stats;
  EXPECT_EQ(s.frames_decoded, 3U);
  EXPECT_EQ(s.seeks, 3U);
}

TEST(Fetch, ContinuesAcrossGopBoundary) {
  const auto store = small_store(61, GopConfig::fixed(30));
  const std::vector<std::uint32_t> plan{29, 30};
  const auto r = fetch_frames(plan, store, Strategy::AdaptiveBatch, true);
  EXPECT_EQ(r.stats.seeks, 1U);
  EXPECT_EQ(r.stats.frames_decoded, 31U);
  EXPECT_EQ(r.decoded, iota_plan(0, 31));
}

TEST(Fetch, ConsecutiveTargetsSeekOnce) {
  const auto store = small_store(60, GopConfig::fixed(30));
  const auto plan = iota_plan(33, 45);
  EXPECT_EQ(fetch_frames(plan, store, Strategy::AdaptiveBatch).stats.seeks, 1U);
}

TEST(Fetch, StrategiesReturnIdenticalFrames) {
  const auto store = small_store(200, GopConfig::variable(3, 5, 40));
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::uint32_t> plan;
    for (std::uint32_t f = 0; f < 200; ++f) {
      if (uniform(rng, 0, 19) == 0) plan.push_back(f);
    }
    std::vector<Frame> oracle;
    for (auto f : plan) {
      ByteCounter c;
      oracle.push_back(decode_frame(store, f, c));
    }
    for (auto s : kAll) EXPECT_EQ(fetch_frames(plan, store, s).frames, oracle);
  }
}

TEST(Fetch, EmptyPlan) {
  const auto store = small_store(10, GopConfig::fixed(30));
  for (auto s : kAll) {
    const auto r = fetch_frames({}, store, s);
    EXPECT_TRUE(r.frames.empty());
    EXPECT_EQ(r.stats.bytes_read, 0U);
    EXPECT_EQ(r.stats.kb_per_img(), 0.0);
  }
}

TEST(Fetch, RejectsBadPlans) {
  const auto store = small_store(10, GopConfig::fixed(30));
  const std::vector<std::uint32_t> out{3, 10};
  const std::vector<std::uint32_t> unsorted{4, 2};
  const std::vector<std::uint32_t> dup{2, 2};
  EXPECT_EQ(error_of([&] { fetch_frames(out, store, Strategy::PerFrame); }), ErrorClass::FrameOutOfRange);
  EXPECT_EQ(error_of([&] { fetch_frames(unsorted, store, Strategy::PerFrame); }), ErrorClass::InvalidArgument);
  EXPECT_EQ(error_of([&] { fetch_frames(dup, store, Strategy::AdaptiveBatch); }), ErrorClass::InvalidArgument);
}

TEST(Fetch, MatchesSimulationOnAllSmallPlans) {
  // Every plan of size <= 4 over a 24-frame store, fixed and variable GOPs.
  for (const auto& gop : {GopConfig::fixed(7), GopConfig::variable(9, 2, 9)}) {
    const auto store = small_store(24, gop);
    std::vector<std::uint32_t> plan;
    std::uint64_t plans = 0;
    const auto check = [&] {
      ++plans;
      for (auto s : kAll) {
        const auto r = fetch_frames(plan, store, s, true);
        const auto sim = simulate(s, plan, store);
        ASSERT_EQ(r.decoded, sim.decoded);
        ASSERT_EQ(r.stats.frames_decoded, sim.frames_decoded);
        ASSERT_EQ(r.stats.seeks, sim.seeks);
        ASSERT_EQ(r.stats.bytes_read, record_bytes(store, sim.decoded));
      }
    };
    const auto rec = [&](auto&& self, std::uint32_t from) -> void {
      check();
      if (plan.size() == 4) return;
      for (auto f = from; f < 24; ++f) {
        plan.push_back(f);
        self(self, f + 1);
        plan.pop_back();
      }
    };
    rec(rec, 0);
    EXPECT_EQ(plans, 1U + 24 + 276 + 2024 + 10626);
  }
}

TEST(Fetch, AdaptiveDominatesAndStaysInGops) {
  const auto store = small_store(200, GopConfig::fixed(30));
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::uint32_t> plan;
    const auto density = uniform(rng, 1, 30);
    for (std::uint32_t f = 0; f < 200; ++f) {
      if (uniform(rng, 0, density) == 0) plan.push_back(f);
    }
    const auto a = fetch_frames(plan, store, Strategy::AdaptiveBatch, true);
    const auto p = fetch_frames(plan, store, Strategy::PerFrame).stats;
    const auto n = fetch_frames(plan, store, Strategy::NaiveBatch).stats;
    EXPECT_LE(a.stats.frames_decoded, p.frames_decoded);
    EXPECT_LE(a.stats.frames_decoded, n.frames_decoded);
    EXPECT_LE(a.stats.bytes_read, p.bytes_read);
    for (auto f : a.decoded) {
      const bool covered = std::any_of(plan.begin(), plan.end(), [&](std::uint32_t t) {
        return f <= t && f >= store.keyframe_before(t);
      });
      EXPECT_TRUE(covered) << "frame " << f;
    }
  }
}

TEST(Fetch, StatsAreDeterministic) {
  const auto store = small_store(150, GopConfig::variable(4, 5, 60));
  const std::vector<std::uint32_t> plan{3, 4, 70, 71, 72, 149};
  for (auto s : kAll) {
    const auto a = fetch_frames(plan, store, s).stats;
    const auto b = fetch_frames(plan, store, s).stats;
    EXPECT_EQ(a.bytes_read, b.bytes_read);
    EXPECT_EQ(a.frames_decoded, b.frames_decoded);
    EXPECT_EQ(a.images, plan.size());
    EXPECT_DOUBLE_EQ(a.kb_per_img(), static_cast<double>(a.bytes_read) / 6.0 / 1024.0);
  }
}

TEST(Gop, FixedSeeksCheaperThanVariable) {
  // Single-frame plans: frames decoded per seek is t - keyframe_before(t) + 1.
  std::mt19937_64 rng(31);
  const std::uint32_t frames = 6000;
  const auto median_cost = [&](const GopConfig& gop) {
    const auto kf = gop_layout(gop, frames);
    std::vector<std::uint32_t> costs;
    for (int i = 0; i < 2000; ++i) {
      const auto t = static_cast<std::uint32_t>(uniform(rng, 0, frames - 1));
      costs.push_back(t - sim_keyframe_before(kf, t) + 1);
    }
    std::nth_element(costs.begin(), costs.begin() + 1000, costs.end());
    return costs[1000];
  };
  const auto fixed = median_cost(GopConfig::fixed(30));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    EXPECT_LT(fixed, median_cost(GopConfig::variable(seed, 27, 250))) << "seed " << seed;
  }
}

TEST(Bench, SmallDatasetReport) {
  TempDir dir;
  std::mt19937_64 rng(5);
  write_media(dir / "a.gops", random_frames(rng, 400, 16, 8), GopConfig::fixed(10));
  Episode ep{"a", {}, {}};
  for (std::uint32_t i = 0; i < 400; ++i) {
    ep.events.push_back(screen_at(Timestamp::from_ms(50ULL * i), i, "a.gops"));
    ep.events.push_back(random_mouse(rng, Timestamp::from_ms(50ULL * i + 20)));
  }
  const std::vector<Episode> eps{ep};
  const auto manifest = pack_dataset(eps, PackConfig{});

  BenchConfig cfg;
  cfg.repetitions = 2;
  cfg.work_dir = dir / "work";
  const auto report = bench_pipeline(manifest, dir.path(), cfg);
  ASSERT_EQ(report.rows.size(), 6U);
  for (const auto& gop : {std::string("fixed:30"), GopConfig::variable(7).describe()}) {
    const auto* per = report.find(gop, Strategy::PerFrame);
    const auto* naive = report.find(gop, Strategy::NaiveBatch);
    const auto* adaptive = report.find(gop, Strategy::AdaptiveBatch);
    ASSERT_TRUE(per && naive && adaptive) << gop;
    EXPECT_EQ(per->images, 400U);
    EXPECT_EQ(adaptive->images, 400U);
    EXPECT_LE(adaptive->frames_decoded, per->frames_decoded);
    EXPECT_LE(adaptive->frames_decoded, naive->frames_decoded);
    EXPECT_LE(adaptive->kb_per_img, per->kb_per_img);
    EXPECT_GT(adaptive->img_per_s_min, 0.0);
    EXPECT_LE(adaptive->img_per_s_min, adaptive->img_per_s_median);
  }
  // The source store is not modified by re-encoding.
  EXPECT_EQ(MediaStore::open(dir / "a.gops").header().gop, GopConfig::fixed(10));

  // Byte and frame counts are reproducible; only the timing section varies.
  const auto again = bench_pipeline(manifest, dir.path(), cfg);
  const auto records = [](const std::string& text) { return text.substr(0, text.find("# timing")); };
  EXPECT_EQ(records(report.to_text()), records(again.to_text()));
}

TEST(Bench, MissingStore) {
  TempDir dir;
  const std::vector<Episode> eps{Episode{"m", {screen_at(Timestamp{}, 0, "gone.gops")}, {}}};
  const auto manifest = pack_dataset(eps, PackConfig{});
  BenchConfig cfg;
  cfg.repetitions = 1;
  EXPECT_EQ(error_of([&] { bench_pipeline(manifest, dir.path(), cfg); }), ErrorClass::MediaMissing);
}
