// Micro benchmarks for the hot paths: frame fetch strategies, event
// tokenization and FSL packing.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "deskpipe/codec.hpp"
#include "deskpipe/decode_engine.hpp"
#include "deskpipe/events.hpp"
#include "deskpipe/fsl.hpp"
#include "deskpipe/tokenizer.hpp"

using namespace deskpipe;

namespace {

std::vector<Frame> moving_square(std::uint32_t n) {
  std::vector<Frame> frames;
  frames.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    Frame f(160, 96, 0);
    for (std::uint16_t y = 0; y < 8; ++y) {
      for (std::uint16_t x = 0; x < 8; ++x) f.at((i * 3 + x) % 160, (i + y) % 96) = 255;
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

const MediaStore& store_for(bool variable) {
  static const auto frames = moving_square(600);
  static const auto fixed = MediaStore::from_bytes(encode_media(frames, GopConfig::fixed(30)));
  static const auto var = MediaStore::from_bytes(encode_media(frames, GopConfig::variable(7, 27, 250)));
  return variable ? var : fixed;
}

// A contiguous window of 15 frames, the shape one packed sample produces.
void BM_Fetch(benchmark::State& state) {
  const auto strategy = static_cast<Strategy>(state.range(0));
  const auto& store = store_for(state.range(1) != 0);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::uint32_t> start(0, store.frame_count() - 16);
  std::vector<std::uint32_t> plan(15);
  std::uint64_t bytes = 0;
  for (auto _ : state) {
    std::iota(plan.begin(), plan.end(), start(rng));
    const auto r = fetch_frames(plan, store, strategy);
    bytes += r.stats.bytes_read;
    benchmark::DoNotOptimize(r.frames.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * plan.size()));
  state.counters["bytes_per_img"] =
      benchmark::Counter(static_cast<double>(bytes) / static_cast<double>(state.iterations() * plan.size()));
  state.SetLabel(std::string(strategy_name(strategy)) + (state.range(1) ? " variable" : " fixed"));
}
BENCHMARK(BM_Fetch)
    ->ArgsProduct({{static_cast<int>(Strategy::PerFrame), static_cast<int>(Strategy::NaiveBatch),
                    static_cast<int>(Strategy::AdaptiveBatch)},
                   {0, 1}});

void BM_EncodeEvent(benchmark::State& state) {
  const Event e = MouseEvent{Timestamp::from_ms(2450), 2, -19, 0x480, 0};
  std::vector<Token> out;
  for (auto _ : state) {
    out.clear();
    encode_event_into(e, TokenizerConfig{}, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EncodeEvent);

void BM_Pack(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::vector<Event> events;
  for (std::uint32_t i = 0; i < 6000; ++i) {
    const Timestamp t = Timestamp::from_ms(50ULL * i);
    events.push_back(ScreenEvent{t, MediaRef{MediaKind::External, "media.gops", std::nullopt}, i});
    if (rng() % 2) events.push_back(MouseEvent{t, 1, -1, 0, std::nullopt});
  }
  const Episode ep{"bench", std::move(events), {}};
  const PackConfig cfg;
  for (auto _ : state) {
    const auto samples = pack_episode(ep.id, apply_nep_tau(ep, cfg.tau), cfg);
    benchmark::DoNotOptimize(samples.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * ep.events.size()));
}
BENCHMARK(BM_Pack);

}  // namespace
BENCHMARK_MAIN();
