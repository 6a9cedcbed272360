#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "deskpipe/codec.hpp"
#include "deskpipe/fsl.hpp"

namespace deskpipe {

enum class Strategy : std::uint8_t { PerFrame, NaiveBatch, AdaptiveBatch };

std::string_view strategy_name(Strategy s);
Strategy parse_strategy(std::string_view name);
// "all" or a comma-separated list of strategy names.
std::vector<Strategy> parse_strategies(std::string_view text);

struct DecodeStats {
  std::uint64_t images = 0;
  std::uint64_t bytes_read = 0;
  std::uint64_t frames_decoded = 0;
  std::uint64_t seeks = 0;
  double elapsed = 0.0;  // seconds

  double img_per_s() const { return elapsed > 0.0 ? static_cast<double>(images) / elapsed : 0.0; }
  double kb_per_img() const {
    return images ? static_cast<double>(bytes_read) / static_cast<double>(images) / 1024.0 : 0.0;
  }
  DecodeStats& operator+=(const DecodeStats& o);
};

struct FetchResult {
  std::vector<Frame> frames;  // in plan order
  DecodeStats stats;
  std::vector<std::uint32_t> decoded;  // every frame index decoded, if traced
};

// `plan` must be sorted ascending and unique. Throws FrameOutOfRange,
// InvalidArgument.
FetchResult fetch_frames(std::span<const std::uint32_t> plan, const MediaStore& store,
                         Strategy strategy, bool trace = false);

inline std::vector<Frame> adaptive_batch(std::span<const std::uint32_t> plan,
                                         const MediaStore& store) {
  return fetch_frames(plan, store, Strategy::AdaptiveBatch).frames;
}

struct BenchConfig {
  std::vector<Strategy> strategies{Strategy::PerFrame, Strategy::NaiveBatch,
                                   Strategy::AdaptiveBatch};
  std::vector<GopConfig> gops{GopConfig::fixed(30), GopConfig::variable(7)};
  unsigned repetitions = 3;
  std::filesystem::path work_dir;  // empty: a fresh directory under the system temp dir
};

struct BenchRow {
  std::string gop_mode;
  Strategy strategy = Strategy::PerFrame;
  std::uint64_t images = 0;
  std::uint64_t frames_decoded = 0;
  std::uint64_t bytes_read = 0;
  std::uint64_t seeks = 0;
  double kb_per_img = 0.0;
  double img_per_s_min = 0.0;
  double img_per_s_median = 0.0;
};

struct BenchReport {
  std::vector<BenchRow> rows;

  const BenchRow* find(std::string_view gop_mode, Strategy s) const;
  // Table and key/value records; wall-clock figures only appear in the
  // trailing "# timing" section.
  std::string to_text() const;
};

// Re-encodes every store referenced by the manifest under each GOP variant
// and replays all sample plans with each strategy. Store uris are resolved
// relative to `dataset_dir`.
BenchReport bench_pipeline(const DatasetManifest& manifest, const std::filesystem::path& dataset_dir,
                           const BenchConfig& cfg);

}  // namespace deskpipe
