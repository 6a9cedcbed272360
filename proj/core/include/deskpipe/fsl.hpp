#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "deskpipe/events.hpp"
#include "deskpipe/tokenizer.hpp"

namespace deskpipe {

struct PackConfig {
  std::uint32_t max_seq_len = 4096;
  std::uint32_t tau = 1;
  TokenizerConfig tokenizer;
};

// media uri -> sorted, unique frame indices
using AccessPlan = std::map<std::string, std::vector<std::uint32_t>>;

struct FrameRef {
  std::string uri;
  std::uint32_t frame_index = 0;

  friend bool operator==(const FrameRef&, const FrameRef&) = default;
};

// Tokens [token_begin, token_end) of a sample encode event `event_index` of
// the (rearranged) episode event list.
struct AlignmentSpan {
  std::uint32_t token_begin = 0;
  std::uint32_t token_end = 0;
  std::uint32_t event_index = 0;
  Topic topic = Topic::Screen;
  std::optional<FrameRef> frame;  // external screen frames only

  friend bool operator==(const AlignmentSpan&, const AlignmentSpan&) = default;
};

struct PackedSample {
  std::string episode_id;
  std::vector<Token> tokens;  // always max_seq_len long
  std::uint32_t content_tokens = 0;
  std::vector<AlignmentSpan> alignment;
  AccessPlan access_plan;
};

// Shifts every action to just after the screen event τ observations later
// than the last screen preceding it, capped at the final screen. Screens keep
// their order; actions keep their relative order.
std::vector<Event> apply_nep_tau(const Episode& ep, std::uint32_t tau);

// Greedy event-boundary packing of one episode. Samples are PAD-suffixed to
// max_seq_len; an event that does not fit starts the next sample. Throws
// EventTooLarge.
void pack_episode(const std::string& episode_id, std::span<const Event> events,
                  const PackConfig& cfg, const std::function<void(PackedSample&&)>& emit);
std::vector<PackedSample> pack_episode(const std::string& episode_id,
                                       std::span<const Event> events, const PackConfig& cfg);

AccessPlan build_access_plan(const PackedSample& sample);

struct ManifestEntry {
  std::string episode_id;
  std::uint64_t token_offset = 0;
  std::uint32_t content_tokens = 0;
  std::uint32_t event_count = 0;
  AccessPlan plan;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  PackConfig config;
  std::uint64_t episodes = 0;
  std::uint64_t total_tokens = 0;
  std::uint64_t events = 0;
  std::uint64_t screen_frames = 0;
  std::string vocab_file = "vocab.txt";
  std::string token_file = "tokens.bin";
  std::vector<ManifestEntry> samples;

  // Header lines followed by one tab-separated line per sample.
  std::string to_text() const;
  static DatasetManifest parse(std::string_view text);
};

// Receives samples in manifest order.
class SampleSink {
 public:
  virtual ~SampleSink() = default;
  virtual void consume(const PackedSample& sample) = 0;
};

// Appends token ids as little-endian u32.
class TokenFileSink final : public SampleSink {
 public:
  explicit TokenFileSink(const std::filesystem::path& path);
  void consume(const PackedSample& sample) override;
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

// Applies NEP-τ then packs each episode, preserving input order.
DatasetManifest pack_dataset(std::span<const Episode> episodes, const PackConfig& cfg,
                             SampleSink* sink = nullptr);

// Reads `count` tokens starting at token offset `offset` from a token file.
std::vector<Token> read_tokens(const std::filesystem::path& path, std::uint64_t offset,
                               std::uint64_t count);

}  // namespace deskpipe
