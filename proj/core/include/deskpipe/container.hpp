#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deskpipe/byte_io.hpp"
#include "deskpipe/events.hpp"

namespace deskpipe {

// Binary layout, all integers little-endian:
//   header   = "OWA1" | version u16
//   metadata = 3 u8 | len u32 | (id str16, n u16, n x (key str16, value str16)) | crc32 u32
//   chunk    = 1 u8 | len u32 | messages | crc32 u32
//   message  = channel u16 | t_ns u64 | body_len u32 | body
//   footer   = 2 u8 | channels | chunk index | footer_offset u64 | "1AWO"
inline constexpr std::uint16_t kContainerVersion = 1;
inline constexpr std::size_t kDefaultChunkMessages = 512;

namespace channel {
inline constexpr std::uint16_t kEmbeddedMedia = 0;
inline constexpr std::uint16_t kScreen = 1;
inline constexpr std::uint16_t kKeyboard = 2;
inline constexpr std::uint16_t kMouse = 3;
inline constexpr std::uint16_t kCount = 4;
}  // namespace channel

struct ChannelDescriptor {
  std::uint16_t channel_id = 0;
  std::string topic;
  std::string schema_name;
  std::uint16_t schema_version = 1;

  friend bool operator==(const ChannelDescriptor&, const ChannelDescriptor&) = default;
};

// The fixed channel table every container uses.
const std::vector<ChannelDescriptor>& standard_channels();
std::uint16_t channel_for(Topic topic);

struct ChunkIndexEntry {
  std::uint16_t channel_mask = 0;  // bit c set when channel c has messages in the chunk
  Timestamp time_min;
  Timestamp time_max;
  std::uint64_t file_offset = 0;
  std::uint32_t message_count = 0;
  std::uint32_t payload_bytes = 0;
  std::uint32_t crc32 = 0;

  friend bool operator==(const ChunkIndexEntry&, const ChunkIndexEntry&) = default;
};

struct ChannelStats {
  std::uint16_t channel_id = 0;
  std::uint64_t count = 0;
  Timestamp t_min;
  Timestamp t_max;
  std::uint64_t bytes = 0;

  friend bool operator==(const ChannelStats&, const ChannelStats&) = default;
};

struct TopicSet {
  std::uint8_t bits = 0b111;

  static TopicSet all() { return {}; }
  static TopicSet of(std::initializer_list<Topic> topics) {
    TopicSet s{0};
    for (auto t : topics) s.bits |= static_cast<std::uint8_t>(1u << static_cast<unsigned>(t));
    return s;
  }
  bool contains(Topic t) const { return (bits >> static_cast<unsigned>(t)) & 1u; }
};

// Closed interval [begin, end].
struct TimeRange {
  Timestamp begin;
  Timestamp end;
};

class ContainerReader;

struct WriterOptions {
  std::size_t chunk_messages = kDefaultChunkMessages;
  // Source for payloads of already-embedded screen refs (re-embedded on write).
  const ContainerReader* embedded_source = nullptr;
};

// Exclusive append-only writer. Chunks are flushed to disk as soon as they
// fill, so everything before a crash point survives in checksummed chunks.
class ContainerWriter {
 public:
  ContainerWriter(const std::filesystem::path& path, std::string episode_id,
                  std::map<std::string, std::string> meta = {}, WriterOptions opts = {});
  ContainerWriter(const ContainerWriter&) = delete;
  ContainerWriter& operator=(const ContainerWriter&) = delete;
  ~ContainerWriter();

  // Timestamps must be non-decreasing across calls.
  void write(const Event& e);
  // Stores an opaque payload on the media channel; returns its handle.
  MediaRef embed(Timestamp t, std::span<const std::uint8_t> payload);
  // Flushes the open chunk and writes the footer.
  void close();

  std::uint64_t chunks_written() const noexcept { return index_.size(); }

 private:
  void append_message(std::uint16_t channel, Timestamp t, std::span<const std::uint8_t> body);
  void flush_chunk();

  std::filesystem::path path_;
  std::ofstream out_;
  WriterOptions opts_;
  std::uint64_t offset_ = 0;
  Bytes pending_;
  std::uint32_t pending_count_ = 0;
  std::uint16_t pending_mask_ = 0;
  Timestamp pending_min_, pending_max_, last_t_;
  std::vector<ChunkIndexEntry> index_;
  std::vector<ChannelStats> stats_;
  std::uint32_t embedded_count_ = 0;
  bool closed_ = false;
};

struct MediaPolicy {
  enum class Kind { External, Embed };
  Kind kind = Kind::External;

  static MediaPolicy external() { return {Kind::External}; }
  static MediaPolicy embed() { return {Kind::Embed}; }
};

struct WriteReport {
  std::uint64_t messages = 0;
  std::uint64_t chunks = 0;
  std::uint64_t file_bytes = 0;
};

// External URIs resolve relative to the container's directory. Throws
// MediaMissing for absent stores and FrameOutOfRange for bad frame indices.
WriteReport write_session(const Episode& ep, const std::filesystem::path& path,
                          MediaPolicy policy = MediaPolicy::external(), WriterOptions opts = {});

struct ReadReport {
  std::vector<std::uint64_t> corrupt_chunk_offsets;
};

class ContainerReader {
 public:
  // Throws NotAContainer or NoFooter.
  static ContainerReader open(const std::filesystem::path& path);
  ContainerReader(std::shared_ptr<ByteSource> source, std::filesystem::path base_dir);

  const std::string& episode_id() const noexcept { return episode_id_; }
  const std::map<std::string, std::string>& meta() const noexcept { return meta_; }
  const std::vector<ChannelDescriptor>& channels() const noexcept { return channels_; }
  const std::vector<ChunkIndexEntry>& index() const noexcept { return index_; }
  const std::vector<ChannelStats>& stats() const noexcept { return stats_; }
  const std::filesystem::path& base_dir() const noexcept { return base_dir_; }

  // Messages matching topics and time range, in file (= timestamp) order.
  // Only chunks whose index entry overlaps the query are read. Chunks that
  // fail their checksum are skipped and listed in `report`; without a report
  // they throw CorruptChunk.
  std::vector<Event> read_messages(TopicSet topics = TopicSet::all(),
                                   std::optional<TimeRange> range = std::nullopt,
                                   ReadReport* report = nullptr) const;
  Episode read_episode() const;

  // Embedded refs return the stored payload; external refs decode the frame
  // from the referenced store. Throws MediaMissing / FrameOutOfRange.
  Bytes resolve_media(const MediaRef& ref) const;
  std::filesystem::path resolve_uri(const std::string& uri) const;

  const ByteSource& source() const noexcept { return *source_; }
  std::uint64_t file_size() const { return source_->size(); }

 private:
  Bytes read_chunk_payload(const ChunkIndexEntry& entry) const;

  std::shared_ptr<ByteSource> source_;
  std::filesystem::path base_dir_;
  std::string episode_id_;
  std::map<std::string, std::string> meta_;
  std::vector<ChannelDescriptor> channels_;
  std::vector<ChunkIndexEntry> index_;
  std::vector<ChannelStats> stats_;
};

struct RecoveryResult {
  std::uint64_t recovered_messages = 0;
  std::uint64_t recovered_chunks = 0;
  std::uint64_t dropped_chunks = 0;
  bool metadata_recovered = false;
};

// Rebuilds a sealed container from a possibly truncated image: keeps every
// chunk whose checksum verifies, stops at the first incomplete record, and
// appends a fresh footer. Throws NotAContainer on a bad or truncated header.
Bytes recover_bytes(std::span<const std::uint8_t> data, RecoveryResult* result = nullptr);

struct Recovered {
  ContainerReader reader;
  RecoveryResult result;
};

// Recovers `in` into `out` (defaults to rewriting `in`).
Recovered recover(const std::filesystem::path& in,
                  const std::optional<std::filesystem::path>& out = std::nullopt);

struct ContainerSummary {
  std::vector<ChannelStats> channels;
  std::uint64_t frame_count = 0;
  std::uint64_t raw_frame_bytes = 0;
  std::uint64_t container_bytes = 0;
  std::uint64_t external_media_bytes = 0;
  double compression_ratio = 1.0;
  bool ratio_degenerate = false;  // no frames referenced
};

// ratio = raw frame bytes / (container bytes + referenced external store bytes).
ContainerSummary summarize(const ContainerReader& reader);
std::string format_summary(const ContainerSummary& summary);

// Rewrites external URIs so they stay valid after moving from `from_dir` to `to_dir`.
void rebase_media_uris(Episode& ep, const std::filesystem::path& from_dir,
                       const std::filesystem::path& to_dir);

}  // namespace deskpipe
