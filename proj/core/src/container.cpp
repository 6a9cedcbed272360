#include "deskpipe/container.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <set>
#include <sstream>

#include "deskpipe/codec.hpp"
#include "deskpipe/errors.hpp"

namespace deskpipe {

namespace {

constexpr std::uint8_t kMagic[4] = {'O', 'W', 'A', '1'};
constexpr std::uint8_t kFooterMagic[4] = {'1', 'A', 'W', 'O'};
constexpr std::uint8_t kChunkRecord = 1;
constexpr std::uint8_t kFooterRecord = 2;
constexpr std::uint8_t kMetadataRecord = 3;
constexpr std::size_t kHeaderBytes = 6;
constexpr std::size_t kRecordPrefix = 5;  // type u8 | len u32
constexpr std::size_t kTrailerBytes = 12;  // footer_offset u64 | magic
constexpr std::size_t kMessageHeader = 2 + 8 + 4;
constexpr std::string_view kEmbeddedPrefix = "embedded:";

struct RawMessage {
  std::uint16_t channel;
  Timestamp t;
  std::span<const std::uint8_t> body;
};

Bytes header_bytes() {
  Bytes out;
  ByteWriter w(out);
  w.bytes(kMagic);
  w.u16(kContainerVersion);
  return out;
}

Bytes metadata_record(const std::string& id, const std::map<std::string, std::string>& meta) {
  Bytes payload;
  ByteWriter p(payload);
  p.str16(id);
  p.u16(static_cast<std::uint16_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    p.str16(k);
    p.str16(v);
  }
  Bytes out;
  ByteWriter w(out);
  w.u8(kMetadataRecord);
  w.u32(static_cast<std::uint32_t>(payload.size()));
  w.bytes(payload);
  w.u32(crc32(payload));
  return out;
}

void parse_metadata(std::span<const std::uint8_t> payload, std::string& id,
                    std::map<std::string, std::string>& meta) {
  ByteReader r(payload, ErrorClass::CorruptChunk);
  id = r.str16();
  const auto n = r.u16();
  for (std::uint16_t i = 0; i < n; ++i) {
    auto k = r.str16();
    meta[std::move(k)] = r.str16();
  }
}

Bytes encode_body(const Event& e) {
  Bytes body;
  ByteWriter w(body);
  if (const auto* s = std::get_if<ScreenEvent>(&e)) {
    w.u8(static_cast<std::uint8_t>(s->media.kind));
    w.str16(s->media.uri);
    w.u8(s->media.frame_index.has_value() ? 1 : 0);
    w.u32(s->media.frame_index.value_or(0));
    w.u32(s->frame_index);
  } else if (const auto* k = std::get_if<KeyboardEvent>(&e)) {
    w.u8(static_cast<std::uint8_t>(k->vk));
    w.u8(static_cast<std::uint8_t>(k->action));
  } else {
    const auto& m = std::get<MouseEvent>(e);
    w.i32(m.dx);
    w.i32(m.dy);
    w.u16(m.button_flags);
    w.u8(m.scroll.has_value() ? 1 : 0);
    w.i32(m.scroll.value_or(0));
  }
  return body;
}

Event decode_body(std::uint16_t ch, Timestamp t, std::span<const std::uint8_t> body) {
  ByteReader r(body, ErrorClass::CorruptChunk);
  Event out;
  switch (ch) {
    case channel::kScreen: {
      ScreenEvent s;
      s.t = t;
      s.media.kind = static_cast<MediaKind>(r.u8());
      s.media.uri = r.str16();
      const bool has_ref_frame = r.u8() != 0;
      const auto ref_frame = r.u32();
      if (has_ref_frame) s.media.frame_index = ref_frame;
      s.frame_index = r.u32();
      out = std::move(s);
      break;
    }
    case channel::kKeyboard: {
      KeyboardEvent k;
      k.t = t;
      k.vk = r.u8();
      k.action = static_cast<KeyAction>(r.u8());
      out = k;
      break;
    }
    case channel::kMouse: {
      MouseEvent m;
      m.t = t;
      m.dx = r.i32();
      m.dy = r.i32();
      m.button_flags = r.u16();
      const bool has_scroll = r.u8() != 0;
      const auto scroll = r.i32();
      if (has_scroll) m.scroll = scroll;
      out = m;
      break;
    }
    default:
      throw_error(ErrorClass::CorruptChunk, "message on unknown channel " + std::to_string(ch));
  }
  enforce(r.done(), ErrorClass::CorruptChunk, "trailing bytes in message body");
  try {
    validate_event(out);
  } catch (const Error& err) {
    throw_error(ErrorClass::CorruptChunk, std::string("stored event invalid: ") + err.what());
  }
  return out;
}

std::vector<RawMessage> parse_messages(std::span<const std::uint8_t> payload) {
  std::vector<RawMessage> msgs;
  ByteReader r(payload, ErrorClass::CorruptChunk);
  while (!r.done()) {
    RawMessage m;
    m.channel = r.u16();
    if (m.channel >= channel::kCount) {
      throw_error(ErrorClass::CorruptChunk, "message on unknown channel " +
                                            std::to_string(m.channel));
    }
    m.t = Timestamp{r.u64()};
    const auto len = r.u32();
    m.body = r.bytes(len);
    msgs.push_back(m);
  }
  return msgs;
}

std::vector<ChannelStats> empty_stats() {
  std::vector<ChannelStats> stats(channel::kCount);
  for (std::uint16_t c = 0; c < channel::kCount; ++c) stats[c].channel_id = c;
  return stats;
}

// Index entry + per-channel stats for one chunk payload; shared by the
// writer and by recovery so both produce identical footers.
ChunkIndexEntry account_chunk(std::span<const std::uint8_t> payload, std::uint64_t offset,
                              std::vector<ChannelStats>& stats) {
  ChunkIndexEntry entry;
  entry.file_offset = offset;
  entry.payload_bytes = static_cast<std::uint32_t>(payload.size());
  entry.crc32 = crc32(payload);
  const auto msgs = parse_messages(payload);
  for (std::size_t i = 0; i < msgs.size(); ++i) {
    const auto& m = msgs[i];
    if (i == 0 || m.t < entry.time_min) entry.time_min = m.t;
    if (i == 0 || m.t > entry.time_max) entry.time_max = m.t;
    entry.channel_mask |= static_cast<std::uint16_t>(1u << m.channel);
    auto& st = stats[m.channel];
    if (st.count == 0 || m.t < st.t_min) st.t_min = m.t;
    if (st.count == 0 || m.t > st.t_max) st.t_max = m.t;
    ++st.count;
    st.bytes += kMessageHeader + m.body.size();
  }
  entry.message_count = static_cast<std::uint32_t>(msgs.size());
  return entry;
}

Bytes chunk_record(std::span<const std::uint8_t> payload) {
  Bytes out;
  out.reserve(payload.size() + kRecordPrefix + 4);
  ByteWriter w(out);
  w.u8(kChunkRecord);
  w.u32(static_cast<std::uint32_t>(payload.size()));
  w.bytes(payload);
  w.u32(crc32(payload));
  return out;
}

Bytes footer_record(const std::vector<ChunkIndexEntry>& index,
                    const std::vector<ChannelStats>& stats, std::uint64_t footer_offset) {
  Bytes out;
  ByteWriter w(out);
  w.u8(kFooterRecord);
  const auto& chans = standard_channels();
  w.u16(static_cast<std::uint16_t>(chans.size()));
  for (std::size_t c = 0; c < chans.size(); ++c) {
    w.u16(chans[c].channel_id);
    w.str16(chans[c].topic);
    w.str16(chans[c].schema_name);
    w.u16(chans[c].schema_version);
    w.u64(stats[c].count);
    w.u64(stats[c].t_min.ns);
    w.u64(stats[c].t_max.ns);
    w.u64(stats[c].bytes);
  }
  w.u32(static_cast<std::uint32_t>(index.size()));
  for (const auto& e : index) {
    w.u16(e.channel_mask);
    w.u64(e.time_min.ns);
    w.u64(e.time_max.ns);
    w.u64(e.file_offset);
    w.u32(e.message_count);
    w.u32(e.payload_bytes);
    w.u32(e.crc32);
  }
  w.u64(footer_offset);
  w.bytes(kFooterMagic);
  return out;
}

std::uint8_t topic_channel_bits(TopicSet topics) {
  std::uint8_t bits = 0;
  if (topics.contains(Topic::Screen)) bits |= 1u << channel::kScreen;
  if (topics.contains(Topic::Keyboard)) bits |= 1u << channel::kKeyboard;
  if (topics.contains(Topic::Mouse)) bits |= 1u << channel::kMouse;
  return bits;
}

std::optional<std::uint32_t> parse_embedded_handle(const std::string& uri) {
  if (uri.rfind(kEmbeddedPrefix, 0) != 0) return std::nullopt;
  std::uint32_t n = 0;
  const char* first = uri.data() + kEmbeddedPrefix.size();
  const char* last = uri.data() + uri.size();
  auto [ptr, ec] = std::from_chars(first, last, n);
  if (ec != std::errc{} || ptr != last || first == last) return std::nullopt;
  return n;
}

std::filesystem::path resolve_against(const std::filesystem::path& base, const std::string& uri) {
  std::filesystem::path p(uri);
  return p.is_absolute() ? p : base / p;
}

}  // namespace

const std::vector<ChannelDescriptor>& standard_channels() {
  static const std::vector<ChannelDescriptor> kChannels = {
      {channel::kEmbeddedMedia, "media", "deskpipe/EmbeddedMedia", 1},
      {channel::kScreen, "screen", "deskpipe/ScreenCaptured", 1},
      {channel::kKeyboard, "keyboard", "deskpipe/KeyboardEvent", 1},
      {channel::kMouse, "mouse", "deskpipe/RawMouseEvent", 1},
  };
  return kChannels;
}

std::uint16_t channel_for(Topic topic) {
  switch (topic) {
    case Topic::Screen: return channel::kScreen;
    case Topic::Keyboard: return channel::kKeyboard;
    case Topic::Mouse: return channel::kMouse;
  }
  return channel::kScreen;
}

// ---------------------------------------------------------------------------
// Writer

ContainerWriter::ContainerWriter(const std::filesystem::path& path, std::string episode_id,
                                 std::map<std::string, std::string> meta, WriterOptions opts)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc), opts_(opts),
      stats_(empty_stats()) {
  if (!out_) {
    throw_error(ErrorClass::IoFailure, "cannot create " + path.string());
  }
  enforce(opts_.chunk_messages > 0, ErrorClass::InvalidArgument, "chunk_messages must be > 0");
  auto head = header_bytes();
  const auto meta_rec = metadata_record(episode_id, meta);
  head.insert(head.end(), meta_rec.begin(), meta_rec.end());
  out_.write(reinterpret_cast<const char*>(head.data()), static_cast<std::streamsize>(head.size()));
  out_.flush();
  if (!out_) {
    throw_error(ErrorClass::IoFailure, "write failed: " + path.string());
  }
  offset_ = head.size();
}

ContainerWriter::~ContainerWriter() {
  if (!closed_) {
    try {
      close();
    } catch (...) {
      // The checksummed chunks already on disk stay recoverable.
    }
  }
}

void ContainerWriter::append_message(std::uint16_t ch, Timestamp t,
                                     std::span<const std::uint8_t> body) {
  enforce(!closed_, ErrorClass::InvalidArgument, "write after close");
  if (t < last_t_) {
    throw_error(ErrorClass::InvalidEvent, "timestamps must be non-decreasing (" +
                                          std::to_string(t.ns) + " after " +
                                          std::to_string(last_t_.ns) + ")");
  }
  last_t_ = t;
  ByteWriter w(pending_);
  w.u16(ch);
  w.u64(t.ns);
  w.u32(static_cast<std::uint32_t>(body.size()));
  w.bytes(body);
  if (++pending_count_ >= opts_.chunk_messages) flush_chunk();
}

void ContainerWriter::write(const Event& e) {
  validate_event(e);
  const auto body = encode_body(e);
  append_message(channel_for(topic_of(e)), timestamp_of(e), body);
}

MediaRef ContainerWriter::embed(Timestamp t, std::span<const std::uint8_t> payload) {
  append_message(channel::kEmbeddedMedia, t, payload);
  return MediaRef{MediaKind::Embedded, std::string(kEmbeddedPrefix) + std::to_string(embedded_count_++),
                  std::nullopt};
}

void ContainerWriter::flush_chunk() {
  if (pending_count_ == 0) return;
  index_.push_back(account_chunk(pending_, offset_, stats_));
  const auto rec = chunk_record(pending_);
  out_.write(reinterpret_cast<const char*>(rec.data()), static_cast<std::streamsize>(rec.size()));
  out_.flush();
  if (!out_) {
    throw_error(ErrorClass::IoFailure, "write failed: " + path_.string());
  }
  offset_ += rec.size();
  pending_.clear();
  pending_count_ = 0;
}

void ContainerWriter::close() {
  if (closed_) return;
  flush_chunk();
  const auto footer = footer_record(index_, stats_, offset_);
  out_.write(reinterpret_cast<const char*>(footer.data()),
             static_cast<std::streamsize>(footer.size()));
  out_.flush();
  closed_ = true;
  if (!out_) {
    throw_error(ErrorClass::IoFailure, "write failed: " + path_.string());
  }
  out_.close();
}

WriteReport write_session(const Episode& ep, const std::filesystem::path& path,
                          MediaPolicy policy, WriterOptions opts) {
  const auto base = path.parent_path();

  struct OpenStore {
    MediaStore store;
    std::optional<SequentialDecoder> decoder;
    ByteCounter counter;
  };
  std::map<std::string, std::unique_ptr<OpenStore>> stores;

  auto store_for = [&](const std::string& uri) -> OpenStore& {
    auto it = stores.find(uri);
    if (it != stores.end()) return *it->second;
    const auto p = resolve_against(base, uri);
    if (!std::filesystem::exists(p)) {
      throw_error(ErrorClass::MediaMissing, "external media not found: " + p.string());
    }
    auto os = std::unique_ptr<OpenStore>(new OpenStore{MediaStore::open(p), std::nullopt, {}});
    return *stores.emplace(uri, std::move(os)).first->second;
  };

  ContainerWriter writer(path, ep.id, ep.meta, opts);
  WriteReport report;
  for (const auto& e : ep.events) {
    const auto* s = std::get_if<ScreenEvent>(&e);
    if (s == nullptr) {
      writer.write(e);
      ++report.messages;
      continue;
    }

    Bytes payload;
    bool have_payload = false;
    if (s->media.kind == MediaKind::External) {
      auto& os = store_for(s->media.uri);
      if (s->frame_index >= os.store.frame_count()) {
        throw_error(ErrorClass::FrameOutOfRange, "frame " + std::to_string(s->frame_index) +
                                                 " >= frame count of " + s->media.uri);
      }
      if (policy.kind == MediaPolicy::Kind::Embed) {
        if (!os.decoder || os.decoder->position() != s->frame_index) {
          os.decoder.emplace(os.store, s->frame_index, os.counter);
        }
        payload = os.decoder->next().pixels;
        have_payload = true;
      }
    } else {
      if (opts.embedded_source == nullptr) {
        throw_error(ErrorClass::MediaMissing, "embedded ref " + s->media.uri +
                                              " has no source container");
      }
      payload = opts.embedded_source->resolve_media(s->media);
      have_payload = true;
    }

    if (have_payload) {
      ScreenEvent copy = *s;
      copy.media = writer.embed(s->t, payload);
      copy.frame_index = 0;
      writer.write(copy);
      report.messages += 2;
    } else {
      writer.write(e);
      ++report.messages;
    }
  }
  writer.close();
  report.chunks = writer.chunks_written();
  report.file_bytes = std::filesystem::file_size(path);
  return report;
}

// ---------------------------------------------------------------------------
// Reader

ContainerReader ContainerReader::open(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw_error(ErrorClass::IoFailure, "no such file: " + path.string());
  }
  return ContainerReader(std::make_shared<FileSource>(path), path.parent_path());
}

ContainerReader::ContainerReader(std::shared_ptr<ByteSource> source, std::filesystem::path base_dir)
    : source_(std::move(source)), base_dir_(std::move(base_dir)) {
  const auto size = source_->size();
  enforce(size >= kHeaderBytes, ErrorClass::NotAContainer, "file shorter than header");
  const auto head = source_->read_at(0, kHeaderBytes);
  enforce(std::equal(std::begin(kMagic), std::end(kMagic), head.begin()),
          ErrorClass::NotAContainer, "bad container magic");
  enforce(ByteReader(std::span(head).subspan(4), ErrorClass::NotAContainer).u16() ==
              kContainerVersion,
          ErrorClass::NotAContainer, "unsupported container version");

  enforce(size >= kHeaderBytes + kTrailerBytes, ErrorClass::NoFooter, "file has no footer");
  const auto trailer = source_->read_at(size - kTrailerBytes, kTrailerBytes);
  enforce(std::equal(std::begin(kFooterMagic), std::end(kFooterMagic), trailer.begin() + 8),
          ErrorClass::NoFooter, "missing footer magic (truncated file? try recover)");
  const auto footer_offset = ByteReader(trailer, ErrorClass::NoFooter).u64();
  enforce(footer_offset >= kHeaderBytes && footer_offset < size - kTrailerBytes,
          ErrorClass::NoFooter, "footer offset out of range");

  // Metadata record directly after the header.
  if (footer_offset >= kHeaderBytes + kRecordPrefix) {
    const auto prefix = source_->read_at(kHeaderBytes, kRecordPrefix);
    ByteReader pr(prefix, ErrorClass::NoFooter);
    if (pr.u8() == kMetadataRecord) {
      const auto len = pr.u32();
      enforce(kHeaderBytes + kRecordPrefix + std::uint64_t{len} + 4 <= footer_offset,
              ErrorClass::CorruptChunk, "metadata record overruns file");
      const auto rest = source_->read_at(kHeaderBytes + kRecordPrefix, len + 4);
      const auto payload = std::span(rest).first(len);
      const auto stored = ByteReader(std::span(rest).subspan(len), ErrorClass::CorruptChunk).u32();
      enforce(stored == crc32(payload), ErrorClass::CorruptChunk, "metadata checksum mismatch");
      parse_metadata(payload, episode_id_, meta_);
    }
  }

  const auto footer = source_->read_at(footer_offset, size - kTrailerBytes - footer_offset);
  ByteReader r(footer, ErrorClass::NoFooter);
  enforce(r.u8() == kFooterRecord, ErrorClass::NoFooter, "footer record type mismatch");
  const auto nchan = r.u16();
  stats_ = empty_stats();
  const auto& expected = standard_channels();
  for (std::uint16_t i = 0; i < nchan; ++i) {
    ChannelDescriptor d;
    d.channel_id = r.u16();
    d.topic = r.str16();
    d.schema_name = r.str16();
    d.schema_version = r.u16();
    if (d.channel_id >= channel::kCount || d != expected[d.channel_id]) {
      throw_error(ErrorClass::NotAContainer, "channel " + std::to_string(d.channel_id) +
                                             " schema mismatch (" + d.schema_name + " v" +
                                             std::to_string(d.schema_version) + ")");
    }
    auto& st = stats_[d.channel_id];
    st.count = r.u64();
    st.t_min = Timestamp{r.u64()};
    st.t_max = Timestamp{r.u64()};
    st.bytes = r.u64();
    channels_.push_back(std::move(d));
  }
  const auto nentries = r.u32();
  index_.reserve(nentries);
  std::uint64_t prev_offset = 0;
  for (std::uint32_t i = 0; i < nentries; ++i) {
    ChunkIndexEntry e;
    e.channel_mask = r.u16();
    e.time_min = Timestamp{r.u64()};
    e.time_max = Timestamp{r.u64()};
    e.file_offset = r.u64();
    e.message_count = r.u32();
    e.payload_bytes = r.u32();
    e.crc32 = r.u32();
    const bool ordered = e.time_min <= e.time_max && (i == 0 || e.file_offset > prev_offset);
    const bool inside = e.file_offset + kRecordPrefix + e.payload_bytes + 4 <= footer_offset;
    if (!ordered || !inside) {
      throw_error(ErrorClass::NoFooter, "inconsistent chunk index entry " + std::to_string(i));
    }
    prev_offset = e.file_offset;
    index_.push_back(e);
  }
}

Bytes ContainerReader::read_chunk_payload(const ChunkIndexEntry& entry) const {
  auto rec = source_->read_at(entry.file_offset, kRecordPrefix + entry.payload_bytes + 4);
  ByteReader r(rec, ErrorClass::CorruptChunk);
  enforce(r.u8() == kChunkRecord, ErrorClass::CorruptChunk, "chunk record type mismatch");
  enforce(r.u32() == entry.payload_bytes, ErrorClass::CorruptChunk, "chunk length mismatch");
  const auto payload = r.bytes(entry.payload_bytes);
  const auto stored = r.u32();
  const auto actual = crc32(payload);
  if (!(stored == actual && actual == entry.crc32)) {
    throw_error(ErrorClass::CorruptChunk, "checksum mismatch in chunk at offset " +
                                          std::to_string(entry.file_offset));
  }
  return Bytes(payload.begin(), payload.end());
}

std::vector<Event> ContainerReader::read_messages(TopicSet topics, std::optional<TimeRange> range,
                                                  ReadReport* report) const {
  const auto wanted = topic_channel_bits(topics);
  std::vector<Event> out;
  for (const auto& entry : index_) {
    if ((entry.channel_mask & wanted) == 0) continue;
    if (range && (entry.time_max < range->begin || entry.time_min > range->end)) continue;
    Bytes payload;
    std::vector<RawMessage> msgs;
    try {
      payload = read_chunk_payload(entry);
      msgs = parse_messages(payload);
    } catch (const Error& err) {
      if (err.error_class() != ErrorClass::CorruptChunk || report == nullptr) throw;
      report->corrupt_chunk_offsets.push_back(entry.file_offset);
      continue;
    }
    for (const auto& m : msgs) {
      if (((wanted >> m.channel) & 1u) == 0) continue;
      if (range && (m.t < range->begin || m.t > range->end)) continue;
      out.push_back(decode_body(m.channel, m.t, m.body));
    }
  }
  return out;
}

Episode ContainerReader::read_episode() const {
  return Episode{episode_id_, read_messages(), meta_};
}

std::filesystem::path ContainerReader::resolve_uri(const std::string& uri) const {
  return resolve_against(base_dir_, uri);
}

Bytes ContainerReader::resolve_media(const MediaRef& ref) const {
  if (ref.kind == MediaKind::External) {
    const auto p = resolve_uri(ref.uri);
    if (!std::filesystem::exists(p)) {
      throw_error(ErrorClass::MediaMissing, "external media not found: " + p.string());
    }
    const auto store = MediaStore::open(p);
    ByteCounter counter;
    return decode_frame(store, ref.frame_index.value_or(0), counter).pixels;
  }

  const auto handle = parse_embedded_handle(ref.uri);
  if (!handle) {
    throw_error(ErrorClass::MediaMissing, "bad embedded handle '" + ref.uri + "'");
  }
  std::uint32_t seen = 0;
  for (const auto& entry : index_) {
    if ((entry.channel_mask & (1u << channel::kEmbeddedMedia)) == 0) continue;
    const auto payload = read_chunk_payload(entry);
    for (const auto& m : parse_messages(payload)) {
      if (m.channel != channel::kEmbeddedMedia) continue;
      if (seen++ == *handle) return Bytes(m.body.begin(), m.body.end());
    }
  }
  throw_error(ErrorClass::MediaMissing, "embedded payload " + ref.uri + " not in container");
}

// ---------------------------------------------------------------------------
// Recovery

Bytes recover_bytes(std::span<const std::uint8_t> data, RecoveryResult* result) {
  enforce(data.size() >= kHeaderBytes && std::equal(std::begin(kMagic), std::end(kMagic), data.begin()),
          ErrorClass::NotAContainer, "bad or truncated container header");
  enforce(ByteReader(data.subspan(4, 2), ErrorClass::NotAContainer).u16() == kContainerVersion,
          ErrorClass::NotAContainer, "unsupported container version");

  RecoveryResult res;
  std::string id;
  std::map<std::string, std::string> meta;
  std::size_t pos = kHeaderBytes;

  auto record_at = [&](std::size_t at, std::uint32_t& len) -> bool {
    if (at + kRecordPrefix > data.size()) return false;
    len = ByteReader(data.subspan(at + 1, 4), ErrorClass::CorruptChunk).u32();
    return at + kRecordPrefix + std::uint64_t{len} + 4 <= data.size();
  };

  std::uint32_t len = 0;
  if (pos < data.size() && data[pos] == kMetadataRecord && record_at(pos, len)) {
    const auto payload = data.subspan(pos + kRecordPrefix, len);
    const auto stored = ByteReader(data.subspan(pos + kRecordPrefix + len, 4), ErrorClass::CorruptChunk).u32();
    if (stored == crc32(payload)) {
      try {
        std::string tmp_id;
        std::map<std::string, std::string> tmp_meta;
        parse_metadata(payload, tmp_id, tmp_meta);
        id = std::move(tmp_id);
        meta = std::move(tmp_meta);
        res.metadata_recovered = true;
      } catch (const Error&) {
      }
    }
    pos += kRecordPrefix + len + 4;
  }

  Bytes out = header_bytes();
  const auto meta_rec = metadata_record(id, meta);
  out.insert(out.end(), meta_rec.begin(), meta_rec.end());

  std::vector<ChunkIndexEntry> index;
  auto stats = empty_stats();
  while (pos < data.size() && data[pos] == kChunkRecord && record_at(pos, len)) {
    const auto payload = data.subspan(pos + kRecordPrefix, len);
    const auto stored = ByteReader(data.subspan(pos + kRecordPrefix + len, 4), ErrorClass::CorruptChunk).u32();
    pos += kRecordPrefix + len + 4;

    bool valid = stored == crc32(payload);
    if (valid) {
      try {
        for (const auto& m : parse_messages(payload)) decode_body(m.channel, m.t, m.body);
      } catch (const Error&) {
        valid = false;
      }
    }
    if (!valid) {
      ++res.dropped_chunks;
      continue;
    }
    const auto entry = account_chunk(payload, out.size(), stats);
    res.recovered_messages += entry.message_count;
    ++res.recovered_chunks;
    index.push_back(entry);
    const auto rec = chunk_record(payload);
    out.insert(out.end(), rec.begin(), rec.end());
  }
  // Anything after this point is a footer, a torn record, or garbage; a torn
  // chunk counts as dropped.
  if (pos < data.size() && data[pos] == kChunkRecord) ++res.dropped_chunks;

  const auto footer = footer_record(index, stats, out.size());
  out.insert(out.end(), footer.begin(), footer.end());
  if (result) *result = res;
  return out;
}

Recovered recover(const std::filesystem::path& in, const std::optional<std::filesystem::path>& out) {
  const auto data = read_file(in);
  RecoveryResult res;
  const auto fixed = recover_bytes(data, &res);
  const auto target = out.value_or(in);
  write_file_atomic(target, fixed);
  return Recovered{ContainerReader::open(target), res};
}

// ---------------------------------------------------------------------------
// Summary

ContainerSummary summarize(const ContainerReader& reader) {
  ContainerSummary s;
  s.channels = reader.stats();
  s.container_bytes = reader.file_size();

  std::set<std::string> uris;
  for (const auto& e : reader.read_messages(TopicSet::of({Topic::Screen}))) {
    const auto& scr = std::get<ScreenEvent>(e);
    if (scr.media.kind == MediaKind::External) uris.insert(scr.media.uri);
  }
  for (const auto& uri : uris) {
    const auto p = reader.resolve_uri(uri);
    if (!std::filesystem::exists(p)) continue;
    const auto store = MediaStore::open(p);
    s.frame_count += store.frame_count();
    s.raw_frame_bytes += std::uint64_t{store.frame_count()} * store.raw_frame_bytes();
    s.external_media_bytes += store.file_size();
  }
  const auto& media = reader.stats()[channel::kEmbeddedMedia];
  s.frame_count += media.count;
  s.raw_frame_bytes += media.bytes - media.count * kMessageHeader;

  if (s.frame_count == 0 || s.raw_frame_bytes == 0) {
    s.compression_ratio = 1.0;
    s.ratio_degenerate = true;
  } else {
    s.compression_ratio = static_cast<double>(s.raw_frame_bytes) /
                          static_cast<double>(s.container_bytes + s.external_media_bytes);
  }
  return s;
}

std::string format_summary(const ContainerSummary& s) {
  std::ostringstream os;
  const auto& chans = standard_channels();
  for (const auto& st : s.channels) {
    os << "channel " << chans[st.channel_id].topic << " count=" << st.count
       << " t_min=" << st.t_min.ns << " t_max=" << st.t_max.ns << " bytes=" << st.bytes << "\n";
  }
  os << "frames=" << s.frame_count << " raw_bytes=" << s.raw_frame_bytes
     << " container_bytes=" << s.container_bytes
     << " external_media_bytes=" << s.external_media_bytes << "\n";
  char ratio[64];
  std::snprintf(ratio, sizeof ratio, "%.3f", s.compression_ratio);
  os << "compression_ratio=" << ratio << (s.ratio_degenerate ? " (degenerate: no frames)" : "")
     << "\n";
  return os.str();
}

void rebase_media_uris(Episode& ep, const std::filesystem::path& from_dir,
                       const std::filesystem::path& to_dir) {
  const auto from = std::filesystem::absolute(from_dir.empty() ? "." : from_dir);
  const auto to = std::filesystem::absolute(to_dir.empty() ? "." : to_dir).lexically_normal();
  for (auto& e : ep.events) {
    auto* s = std::get_if<ScreenEvent>(&e);
    if (s == nullptr || s->media.kind != MediaKind::External) continue;
    const auto abs = resolve_against(from, s->media.uri).lexically_normal();
    auto rel = abs.lexically_relative(to);
    s->media.uri = rel.empty() ? abs.string() : rel.generic_string();
  }
}

}  // namespace deskpipe
