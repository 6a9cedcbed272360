#include "deskpipe/codec.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <random>

#include "deskpipe/errors.hpp"

namespace deskpipe {

namespace {

constexpr std::uint8_t kMagic[4] = {'G', 'O', 'P', 'S'};
constexpr std::size_t kFixedHeaderBytes = 4 + 2 + 2 + 4 + 4 + (1 + 4 + 8 + 4 + 4);
constexpr std::size_t kRecordHeaderBytes = 1 + 4;
constexpr std::size_t kMaxLiteral = 128;
constexpr std::size_t kMinRun = 3;
constexpr std::size_t kMaxRun = 130;

// Uniform integer in [lo, hi] without relying on the library's
// implementation-defined distribution, so layouts match across toolchains.
std::uint32_t uniform_in(std::mt19937_64& rng, std::uint32_t lo, std::uint32_t hi) {
  const std::uint64_t span = std::uint64_t{hi} - lo + 1;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % span;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return lo + static_cast<std::uint32_t>(r % span);
}

std::uint64_t parse_u64(std::string_view s, std::string_view what) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (!(ec == std::errc{} && ptr == s.data() + s.size())) {
    throw_error(ErrorClass::InvalidArgument, "bad " + std::string(what) + " '" + std::string(s) +
                                             "'");
  }
  return v;
}

}  // namespace

GopConfig GopConfig::fixed(std::uint32_t interval) {
  GopConfig cfg;
  cfg.mode = Mode::Fixed;
  cfg.interval = interval;
  cfg.validate();
  return cfg;
}

GopConfig GopConfig::variable(std::uint64_t seed, std::uint32_t min_frames,
                              std::uint32_t max_frames) {
  GopConfig cfg;
  cfg.mode = Mode::Variable;
  cfg.seed = seed;
  cfg.min_frames = min_frames;
  cfg.max_frames = max_frames;
  cfg.validate();
  return cfg;
}

void GopConfig::validate() const {
  if (mode == Mode::Fixed) {
    enforce(interval >= 1, ErrorClass::InvalidArgument, "fixed GOP interval must be >= 1");
  } else {
    enforce(min_frames >= 1 && min_frames <= max_frames, ErrorClass::InvalidArgument,
            "variable GOP bounds must satisfy 1 <= min <= max");
  }
}

GopConfig GopConfig::parse(std::string_view text) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto colon = text.find(':', start);
    parts.push_back(text.substr(start, colon - start));
    if (colon == std::string_view::npos) break;
    start = colon + 1;
  }
  if (parts[0] == "fixed") {
    enforce(parts.size() <= 2, ErrorClass::InvalidArgument, "expected fixed[:interval]");
    return fixed(parts.size() == 2 ? static_cast<std::uint32_t>(parse_u64(parts[1], "interval"))
                                   : 30);
  }
  if (parts[0] == "variable") {
    enforce(parts.size() == 2 || parts.size() == 4, ErrorClass::InvalidArgument,
            "expected variable:seed[:min:max]");
    const auto seed = parse_u64(parts[1], "seed");
    if (parts.size() == 4) {
      return variable(seed, static_cast<std::uint32_t>(parse_u64(parts[2], "min")),
                      static_cast<std::uint32_t>(parse_u64(parts[3], "max")));
    }
    return variable(seed);
  }
  throw_error(ErrorClass::InvalidArgument, "unknown GOP mode '" + std::string(text) + "'");
}

std::string GopConfig::describe() const {
  if (mode == Mode::Fixed) return "fixed:" + std::to_string(interval);
  return "variable:" + std::to_string(seed) + ":" + std::to_string(min_frames) + ":" +
         std::to_string(max_frames);
}

std::vector<std::uint32_t> gop_layout(const GopConfig& cfg, std::uint32_t frame_count) {
  cfg.validate();
  std::vector<std::uint32_t> keys;
  if (cfg.mode == GopConfig::Mode::Fixed) {
    for (std::uint64_t i = 0; i < frame_count; i += cfg.interval) {
      keys.push_back(static_cast<std::uint32_t>(i));
    }
    return keys;
  }
  std::mt19937_64 rng(cfg.seed);
  for (std::uint64_t i = 0; i < frame_count; i += uniform_in(rng, cfg.min_frames, cfg.max_frames)) {
    keys.push_back(static_cast<std::uint32_t>(i));
  }
  return keys;
}

Bytes rle_encode(std::span<const std::uint8_t> data) {
  Bytes out;
  out.reserve(data.size() / 8 + 16);
  std::size_t literal_start = 0;
  std::size_t i = 0;

  auto flush_literals = [&](std::size_t end) {
    while (literal_start < end) {
      const std::size_t n = std::min(kMaxLiteral, end - literal_start);
      out.push_back(static_cast<std::uint8_t>(n - 1));
      out.insert(out.end(), data.begin() + static_cast<std::ptrdiff_t>(literal_start),
                 data.begin() + static_cast<std::ptrdiff_t>(literal_start + n));
      literal_start += n;
    }
  };

  while (i < data.size()) {
    std::size_t run = 1;
    while (i + run < data.size() && run < kMaxRun && data[i + run] == data[i]) ++run;
    if (run >= kMinRun) {
      flush_literals(i);
      out.push_back(static_cast<std::uint8_t>(run + 125));
      out.push_back(data[i]);
      i += run;
      literal_start = i;
    } else {
      i += run;
    }
  }
  flush_literals(data.size());
  return out;
}

Bytes rle_decode(std::span<const std::uint8_t> encoded, std::size_t expected_size) {
  Bytes out;
  out.reserve(expected_size);
  std::size_t i = 0;
  while (i < encoded.size()) {
    const std::uint8_t c = encoded[i++];
    if (c < 128) {
      const std::size_t n = std::size_t{c} + 1;
      enforce(i + n <= encoded.size(), ErrorClass::CorruptFrame, "RLE literal underflow");
      enforce(out.size() + n <= expected_size, ErrorClass::CorruptFrame, "RLE output overflow");
      out.insert(out.end(), encoded.begin() + static_cast<std::ptrdiff_t>(i),
                 encoded.begin() + static_cast<std::ptrdiff_t>(i + n));
      i += n;
    } else {
      const std::size_t n = std::size_t{c} - 125;
      enforce(i < encoded.size(), ErrorClass::CorruptFrame, "RLE run underflow");
      enforce(out.size() + n <= expected_size, ErrorClass::CorruptFrame, "RLE output overflow");
      out.insert(out.end(), n, encoded[i++]);
    }
  }
  if (out.size() != expected_size) {
    throw_error(ErrorClass::CorruptFrame, "RLE output short: " + std::to_string(out.size()) + " of " +
                                          std::to_string(expected_size) + " bytes");
  }
  return out;
}

Bytes encode_media(std::span<const Frame> frames, const GopConfig& cfg, float fps) {
  cfg.validate();
  const std::uint16_t width = frames.empty() ? 0 : frames.front().width;
  const std::uint16_t height = frames.empty() ? 0 : frames.front().height;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    if (f.width != width || f.height != height || f.pixels.size() != std::size_t{width} * height) {
      throw_error(ErrorClass::DimensionMismatch, "frame " + std::to_string(i) + " is " +
                                                 std::to_string(f.width) + "x" +
                                                 std::to_string(f.height) + ", expected " +
                                                 std::to_string(width) + "x" +
                                                 std::to_string(height));
    }
  }
  enforce(frames.size() <= std::numeric_limits<std::uint32_t>::max(),
          ErrorClass::InvalidArgument, "too many frames");
  const auto count = static_cast<std::uint32_t>(frames.size());
  const auto keys = gop_layout(cfg, count);

  Bytes out;
  ByteWriter w(out);
  w.bytes(kMagic);
  w.u16(width);
  w.u16(height);
  w.f32(fps);
  w.u32(count);
  w.u8(static_cast<std::uint8_t>(cfg.mode));
  w.u32(cfg.interval);
  w.u64(cfg.seed);
  w.u32(cfg.min_frames);
  w.u32(cfg.max_frames);
  const std::size_t table_at = out.size();
  out.resize(out.size() + 8 * std::size_t{count});

  std::size_t next_key = 0;
  Bytes delta(std::size_t{width} * height);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint64_t offset = out.size();
    for (int b = 0; b < 8; ++b) out[table_at + 8 * i + b] = static_cast<std::uint8_t>(offset >> (8 * b));

    const bool key = next_key < keys.size() && keys[next_key] == i;
    if (key) ++next_key;
    Bytes payload;
    if (key) {
      payload = rle_encode(frames[i].pixels);
    } else {
      const auto& cur = frames[i].pixels;
      const auto& prev = frames[i - 1].pixels;
      for (std::size_t p = 0; p < cur.size(); ++p) delta[p] = cur[p] ^ prev[p];
      payload = rle_encode(delta);
    }
    w.u8(static_cast<std::uint8_t>(key ? FrameKind::I : FrameKind::P));
    w.u32(static_cast<std::uint32_t>(payload.size()));
    w.bytes(payload);
  }
  return out;
}

void write_media(const std::filesystem::path& path, std::span<const Frame> frames,
                 const GopConfig& cfg, float fps) {
  const auto bytes = encode_media(frames, cfg, fps);
  write_file_atomic(path, bytes);
}

MediaStore MediaStore::open(const std::filesystem::path& path, ByteCounter* counter) {
  if (!std::filesystem::exists(path)) {
    throw_error(ErrorClass::MediaMissing, "media store not found: " + path.string());
  }
  return MediaStore(std::make_shared<FileSource>(path), counter);
}

MediaStore MediaStore::from_bytes(Bytes data, ByteCounter* counter) {
  return MediaStore(std::make_shared<MemorySource>(std::move(data)), counter);
}

MediaStore::MediaStore(std::shared_ptr<ByteSource> source, ByteCounter* counter)
    : source_(std::move(source)) {
  enforce(source_->size() >= kFixedHeaderBytes, ErrorClass::CorruptFrame,
          "media store shorter than its header");
  const auto fixed = source_->read_at(0, kFixedHeaderBytes);
  ByteReader r(fixed, ErrorClass::CorruptFrame);
  const auto magic = r.bytes(4);
  enforce(std::equal(magic.begin(), magic.end(), std::begin(kMagic)), ErrorClass::CorruptFrame,
          "bad media store magic");
  header_.width = r.u16();
  header_.height = r.u16();
  header_.fps = r.f32();
  header_.frame_count = r.u32();
  header_.gop.mode = static_cast<GopConfig::Mode>(r.u8());
  header_.gop.interval = r.u32();
  header_.gop.seed = r.u64();
  header_.gop.min_frames = r.u32();
  header_.gop.max_frames = r.u32();
  enforce(header_.gop.mode == GopConfig::Mode::Fixed || header_.gop.mode == GopConfig::Mode::Variable,
          ErrorClass::CorruptFrame, "bad GOP descriptor");

  const std::uint64_t table_bytes = 8 * std::uint64_t{header_.frame_count};
  enforce(source_->size() >= kFixedHeaderBytes + table_bytes, ErrorClass::CorruptFrame,
          "media store offset table truncated");
  const auto table = source_->read_at(kFixedHeaderBytes, table_bytes);
  ByteReader t(table, ErrorClass::CorruptFrame);
  header_.frame_offsets.resize(header_.frame_count);
  std::uint64_t prev = kFixedHeaderBytes + table_bytes;
  for (std::uint32_t i = 0; i < header_.frame_count; ++i) {
    const auto off = t.u64();
    if (!(off >= prev && (i == 0 || off > prev) && off + kRecordHeaderBytes <= source_->size())) {
      throw_error(ErrorClass::CorruptFrame, "bad offset for frame " + std::to_string(i));
    }
    header_.frame_offsets[i] = prev = off;
  }
  header_bytes_ = kFixedHeaderBytes + table_bytes;
  keyframes_ = gop_layout(header_.gop, header_.frame_count);
  if (counter) counter->bytes_read += header_bytes_;
}

std::uint32_t MediaStore::keyframe_before(std::uint32_t index) const {
  if (index >= header_.frame_count) {
    throw_error(ErrorClass::FrameOutOfRange, "frame " + std::to_string(index) +
                                                 " >= frame count " +
                                                 std::to_string(header_.frame_count));
  }
  auto it = std::upper_bound(keyframes_.begin(), keyframes_.end(), index);
  return *std::prev(it);
}

bool MediaStore::is_keyframe(std::uint32_t index) const {
  return std::binary_search(keyframes_.begin(), keyframes_.end(), index);
}

EncodedFrame MediaStore::read_record(std::uint32_t index, ByteCounter& counter) const {
  if (index >= header_.frame_count) {
    throw_error(ErrorClass::FrameOutOfRange, "frame " + std::to_string(index) +
                                                 " >= frame count " +
                                                 std::to_string(header_.frame_count));
  }
  const std::uint64_t begin = header_.frame_offsets[index];
  const std::uint64_t end =
      index + 1 < header_.frame_count ? header_.frame_offsets[index + 1] : source_->size();
  const auto raw = source_->read_at(begin, end - begin);
  counter.bytes_read += raw.size();

  ByteReader r(raw, ErrorClass::CorruptFrame);
  EncodedFrame rec;
  rec.kind = static_cast<FrameKind>(r.u8());
  const auto len = r.u32();
  const auto payload = r.bytes(len);
  enforce(r.done(), ErrorClass::CorruptFrame, "trailing bytes after frame record");
  if (rec.kind != (is_keyframe(index) ? FrameKind::I : FrameKind::P)) {
    throw_error(ErrorClass::CorruptFrame,
                "frame " + std::to_string(index) + " kind disagrees with GOP layout");
  }
  rec.payload.assign(payload.begin(), payload.end());
  return rec;
}

Frame apply_record(const MediaStore& store, const EncodedFrame& rec, const Frame* prev) {
  const auto& h = store.header();
  Frame out;
  out.width = h.width;
  out.height = h.height;
  out.pixels = rle_decode(rec.payload, store.raw_frame_bytes());
  if (rec.kind == FrameKind::P) {
    enforce(prev != nullptr, ErrorClass::CorruptFrame, "P-frame without a reference frame");
    // Raw pointers: byte stores through the vector would otherwise block vectorization.
    std::uint8_t* dst = out.pixels.data();
    const std::uint8_t* ref = prev->pixels.data();
    const std::size_t n = out.pixels.size();
    for (std::size_t i = 0; i < n; ++i) dst[i] ^= ref[i];
  }
  return out;
}

Frame decode_frame(const MediaStore& store, std::uint32_t index, ByteCounter& counter) {
  const auto key = store.keyframe_before(index);
  ++counter.seeks;
  Frame cur;
  for (std::uint32_t i = key; i <= index; ++i) {
    const auto rec = store.read_record(i, counter);
    cur = apply_record(store, rec, i == key ? nullptr : &cur);
    ++counter.frames_decoded;
  }
  return cur;
}

SequentialDecoder::SequentialDecoder(const MediaStore& store, std::uint32_t start,
                                     ByteCounter& counter)
    : store_(&store), counter_(&counter), next_index_(start) {
  const auto key = store.keyframe_before(start);
  ++counter.seeks;
  for (std::uint32_t i = key; i < start; ++i) {
    const auto rec = store.read_record(i, counter);
    current_ = apply_record(store, rec, i == key ? nullptr : &current_);
    ++counter.frames_decoded;
  }
  has_current_ = key < start;
}

Frame SequentialDecoder::next() {
  enforce(!at_end(), ErrorClass::EndOfStream, "sequential decoder reached end of stream");
  const auto rec = store_->read_record(next_index_, *counter_);
  current_ = apply_record(*store_, rec, has_current_ ? &current_ : nullptr);
  has_current_ = true;
  ++counter_->frames_decoded;
  ++next_index_;
  return current_;
}

}  // namespace deskpipe
