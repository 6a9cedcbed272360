#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "deskpipe/byte_io.hpp"

namespace deskpipe {

// Keyframe placement policy. Fixed mode puts an I-frame every `interval`
// frames; variable mode draws each GOP length uniformly from
// [min_frames, max_frames] with a seeded generator.
struct GopConfig {
  enum class Mode : std::uint8_t { Fixed = 0, Variable = 1 };

  Mode mode = Mode::Fixed;
  std::uint32_t interval = 30;
  std::uint64_t seed = 0;
  std::uint32_t min_frames = 27;
  std::uint32_t max_frames = 250;

  static GopConfig fixed(std::uint32_t interval = 30);
  static GopConfig variable(std::uint64_t seed, std::uint32_t min_frames = 27,
                            std::uint32_t max_frames = 250);

  // "fixed:30", "variable:7" or "variable:7:27:250".
  static GopConfig parse(std::string_view text);
  std::string describe() const;
  void validate() const;

  friend bool operator==(const GopConfig&, const GopConfig&) = default;
};

std::vector<std::uint32_t> gop_layout(const GopConfig& cfg, std::uint32_t frame_count);

// 8-bit grayscale raster.
struct Frame {
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  Bytes pixels;

  Frame() = default;
  Frame(std::uint16_t w, std::uint16_t h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(std::size_t{w} * h, fill) {}

  std::uint8_t& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
  std::uint8_t at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }

  friend bool operator==(const Frame&, const Frame&) = default;
};

enum class FrameKind : std::uint8_t { I = 0, P = 1 };

struct MediaHeader {
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  float fps = 20.0F;
  std::uint32_t frame_count = 0;
  GopConfig gop;
  std::vector<std::uint64_t> frame_offsets;
};

struct ByteCounter {
  std::uint64_t bytes_read = 0;
  std::uint64_t frames_decoded = 0;
  std::uint64_t seeks = 0;

  ByteCounter& operator+=(const ByteCounter& o) {
    bytes_read += o.bytes_read;
    frames_decoded += o.frames_decoded;
    seeks += o.seeks;
    return *this;
  }
  friend bool operator==(const ByteCounter&, const ByteCounter&) = default;
};

// PackBits-style run-length coding. A control byte c < 128 introduces c + 1
// literals; c >= 128 repeats the next byte c - 125 times (3..130).
Bytes rle_encode(std::span<const std::uint8_t> data);
// Throws CorruptFrame when the stream ends early or overruns `expected_size`.
Bytes rle_decode(std::span<const std::uint8_t> encoded, std::size_t expected_size);

// Lossless toy codec: I-frames are RLE of the raster, P-frames RLE of the
// bytewise XOR against the previous frame. Throws DimensionMismatch.
Bytes encode_media(std::span<const Frame> frames, const GopConfig& cfg, float fps = 20.0F);
void write_media(const std::filesystem::path& path, std::span<const Frame> frames,
                 const GopConfig& cfg, float fps = 20.0F);

struct EncodedFrame {
  FrameKind kind = FrameKind::I;
  Bytes payload;
};

// Read-only view of a media store. Header and offset table are read once at
// open time and charged to the optional counter.
class MediaStore {
 public:
  static MediaStore open(const std::filesystem::path& path, ByteCounter* counter = nullptr);
  static MediaStore from_bytes(Bytes data, ByteCounter* counter = nullptr);

  explicit MediaStore(std::shared_ptr<ByteSource> source, ByteCounter* counter = nullptr);

  const MediaHeader& header() const noexcept { return header_; }
  std::uint32_t frame_count() const noexcept { return header_.frame_count; }
  std::size_t raw_frame_bytes() const noexcept {
    return std::size_t{header_.width} * header_.height;
  }
  const std::vector<std::uint32_t>& keyframes() const noexcept { return keyframes_; }
  std::uint32_t keyframe_before(std::uint32_t index) const;
  bool is_keyframe(std::uint32_t index) const;
  std::uint64_t header_bytes() const noexcept { return header_bytes_; }
  std::uint64_t file_size() const { return source_->size(); }

  // Reads one frame record (kind, length, payload); charges its bytes.
  EncodedFrame read_record(std::uint32_t index, ByteCounter& counter) const;

 private:
  std::shared_ptr<ByteSource> source_;
  MediaHeader header_;
  std::vector<std::uint32_t> keyframes_;
  std::uint64_t header_bytes_ = 0;
};

// Applies one decoded record on top of `prev` (ignored for I-frames).
Frame apply_record(const MediaStore& store, const EncodedFrame& rec, const Frame* prev);

// Seeks to the keyframe at or before `index` and decodes forward.
// Throws FrameOutOfRange.
Frame decode_frame(const MediaStore& store, std::uint32_t index, ByteCounter& counter);

// Forward decoder: each next() reads exactly one frame record. A non-keyframe
// start decodes the preceding GOP prefix during construction.
class SequentialDecoder {
 public:
  SequentialDecoder(const MediaStore& store, std::uint32_t start, ByteCounter& counter);

  // Throws EndOfStream past the last frame.
  Frame next();
  std::uint32_t position() const noexcept { return next_index_; }
  bool at_end() const noexcept { return next_index_ >= store_->frame_count(); }

 private:
  const MediaStore* store_;
  ByteCounter* counter_;
  std::uint32_t next_index_;
  Frame current_;
  bool has_current_ = false;
};

inline SequentialDecoder open_sequential(const MediaStore& store, std::uint32_t start,
                                         ByteCounter& counter) {
  return SequentialDecoder(store, start, counter);
}

}  // namespace deskpipe
