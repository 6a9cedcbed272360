#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "deskpipe/errors.hpp"

namespace deskpipe {

using Bytes = std::vector<std::uint8_t>;

std::uint32_t crc32(std::span<const std::uint8_t> data) noexcept;

// Appends little-endian scalars to a growing buffer.
class ByteWriter {
 public:
  explicit ByteWriter(Bytes& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void i32(std::int32_t v) { put(static_cast<std::uint32_t>(v), 4); }
  void f32(float v);
  void bytes(std::span<const std::uint8_t> data) { out_.insert(out_.end(), data.begin(), data.end()); }
  void str16(std::string_view s);

  std::size_t size() const noexcept { return out_.size(); }

 private:
  void put(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  Bytes& out_;
};

// Bounds-checked little-endian cursor. Running past the end throws `on_short`.
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> data, ErrorClass on_short)
      : data_(data), on_short_(on_short) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  std::int32_t i32() { return static_cast<std::int32_t>(static_cast<std::uint32_t>(get(4))); }
  float f32();
  std::span<const std::uint8_t> bytes(std::size_t n);
  std::string str16();

  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  bool done() const noexcept { return pos_ == data_.size(); }

 private:
  std::uint64_t get(int width);
  void need(std::size_t n);

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  ErrorClass on_short_;
};

// Random-access byte source with an instrumented read counter. Every byte
// handed out through read_at() is counted; this is what the seek-efficiency
// and KB/img accounting measure.
class ByteSource {
 public:
  virtual ~ByteSource() = default;

  virtual std::uint64_t size() const = 0;

  // Reads exactly out.size() bytes; throws IoFailure on a short read.
  void read_at(std::uint64_t offset, std::span<std::uint8_t> out) const {
    do_read_at(offset, out);
    bytes_read_ += out.size();
  }

  Bytes read_at(std::uint64_t offset, std::size_t n) const {
    Bytes buf(n);
    read_at(offset, buf);
    return buf;
  }

  std::uint64_t bytes_read() const noexcept { return bytes_read_; }
  void reset_bytes_read() noexcept { bytes_read_ = 0; }

 protected:
  virtual void do_read_at(std::uint64_t offset, std::span<std::uint8_t> out) const = 0;

 private:
  mutable std::uint64_t bytes_read_ = 0;
};

class FileSource final : public ByteSource {
 public:
  explicit FileSource(const std::filesystem::path& path);

  std::uint64_t size() const override { return size_; }
  const std::filesystem::path& path() const noexcept { return path_; }

 protected:
  void do_read_at(std::uint64_t offset, std::span<std::uint8_t> out) const override;

 private:
  std::filesystem::path path_;
  mutable std::ifstream in_;
  std::uint64_t size_ = 0;
};

class MemorySource final : public ByteSource {
 public:
  explicit MemorySource(Bytes data)
      : data_(std::make_shared<const Bytes>(std::move(data))) {}
  explicit MemorySource(std::shared_ptr<const Bytes> data) : data_(std::move(data)) {}

  std::uint64_t size() const override { return data_->size(); }

 protected:
  void do_read_at(std::uint64_t offset, std::span<std::uint8_t> out) const override;

 private:
  std::shared_ptr<const Bytes> data_;
};

Bytes read_file(const std::filesystem::path& path);

// Writes to a sibling temporary and renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> data);

}  // namespace deskpipe
