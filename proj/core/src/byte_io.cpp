#include "deskpipe/byte_io.hpp"

#include <bit>
#include <cstring>

#include <zlib.h>

namespace deskpipe {

std::uint32_t crc32(std::span<const std::uint8_t> data) noexcept {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in bounded pieces.
  constexpr std::size_t kStep = 1u << 30;
  for (std::size_t off = 0; off < data.size(); off += kStep) {
    const auto n = static_cast<uInt>(std::min(kStep, data.size() - off));
    crc = ::crc32(crc, data.data() + off, n);
  }
  return static_cast<std::uint32_t>(crc);
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::str16(std::string_view s) {
  enforce(s.size() <= 0xFFFF, ErrorClass::InvalidArgument, "string longer than 65535 bytes");
  u16(static_cast<std::uint16_t>(s.size()));
  out_.insert(out_.end(), s.begin(), s.end());
}

void ByteReader::need(std::size_t n) {
  if (n > remaining()) {
    throw_error(on_short_, "unexpected end of data at byte " + std::to_string(pos_) +
                               " (need " + std::to_string(n) + ", have " +
                               std::to_string(remaining()) + ")");
  }
}

std::uint64_t ByteReader::get(int width) {
  need(static_cast<std::size_t>(width));
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) v |= std::uint64_t{data_[pos_ + i]} << (8 * i);
  pos_ += static_cast<std::size_t>(width);
  return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

std::span<const std::uint8_t> ByteReader::bytes(std::size_t n) {
  need(n);
  auto out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::string ByteReader::str16() {
  const auto n = u16();
  auto raw = bytes(n);
  return {raw.begin(), raw.end()};
}

FileSource::FileSource(const std::filesystem::path& path)
    : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw_error(ErrorClass::IoFailure, "cannot open " + path.string());
  in_.seekg(0, std::ios::end);
  size_ = static_cast<std::uint64_t>(in_.tellg());
}

void FileSource::do_read_at(std::uint64_t offset, std::span<std::uint8_t> out) const {
  if (offset + out.size() > size_) {
    throw_error(ErrorClass::IoFailure, "read past end of " + path_.string());
  }
  in_.clear();
  in_.seekg(static_cast<std::streamoff>(offset));
  in_.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (static_cast<std::size_t>(in_.gcount()) != out.size()) {
    throw_error(ErrorClass::IoFailure, "short read from " + path_.string());
  }
}

void MemorySource::do_read_at(std::uint64_t offset, std::span<std::uint8_t> out) const {
  if (offset > data_->size() || out.size() > data_->size() - offset) {
    throw_error(ErrorClass::IoFailure, "read past end of memory source");
  }
  std::memcpy(out.data(), data_->data() + offset, out.size());
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_error(ErrorClass::IoFailure, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto n = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  Bytes data(n);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw_error(ErrorClass::IoFailure, "short read from " + path.string());
  }
  return data;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw_error(ErrorClass::IoFailure, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) throw_error(ErrorClass::IoFailure, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw_error(ErrorClass::IoFailure, "rename to " + path.string() + ": " + ec.message());
}

}  // namespace deskpipe
