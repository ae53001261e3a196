#pragma once

// Little-endian byte serialization, CRC32 framing and whole-file I/O.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <zlib.h>

#include "mocap/error.hpp"

namespace mocap::io {

inline std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for very large buffers.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
    crc = ::crc32(crc, bytes.data() + off, chunk);
    off += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

class ByteWriter {
 public:
  void put_bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void put_bytes(std::span<const std::uint8_t> s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { put_le(v); }
  void u32(std::uint32_t v) { put_le(v); }
  void u64(std::uint64_t v) { put_le(v); }
  void f32(float v) { put_le(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }

  /// Appends CRC32 of everything written so far.
  void seal_crc32() { u32(crc32(buf_)); }

  const std::vector<std::uint8_t>& bytes() const& { return buf_; }
  std::vector<std::uint8_t> take() && { return std::move(buf_); }

 private:
  template <typename U>
  void put_le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  std::vector<std::uint8_t> buf_;
};

/// Bounds-checked little-endian reader. Running off the end raises `eof_code`.
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, errc eof_code) : bytes_(bytes), eof_code_(eof_code) {}

  std::span<const std::uint8_t> take(std::size_t n) {
    require(n <= remaining(), eof_code_,
            "unexpected end of data at offset " + std::to_string(pos_) + " (need " + std::to_string(n) +
                " bytes, have " + std::to_string(remaining()) + ")");
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16() { return get_le<std::uint16_t>(); }
  std::uint32_t u32() { return get_le<std::uint32_t>(); }
  std::uint64_t u64() { return get_le<std::uint64_t>(); }
  float f32() { return std::bit_cast<float>(get_le<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(get_le<std::uint64_t>()); }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  template <typename U>
  U get_le() {
    auto s = take(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(s[i]) << (8 * i));
    return v;
  }

  std::span<const std::uint8_t> bytes_;
  errc eof_code_;
  std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), errc::io_failure, "cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  require(!in.bad(), errc::io_failure, "read error on '" + path.string() + "'");
  return bytes;
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), errc::io_failure, "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  require(static_cast<bool>(out), errc::io_failure, "write error on '" + path.string() + "'");
}

}  // namespace mocap::io
