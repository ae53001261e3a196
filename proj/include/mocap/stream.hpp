#pragma once

// Entropy coding of sparse coefficient vectors and the MCCS stream container.
//
// Layout (little-endian):
//   "MCCS" | version u8 | codec u8 (0 frame, 1 clip) | J u16 | F u32 | L u16 |
//   b u8 | segment count u32 | max_abs f32[3 * segments] (dimension-major) |
//   value-table count u16 + lengths u8[] | gap-table count u16 + lengths u8[] |
//   payload bit length u64 | payload (zero-padded to a byte) | CRC32
//
// Payload, per coefficient vector of length n: nonzero count in ceil(log2(n+1))
// bits, then `count` Huffman-coded location gaps (first location, then
// difference - 1), then `count` Huffman-coded values.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mocap/byte_io.hpp"
#include "mocap/error.hpp"
#include "mocap/huffman.hpp"
#include "mocap/quantizer.hpp"

namespace mocap {

enum class CodecId : std::uint8_t { frame = 0, clip = 1 };

inline const char* to_string(CodecId c) { return c == CodecId::frame ? "frame" : "clip"; }

/// Bits of the fixed-length nonzero-count field for vectors of length n.
inline int count_field_bits(int n) {
  require(n >= 1, errc::invalid_argument, "vector length must be >= 1");
  return std::bit_width(static_cast<unsigned>(n));
}

/// Nonzero quantized values map to symbols 1,-1,2,-2,... -> 0,1,2,3,...
inline std::uint32_t value_symbol(std::int32_t q) {
  require(q != 0, errc::invalid_argument, "zero is never coded as a value");
  return q > 0 ? static_cast<std::uint32_t>(2 * (q - 1)) : static_cast<std::uint32_t>(2 * (-q) - 1);
}

inline std::int32_t symbol_value(std::uint32_t s) {
  return (s & 1u) ? -static_cast<std::int32_t>((s + 1) / 2) : static_cast<std::int32_t>(s / 2 + 1);
}

inline std::size_t value_alphabet_size(int bits) { return (std::size_t{1} << bits) - 2; }

/// Symbol histograms over a set of codes.
struct SymbolCounts {
  std::vector<std::uint64_t> values;
  std::vector<std::uint64_t> gaps;

  SymbolCounts(int bits, int n) : values(value_alphabet_size(bits), 0), gaps(static_cast<std::size_t>(n), 0) {}

  void add(const SparseVectorCode& code) {
    for (std::size_t k = 0; k < code.count(); ++k) {
      const auto gap = k == 0 ? code.locations[0] : code.locations[k] - code.locations[k - 1] - 1;
      require(gap < gaps.size(), errc::invalid_argument, "location out of range for vector length");
      ++gaps[gap];
      const auto s = value_symbol(code.values[k]);
      require(s < values.size(), errc::invalid_argument, "value outside the signed b-bit alphabet");
      ++values[s];
    }
  }
};

namespace detail {

inline std::vector<std::uint8_t> trimmed_lengths(const std::vector<std::uint64_t>& freqs) {
  std::size_t used = freqs.size();
  while (used > 0 && freqs[used - 1] == 0) --used;
  if (used == 0) return {};
  return huffman_code_lengths(std::span(freqs.data(), used));
}

}  // namespace detail

/// The value and location-gap codes of one stream.
struct EntropyTables {
  CanonicalCode values;
  CanonicalCode gaps;

  static EntropyTables from_counts(const SymbolCounts& counts) {
    return {CanonicalCode(detail::trimmed_lengths(counts.values)), CanonicalCode(detail::trimmed_lengths(counts.gaps))};
  }

  static EntropyTables from_codes(std::span<const SparseVectorCode> codes, int bits, int n) {
    SymbolCounts counts(bits, n);
    for (const auto& c : codes) counts.add(c);
    return from_counts(counts);
  }
};

inline void encode_vector(BitWriter& out, const SparseVectorCode& code, int n, const EntropyTables& tables) {
  require(code.locations.size() == code.values.size(), errc::invalid_argument, "code has mismatched fields");
  require(code.count() <= static_cast<std::size_t>(n), errc::invalid_argument, "more nonzeros than entries");
  out.write(code.count(), count_field_bits(n));
  for (std::size_t k = 0; k < code.count(); ++k) {
    require(code.locations[k] < static_cast<std::uint32_t>(n) && (k == 0 || code.locations[k] > code.locations[k - 1]),
            errc::invalid_argument, "locations must be strictly increasing and < n");
    const auto gap = k == 0 ? code.locations[0] : code.locations[k] - code.locations[k - 1] - 1;
    tables.gaps.encode(out, gap);
  }
  for (std::size_t k = 0; k < code.count(); ++k) tables.values.encode(out, value_symbol(code.values[k]));
}

inline SparseVectorCode decode_vector(BitReader& in, int n, const EntropyTables& tables) {
  SparseVectorCode code;
  const auto count = in.read(count_field_bits(n));
  require(count <= static_cast<std::uint64_t>(n), errc::corrupt_stream, "nonzero count exceeds vector length");
  code.locations.reserve(count);
  code.values.reserve(count);
  std::uint64_t loc = 0;
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto gap = tables.gaps.decode(in);
    loc = k == 0 ? gap : loc + gap + 1;
    require(loc < static_cast<std::uint64_t>(n), errc::corrupt_stream, "decoded location out of range");
    code.locations.push_back(static_cast<std::uint32_t>(loc));
  }
  for (std::uint64_t k = 0; k < count; ++k) code.values.push_back(symbol_value(tables.values.decode(in)));
  return code;
}

struct Payload {
  std::vector<std::uint8_t> bytes;
  std::uint64_t bit_length = 0;
};

inline Payload encode_payload(std::span<const SparseVectorCode> codes, int n, const EntropyTables& tables) {
  BitWriter w;
  for (const auto& c : codes) encode_vector(w, c, n, tables);
  Payload p;
  p.bit_length = w.bit_length();
  p.bytes = std::move(w).take();
  return p;
}

inline std::vector<SparseVectorCode> decode_payload(const Payload& payload, std::size_t vectors, int n,
                                                    const EntropyTables& tables) {
  BitReader r(payload.bytes, payload.bit_length);
  std::vector<SparseVectorCode> out;
  out.reserve(vectors);
  for (std::size_t i = 0; i < vectors; ++i) out.push_back(decode_vector(r, n, tables));
  require(r.remaining() == 0, errc::corrupt_stream, "trailing bits after the last coded vector");
  return out;
}

inline constexpr std::string_view kStreamMagic = "MCCS";
inline constexpr std::uint8_t kStreamVersion = 1;

struct CompressedStream {
  CodecId codec = CodecId::frame;
  std::uint16_t joints = 0;
  std::uint32_t frames = 0;
  std::uint16_t clip_length = 0;
  std::uint8_t bits = 0;
  std::uint32_t segments = 0;
  std::vector<float> max_abs;  // [dimension * segments + segment]
  std::vector<std::uint8_t> value_lengths;
  std::vector<std::uint8_t> gap_lengths;
  Payload payload;

  float scale(int dim, std::size_t segment) const {
    return max_abs.at(static_cast<std::size_t>(dim) * segments + segment);
  }

  EntropyTables tables() const { return {CanonicalCode(value_lengths), CanonicalCode(gap_lengths)}; }

  std::vector<std::uint8_t> serialize() const {
    require(max_abs.size() == 3u * segments, errc::invalid_argument, "max_abs array does not match segment count");
    require(value_lengths.size() <= 0xFFFF && gap_lengths.size() <= 0xFFFF, errc::invalid_argument,
            "code table too large for the header");
    require(payload.bytes.size() == (payload.bit_length + 7) / 8, errc::invalid_argument,
            "payload size does not match its bit length");
    io::ByteWriter w;
    w.put_bytes(kStreamMagic);
    w.u8(kStreamVersion);
    w.u8(static_cast<std::uint8_t>(codec));
    w.u16(joints);
    w.u32(frames);
    w.u16(clip_length);
    w.u8(bits);
    w.u32(segments);
    for (float m : max_abs) w.f32(m);
    w.u16(static_cast<std::uint16_t>(value_lengths.size()));
    w.put_bytes(value_lengths);
    w.u16(static_cast<std::uint16_t>(gap_lengths.size()));
    w.put_bytes(gap_lengths);
    w.u64(payload.bit_length);
    w.put_bytes(payload.bytes);
    w.seal_crc32();
    return std::move(w).take();
  }

  /// Total serialized size in bytes, header and CRC included.
  std::size_t byte_size() const {
    return 4 + 1 + 1 + 2 + 4 + 2 + 1 + 4 + 4 * max_abs.size() + 2 + value_lengths.size() + 2 + gap_lengths.size() +
           8 + payload.bytes.size() + 4;
  }

  static CompressedStream parse(std::span<const std::uint8_t> bytes) {
    require(bytes.size() >= 4 && std::equal(kStreamMagic.begin(), kStreamMagic.end(), bytes.begin()),
            errc::format_mismatch, "not an MCCS stream (bad magic)");
    require(bytes.size() >= 8, errc::truncated_stream, "stream too short");
    const auto body = bytes.first(bytes.size() - 4);
    io::ByteReader tail(bytes.last(4), errc::truncated_stream);
    require(tail.u32() == io::crc32(body), errc::corrupt_stream, "stream CRC mismatch (corrupt or truncated)");

    io::ByteReader r(body, errc::truncated_stream);
    r.take(4);
    CompressedStream s;
    const auto version = r.u8();
    require(version == kStreamVersion, errc::format_mismatch, "unsupported stream version " + std::to_string(version));
    const auto codec = r.u8();
    require(codec <= 1, errc::corrupt_stream, "unknown codec id " + std::to_string(codec));
    s.codec = static_cast<CodecId>(codec);
    s.joints = r.u16();
    s.frames = r.u32();
    s.clip_length = r.u16();
    s.bits = r.u8();
    require(s.joints > 0 && s.frames > 0, errc::corrupt_stream, "stream declares an empty sequence");
    require(s.bits >= 2 && s.bits <= 16, errc::corrupt_stream, "quantizer bits out of range");
    require((s.codec == CodecId::frame) == (s.clip_length == 0), errc::corrupt_stream, "clip length/codec mismatch");
    s.segments = r.u32();
    require(std::uint64_t{s.segments} * 12u <= r.remaining(), errc::truncated_stream, "segment table truncated");
    s.max_abs.resize(3u * std::size_t{s.segments});
    for (auto& m : s.max_abs) {
      m = r.f32();
      require(std::isfinite(m) && m >= 0.0f, errc::corrupt_stream, "invalid segment scale");
    }
    const auto nv = r.u16();
    const auto vl = r.take(nv);
    s.value_lengths.assign(vl.begin(), vl.end());
    const auto ng = r.u16();
    const auto gl = r.take(ng);
    s.gap_lengths.assign(gl.begin(), gl.end());
    s.payload.bit_length = r.u64();
    require(s.payload.bit_length / 8 <= r.remaining(), errc::truncated_stream, "payload truncated");
    const auto pb = r.take((s.payload.bit_length + 7) / 8);
    s.payload.bytes.assign(pb.begin(), pb.end());
    require(r.remaining() == 0, errc::corrupt_stream, "unexpected bytes after payload");
    return s;
  }
};

inline void save_stream(const CompressedStream& s, const std::filesystem::path& path) {
  io::write_file(path, s.serialize());
}

inline CompressedStream load_stream(const std::filesystem::path& path) {
  return CompressedStream::parse(io::read_file(path));
}

}  // namespace mocap
