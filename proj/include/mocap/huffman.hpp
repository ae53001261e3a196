#pragma once

// Bit-level I/O and canonical Huffman codes (tables transmitted as code lengths).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "mocap/error.hpp"

namespace mocap {

/// MSB-first bit packer.
class BitWriter {
 public:
  void write(std::uint64_t value, int nbits) {
    for (int i = nbits - 1; i >= 0; --i) put_bit(static_cast<unsigned>((value >> i) & 1u));
  }

  void put_bit(unsigned bit) {
    if ((bits_ & 7u) == 0) bytes_.push_back(0);
    if (bit) bytes_.back() |= static_cast<std::uint8_t>(0x80u >> (bits_ & 7u));
    ++bits_;
  }

  std::uint64_t bit_length() const { return bits_; }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::vector<std::uint8_t> take() && { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
  std::uint64_t bits_ = 0;
};

class BitReader {
 public:
  BitReader(std::span<const std::uint8_t> bytes, std::uint64_t bit_length) : bytes_(bytes), limit_(bit_length) {
    require(bit_length <= bytes.size() * 8u, errc::truncated_stream, "bit length exceeds buffer");
  }

  unsigned get_bit() {
    require(pos_ < limit_, errc::truncated_stream, "payload ended at bit " + std::to_string(pos_));
    const unsigned bit = (bytes_[pos_ >> 3] >> (7u - (pos_ & 7u))) & 1u;
    ++pos_;
    return bit;
  }

  std::uint64_t read(int nbits) {
    std::uint64_t v = 0;
    for (int i = 0; i < nbits; ++i) v = (v << 1) | get_bit();
    return v;
  }

  std::uint64_t position() const { return pos_; }
  std::uint64_t remaining() const { return limit_ - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::uint64_t limit_;
  std::uint64_t pos_ = 0;
};

inline constexpr int kMaxCodeLength = 64;

/// Huffman code lengths for the given symbol counts (0 = symbol absent).
/// A lone symbol gets length 1. Ties merge the lower-id node first.
inline std::vector<std::uint8_t> huffman_code_lengths(std::span<const std::uint64_t> freqs) {
  std::vector<std::uint8_t> lengths(freqs.size(), 0);
  struct Node {
    std::uint64_t weight;
    std::size_t id;
  };
  auto heavier = [](const Node& a, const Node& b) { return a.weight > b.weight || (a.weight == b.weight && a.id > b.id); };
  std::priority_queue<Node, std::vector<Node>, decltype(heavier)> heap(heavier);
  const std::size_t n = freqs.size();
  std::vector<std::size_t> parent;
  parent.reserve(2 * n);
  for (std::size_t s = 0; s < n; ++s) {
    parent.push_back(SIZE_MAX);
    if (freqs[s] > 0) heap.push({freqs[s], s});
  }
  require(!heap.empty(), errc::invalid_argument, "cannot build a Huffman code for an empty alphabet");
  if (heap.size() == 1) {
    lengths[heap.top().id] = 1;
    return lengths;
  }
  while (heap.size() > 1) {
    const Node a = heap.top();
    heap.pop();
    const Node b = heap.top();
    heap.pop();
    const std::size_t id = parent.size();
    parent.push_back(SIZE_MAX);
    parent[a.id] = id;
    parent[b.id] = id;
    heap.push({a.weight + b.weight, id});
  }
  // Depths by walking up; internal ids grow, so resolve top-down in reverse order.
  std::vector<int> depth(parent.size(), 0);
  for (std::size_t id = parent.size(); id-- > 0;)
    if (parent[id] != SIZE_MAX) depth[id] = depth[parent[id]] + 1;
  for (std::size_t s = 0; s < n; ++s) {
    if (freqs[s] == 0) continue;
    require(depth[s] <= kMaxCodeLength, errc::invalid_argument,
            "Huffman code length " + std::to_string(depth[s]) + " exceeds " + std::to_string(kMaxCodeLength));
    lengths[s] = static_cast<std::uint8_t>(depth[s]);
  }
  return lengths;
}

/// Canonical prefix code: shorter codes first, ties in symbol order. Fully determined
/// by the per-symbol lengths.
class CanonicalCode {
 public:
  CanonicalCode() = default;

  explicit CanonicalCode(std::vector<std::uint8_t> lengths) : lengths_(std::move(lengths)) {
    codes_.assign(lengths_.size(), 0);
    for (std::size_t s = 0; s < lengths_.size(); ++s) {
      require(lengths_[s] <= kMaxCodeLength, errc::corrupt_stream, "code length too large");
      if (lengths_[s] > 0) order_.push_back(static_cast<std::uint32_t>(s));
    }
    std::stable_sort(order_.begin(), order_.end(),
                     [this](std::uint32_t a, std::uint32_t b) { return lengths_[a] < lengths_[b]; });
    max_len_ = order_.empty() ? 0 : lengths_[order_.back()];
    count_.assign(static_cast<std::size_t>(max_len_) + 1, 0);
    first_code_.assign(static_cast<std::size_t>(max_len_) + 1, 0);
    first_index_.assign(static_cast<std::size_t>(max_len_) + 1, 0);
    for (auto s : order_) ++count_[lengths_[s]];
    // Kraft check: an over-subscribed length table cannot be a prefix code.
    long double kraft = 0;
    for (int l = 1; l <= max_len_; ++l) kraft += count_[l] * std::ldexp(1.0L, -l);
    require(kraft <= 1.0L + 1e-12L, errc::corrupt_stream, "code lengths violate the Kraft inequality");

    std::uint64_t code = 0;
    std::size_t index = 0;
    for (int l = 1; l <= max_len_; ++l) {
      first_code_[l] = code;
      first_index_[l] = index;
      for (std::size_t k = 0; k < count_[l]; ++k) codes_[order_[index + k]] = code + k;
      code = (code + count_[l]) << 1;
      index += count_[l];
    }
  }

  static CanonicalCode build(std::span<const std::uint64_t> freqs) {
    return CanonicalCode(huffman_code_lengths(freqs));
  }

  bool empty() const { return order_.empty(); }
  std::size_t alphabet_size() const { return lengths_.size(); }
  const std::vector<std::uint8_t>& lengths() const { return lengths_; }
  bool contains(std::uint32_t symbol) const { return symbol < lengths_.size() && lengths_[symbol] > 0; }
  int length(std::uint32_t symbol) const { return contains(symbol) ? lengths_[symbol] : 0; }
  std::uint64_t code(std::uint32_t symbol) const { return codes_.at(symbol); }

  void encode(BitWriter& out, std::uint32_t symbol) const {
    require(contains(symbol), errc::symbol_missing, "symbol " + std::to_string(symbol) + " not in code table");
    out.write(codes_[symbol], lengths_[symbol]);
  }

  std::uint32_t decode(BitReader& in) const {
    require(!empty(), errc::corrupt_stream, "decoding with an empty code table");
    std::uint64_t code = 0;
    for (int l = 1; l <= max_len_; ++l) {
      code = (code << 1) | in.get_bit();
      const std::uint64_t offset = code - first_code_[l];
      if (code >= first_code_[l] && offset < count_[l]) return order_[first_index_[l] + offset];
    }
    fail(errc::corrupt_stream, "invalid Huffman codeword");
  }

  /// Sum over symbols of freq * length, in bits.
  std::uint64_t encoded_bits(std::span<const std::uint64_t> freqs) const {
    std::uint64_t total = 0;
    for (std::size_t s = 0; s < freqs.size() && s < lengths_.size(); ++s) total += freqs[s] * lengths_[s];
    return total;
  }

 private:
  std::vector<std::uint8_t> lengths_;
  std::vector<std::uint64_t> codes_;
  std::vector<std::uint32_t> order_;
  std::vector<std::size_t> count_;
  std::vector<std::uint64_t> first_code_;
  std::vector<std::size_t> first_index_;
  int max_len_ = 0;
};

}  // namespace mocap
