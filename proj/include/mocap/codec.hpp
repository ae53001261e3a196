#pragma once

// Frame-based (closed-loop prediction + LSDT) and clip-based (temporal DCT + LSDT)
// encoders and decoders.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mocap/error.hpp"
#include "mocap/lsdt.hpp"
#include "mocap/motion.hpp"
#include "mocap/quantizer.hpp"
#include "mocap/stream.hpp"
#include "mocap/transforms.hpp"

namespace mocap {

/// Per coded vector: the coefficients before quantization and after dequantization.
struct VectorTrace {
  int dim = 0;
  std::size_t segment = 0;
  Vector coeffs;
  Vector recon;
  double step = 0.0;
};

struct CodingTrace {
  std::vector<VectorTrace> vectors;
  /// Encoder-side reconstruction (frame codec: closed-loop state per frame).
  std::array<Matrix, 3> reconstruction;
};

namespace detail {

inline void check_model(const MotionSequence& seq, const TransformModel& model) {
  require(seq.joints() == model.joints(), errc::model_mismatch,
          "sequence has J=" + std::to_string(seq.joints()) + " but model has J=" + std::to_string(model.joints()));
}

inline void check_bits(int bits) {
  require(bits >= 2 && bits <= 16, errc::invalid_argument, "quantizer bits must be in [2, 16]");
}

inline void check_stream_model(const CompressedStream& s, const TransformModel& model) {
  require(s.joints == model.joints(), errc::model_mismatch,
          "stream has J=" + std::to_string(s.joints) + " but model has J=" + std::to_string(model.joints()));
}

}  // namespace detail

/// One frame's codes, one per dimension.
struct FrameCodes {
  std::array<SparseVectorCode, 3> codes;
  std::array<QuantizerSpec, 3> specs;
};

/// Closed-loop frame encoder: frame 1 is coded as B m_1, every later frame as
/// B (m_i - m^_{i-1}) against the encoder's own reconstruction. Each frame carries
/// its own scale; residual scales are floored at frame 1's scale.
class FrameEncoder {
 public:
  FrameEncoder(const TransformModel& model, int bits) : model_(&model), bits_(bits) {
    detail::check_bits(bits);
    for (auto& r : recon_) r = Vector::Zero(model.joints());
  }

  FrameCodes push(const std::array<Vector, 3>& frame, CodingTrace* trace = nullptr) {
    FrameCodes out;
    for (int d = 0; d < 3; ++d) {
      require(frame[d].size() == model_->joints(), errc::model_mismatch, "frame size does not match model");
      require(frame[d].allFinite(), errc::non_finite_value, "frame contains non-finite values");
      const Matrix& b = model_->basis(d).matrix();
      const Vector residual = frame_index_ == 0 ? Vector(frame[d]) : Vector(frame[d] - recon_[d]);
      const Vector coeffs = b * residual;
      // Residual frames never quantize finer than frame 1, so that residuals within
      // the reference's quantization noise fall into the dead zone.
      const double peak = std::max(coeffs.cwiseAbs().maxCoeff(), static_cast<double>(floor_[d]));
      const auto spec = QuantizerSpec::for_peak(bits_, peak);
      if (frame_index_ == 0) floor_[d] = spec.max_abs;
      auto code = quantize(coeffs, spec);
      const Vector deq = dequantize(code, spec, model_->joints());
      reconstruct(d, deq);
      if (trace) trace->vectors.push_back({d, frame_index_, coeffs, deq, spec.step()});
      out.codes[d] = std::move(code);
      out.specs[d] = spec;
    }
    ++frame_index_;
    return out;
  }

  FrameCodes push(const MotionSequence& seq, int frame, CodingTrace* trace = nullptr) {
    return push({seq.dim(0).col(frame), seq.dim(1).col(frame), seq.dim(2).col(frame)}, trace);
  }

  const Vector& reconstruction(int d) const { return recon_.at(static_cast<std::size_t>(d)); }
  std::size_t frames_coded() const { return frame_index_; }

 private:
  void reconstruct(int d, const Vector& deq) {
    const Vector delta = model_->basis(d).matrix().transpose() * deq;
    if (frame_index_ == 0)
      recon_[d] = delta;
    else
      recon_[d] += delta;
  }

  const TransformModel* model_;
  int bits_;
  std::array<Vector, 3> recon_;
  std::array<float, 3> floor_{};
  std::size_t frame_index_ = 0;
};

/// Mirror of FrameEncoder: m^_1 = B^T c^_1, m^_i = m^_{i-1} + B^T c^_i.
class FrameDecoder {
 public:
  explicit FrameDecoder(const TransformModel& model) : model_(&model) {
    for (auto& r : recon_) r = Vector::Zero(model.joints());
  }

  void push(const FrameCodes& frame) {
    for (int d = 0; d < 3; ++d) {
      const Vector deq = dequantize(frame.codes[d], frame.specs[d], model_->joints());
      const Vector delta = model_->basis(d).matrix().transpose() * deq;
      if (frame_index_ == 0)
        recon_[d] = delta;
      else
        recon_[d] += delta;
    }
    ++frame_index_;
  }

  const Vector& reconstruction(int d) const { return recon_.at(static_cast<std::size_t>(d)); }

 private:
  const TransformModel* model_;
  std::array<Vector, 3> recon_;
  std::size_t frame_index_ = 0;
};

/// Frame codec with entropy tables fixed up front, so each frame's bits can be
/// emitted as soon as the frame is coded. The container is assembled by finish().
class StreamingFrameEncoder {
 public:
  StreamingFrameEncoder(const TransformModel& model, int bits, EntropyTables tables)
      : encoder_(model, bits), tables_(std::move(tables)), joints_(model.joints()), bits_(bits) {}

  /// Codes one frame; returns the number of payload bits it produced.
  std::uint64_t push(const std::array<Vector, 3>& frame, CodingTrace* trace = nullptr) {
    const auto before = writer_.bit_length();
    auto fc = encoder_.push(frame, trace);
    for (int d = 0; d < 3; ++d) {
      encode_vector(writer_, fc.codes[d], joints_, tables_);
      scales_[d].push_back(fc.specs[d].max_abs);
    }
    return writer_.bit_length() - before;
  }

  std::uint64_t push(const MotionSequence& seq, int frame, CodingTrace* trace = nullptr) {
    return push({seq.dim(0).col(frame), seq.dim(1).col(frame), seq.dim(2).col(frame)}, trace);
  }

  const BitWriter& payload() const { return writer_; }
  const FrameEncoder& encoder() const { return encoder_; }

  CompressedStream finish() && {
    CompressedStream s;
    s.codec = CodecId::frame;
    s.joints = static_cast<std::uint16_t>(joints_);
    s.frames = static_cast<std::uint32_t>(encoder_.frames_coded());
    s.clip_length = 0;
    s.bits = static_cast<std::uint8_t>(bits_);
    s.segments = s.frames;
    for (int d = 0; d < 3; ++d) s.max_abs.insert(s.max_abs.end(), scales_[d].begin(), scales_[d].end());
    s.value_lengths = tables_.values.lengths();
    s.gap_lengths = tables_.gaps.lengths();
    s.payload.bit_length = writer_.bit_length();
    s.payload.bytes = std::move(writer_).take();
    return s;
  }

 private:
  FrameEncoder encoder_;
  EntropyTables tables_;
  int joints_;
  int bits_;
  BitWriter writer_;
  std::array<std::vector<float>, 3> scales_;
};

namespace detail {

inline void check_encodable(const MotionSequence& seq, const TransformModel& model, int bits) {
  check_model(seq, model);
  check_bits(bits);
  require(seq.joints() <= 0xFFFF, errc::invalid_argument, "J exceeds the stream format limit");
}

}  // namespace detail

/// Two-pass frame codec: quantize every frame, then build global tables.
inline CompressedStream encode_frame_based(const MotionSequence& seq, const TransformModel& model, int bits,
                                           CodingTrace* trace = nullptr) {
  detail::check_encodable(seq, model, bits);
  FrameEncoder enc(model, bits);
  const int F = seq.frames();
  const int J = seq.joints();
  std::vector<SparseVectorCode> codes;
  codes.reserve(3u * static_cast<std::size_t>(F));
  CompressedStream s;
  s.codec = CodecId::frame;
  s.joints = static_cast<std::uint16_t>(J);
  s.frames = static_cast<std::uint32_t>(F);
  s.bits = static_cast<std::uint8_t>(bits);
  s.segments = static_cast<std::uint32_t>(F);
  s.max_abs.assign(3u * static_cast<std::size_t>(F), 0.0f);
  if (trace)
    for (auto& r : trace->reconstruction) r.resize(J, F);
  for (int i = 0; i < F; ++i) {
    auto fc = enc.push(seq, i, trace);
    for (int d = 0; d < 3; ++d) {
      s.max_abs[static_cast<std::size_t>(d) * F + i] = fc.specs[d].max_abs;
      codes.push_back(std::move(fc.codes[d]));
      if (trace) trace->reconstruction[d].col(i) = enc.reconstruction(d);
    }
  }
  const auto tables = EntropyTables::from_codes(codes, bits, J);
  s.value_lengths = tables.values.lengths();
  s.gap_lengths = tables.gaps.lengths();
  s.payload = encode_payload(codes, J, tables);
  return s;
}

/// Single-pass frame codec using pre-built tables.
inline CompressedStream encode_frame_based_streaming(const MotionSequence& seq, const TransformModel& model, int bits,
                                                     const EntropyTables& tables, CodingTrace* trace = nullptr) {
  detail::check_encodable(seq, model, bits);
  StreamingFrameEncoder enc(model, bits, tables);
  if (trace)
    for (auto& r : trace->reconstruction) r.resize(seq.joints(), seq.frames());
  for (int i = 0; i < seq.frames(); ++i) {
    enc.push(seq, i, trace);
    if (trace)
      for (int d = 0; d < 3; ++d) trace->reconstruction[d].col(i) = enc.encoder().reconstruction(d);
  }
  return std::move(enc).finish();
}

/// Histograms of the frame codec's symbols over training sequences, plus one count
/// for every symbol so that any input is encodable.
inline EntropyTables streaming_tables(std::span<const MotionSequence> training, const TransformModel& model, int bits) {
  detail::check_bits(bits);
  SymbolCounts counts(bits, model.joints());
  for (auto& c : counts.values) c = 1;
  for (auto& c : counts.gaps) c = 1;
  for (const auto& seq : training) {
    detail::check_model(seq, model);
    FrameEncoder enc(model, bits);
    for (int i = 0; i < seq.frames(); ++i) {
      const auto fc = enc.push(seq, i);
      for (const auto& code : fc.codes) counts.add(code);
    }
  }
  return EntropyTables::from_counts(counts);
}

/// Calls `on_frame(i, reconstruction)` after each decoded frame.
template <typename OnFrame>
MotionSequence decode_frame_based(const CompressedStream& s, const TransformModel& model, OnFrame&& on_frame,
                                  double frame_rate = 120.0) {
  require(s.codec == CodecId::frame, errc::model_mismatch, "stream was not produced by the frame codec");
  detail::check_stream_model(s, model);
  const int J = s.joints;
  const int F = static_cast<int>(s.frames);
  require(s.segments == s.frames, errc::corrupt_stream, "frame stream must carry one segment per frame");
  const auto tables = s.tables();
  BitReader in(s.payload.bytes, s.payload.bit_length);
  FrameDecoder dec(model);
  std::array<Matrix, 3> out{Matrix(J, F), Matrix(J, F), Matrix(J, F)};
  for (int i = 0; i < F; ++i) {
    FrameCodes fc;
    for (int d = 0; d < 3; ++d) {
      fc.specs[d] = QuantizerSpec(s.bits, s.scale(d, static_cast<std::size_t>(i)));
      fc.codes[d] = decode_vector(in, J, tables);
    }
    dec.push(fc);
    for (int d = 0; d < 3; ++d) out[d].col(i) = dec.reconstruction(d);
    on_frame(i, out);
  }
  require(in.remaining() == 0, errc::corrupt_stream, "trailing payload bits");
  return MotionSequence(std::move(out), frame_rate);
}

inline MotionSequence decode_frame_based(const CompressedStream& s, const TransformModel& model,
                                         double frame_rate = 120.0) {
  return decode_frame_based(s, model, [](int, const std::array<Matrix, 3>&) {}, frame_rate);
}

/// Orthonormal DCT bases keyed by clip length.
class DctCache {
 public:
  const Matrix& get(int length) {
    auto it = cache_.find(length);
    if (it == cache_.end()) it = cache_.emplace(length, dct_matrix(length).matrix()).first;
    return it->second;
  }

 private:
  std::map<int, Matrix> cache_;
};

/// Clip codec: per clip and dimension, C = B (M~ U_t); each column of C is one coded
/// vector. A trailing short clip uses a shorter DCT.
inline CompressedStream encode_clip_based(const MotionSequence& seq, const TransformModel& model, int clip_length,
                                          int bits, CodingTrace* trace = nullptr) {
  detail::check_encodable(seq, model, bits);
  require(clip_length >= 1 && clip_length <= 0xFFFF, errc::invalid_argument, "clip length must be in [1, 65535]");
  const int J = seq.joints();
  const int F = seq.frames();
  const int S = (F + clip_length - 1) / clip_length;
  CompressedStream s;
  s.codec = CodecId::clip;
  s.joints = static_cast<std::uint16_t>(J);
  s.frames = static_cast<std::uint32_t>(F);
  s.clip_length = static_cast<std::uint16_t>(clip_length);
  s.bits = static_cast<std::uint8_t>(bits);
  s.segments = static_cast<std::uint32_t>(S);
  s.max_abs.assign(3u * static_cast<std::size_t>(S), 0.0f);
  if (trace)
    for (auto& r : trace->reconstruction) r.resize(J, F);

  DctCache dct;
  std::vector<SparseVectorCode> codes;
  codes.reserve(static_cast<std::size_t>(3) * F);
  for (int c = 0; c < S; ++c) {
    const int start = c * clip_length;
    const int len = std::min(clip_length, F - start);
    const Matrix& ut = dct.get(len);
    for (int d = 0; d < 3; ++d) {
      const Matrix& b = model.basis(d).matrix();
      const Matrix coeffs = b * (seq.dim(d).middleCols(start, len) * ut);
      const auto spec = QuantizerSpec::for_peak(bits, coeffs.cwiseAbs().maxCoeff());
      s.max_abs[static_cast<std::size_t>(d) * S + c] = spec.max_abs;
      Matrix deq(J, len);
      for (int k = 0; k < len; ++k) {
        auto code = quantize(coeffs.col(k), spec);
        if (trace) deq.col(k) = dequantize(code, spec, J);
        codes.push_back(std::move(code));
      }
      if (trace) {
        for (int k = 0; k < len; ++k)
          trace->vectors.push_back({d, static_cast<std::size_t>(c), coeffs.col(k), deq.col(k), spec.step()});
        trace->reconstruction[d].middleCols(start, len) = b.transpose() * deq * ut.transpose();
      }
    }
  }
  const auto tables = EntropyTables::from_codes(codes, bits, J);
  s.value_lengths = tables.values.lengths();
  s.gap_lengths = tables.gaps.lengths();
  s.payload = encode_payload(codes, J, tables);
  return s;
}

inline MotionSequence decode_clip_based(const CompressedStream& s, const TransformModel& model,
                                        double frame_rate = 120.0) {
  require(s.codec == CodecId::clip, errc::model_mismatch, "stream was not produced by the clip codec");
  detail::check_stream_model(s, model);
  const int J = s.joints;
  const int F = static_cast<int>(s.frames);
  const int L = s.clip_length;
  require(L >= 1, errc::corrupt_stream, "clip stream with zero clip length");
  const int S = (F + L - 1) / L;
  require(s.segments == static_cast<std::uint32_t>(S), errc::corrupt_stream, "segment count does not match F and L");
  const auto tables = s.tables();
  BitReader in(s.payload.bytes, s.payload.bit_length);
  DctCache dct;
  std::array<Matrix, 3> out{Matrix(J, F), Matrix(J, F), Matrix(J, F)};
  for (int c = 0; c < S; ++c) {
    const int start = c * L;
    const int len = std::min(L, F - start);
    const Matrix& ut = dct.get(len);
    for (int d = 0; d < 3; ++d) {
      const QuantizerSpec spec(s.bits, s.scale(d, static_cast<std::size_t>(c)));
      Matrix deq(J, len);
      for (int k = 0; k < len; ++k) deq.col(k) = dequantize(decode_vector(in, J, tables), spec, J);
      out[d].middleCols(start, len) = model.basis(d).matrix().transpose() * deq * ut.transpose();
    }
  }
  require(in.remaining() == 0, errc::corrupt_stream, "trailing payload bits");
  return MotionSequence(std::move(out), frame_rate);
}

/// Dispatches on the stream's codec id.
inline MotionSequence decode_stream(const CompressedStream& s, const TransformModel& model, double frame_rate = 120.0) {
  return s.codec == CodecId::frame ? decode_frame_based(s, model, frame_rate) : decode_clip_based(s, model, frame_rate);
}

}  // namespace mocap
