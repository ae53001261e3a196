#pragma once

// Distortion and compression-ratio metrics, the sparsity/distortion and
// rate/distortion protocols, and a deterministic synthetic motion generator.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mocap/codec.hpp"
#include "mocap/error.hpp"
#include "mocap/lsdt.hpp"
#include "mocap/motion.hpp"
#include "mocap/stream.hpp"
#include "mocap/transforms.hpp"

namespace mocap {

/// Bits per key point in the uncompressed source: three 32-bit floats.
inline constexpr double kBitsPerKeyPoint = 96.0;

namespace detail {
inline void check_same_shape(const MotionSequence& a, const MotionSequence& b) {
  require(a.joints() == b.joints() && a.frames() == b.frames(), errc::shape_mismatch,
          "sequences differ in shape: " + std::to_string(a.joints()) + "x" + std::to_string(a.frames()) + " vs " +
              std::to_string(b.joints()) + "x" + std::to_string(b.frames()));
}
}  // namespace detail

/// Mean Euclidean error per joint, averaged over frames.
inline Vector per_joint_distortion(const MotionSequence& orig, const MotionSequence& recon) {
  detail::check_same_shape(orig, recon);
  const Matrix sq = (orig.dim(0) - recon.dim(0)).array().square() + (orig.dim(1) - recon.dim(1)).array().square() +
                    (orig.dim(2) - recon.dim(2)).array().square();
  return sq.array().sqrt().rowwise().mean();
}

/// Mean Euclidean distance between original and reconstructed joint positions
/// over all J x F joint-frames.
inline double distortion(const MotionSequence& orig, const MotionSequence& recon) {
  return per_joint_distortion(orig, recon).mean();
}

/// Original bits (F * J * 96) over the serialized stream size.
inline double compression_ratio(int frames, int joints, std::size_t stream_bytes) {
  require(stream_bytes > 0, errc::invalid_argument, "stream size must be positive");
  return static_cast<double>(frames) * joints * kBitsPerKeyPoint / (8.0 * static_cast<double>(stream_bytes));
}

inline double compression_ratio(int frames, int joints, const CompressedStream& stream) {
  return compression_ratio(frames, joints, stream.byte_size());
}

enum class SpatialTransform { lsdt, dct, dwt };

inline const char* to_string(SpatialTransform t) {
  switch (t) {
    case SpatialTransform::lsdt: return "lsdt";
    case SpatialTransform::dct: return "dct";
    case SpatialTransform::dwt: return "dwt";
  }
  return "?";
}

inline SpatialTransform parse_spatial_transform(std::string_view s) {
  if (s == "lsdt") return SpatialTransform::lsdt;
  if (s == "dct") return SpatialTransform::dct;
  if (s == "dwt" || s == "haar") return SpatialTransform::dwt;
  fail(errc::invalid_argument, "unknown transform '" + std::string(s) + "'");
}

struct SparsityPoint {
  double fraction = 0;
  double distortion = 0;
  SpatialTransform transform = SpatialTransform::lsdt;
};

/// Number of coefficients kept for a nonzero fraction f of J.
inline int kept_coefficients(double fraction, int joints) {
  require(fraction > 0.0 && fraction <= 1.0, errc::invalid_argument,
          "fraction must be in (0, 1], got " + std::to_string(fraction));
  // Guard against f*J landing a hair above an integer.
  return std::min(joints, static_cast<int>(std::ceil(fraction * joints - 1e-9)));
}

inline constexpr int kHaarLevels = 3;

/// Per frame and dimension: transform, keep the ceil(f n) largest of the n transform
/// coefficients, invert. Raw frames, no quantization. n is J except for the
/// zero-padded DWT, whose coefficient count is the padded length.
inline MotionSequence sparse_approximation(const MotionSequence& seq, SpatialTransform transform, double fraction,
                                           const TransformModel* model = nullptr) {
  const int J = seq.joints();
  const int F = seq.frames();
  const int keep = kept_coefficients(fraction, J);
  std::array<Matrix, 3> out;
  for (int d = 0; d < 3; ++d) {
    const Matrix& m = seq.dim(d);
    if (transform == SpatialTransform::dwt) {
      const int padded_keep = kept_coefficients(fraction, haar_padded_length(J, kHaarLevels));
      out[d].resize(J, F);
      for (int i = 0; i < F; ++i) {
        Vector c = haar_dwt_forward(m.col(i), kHaarLevels);
        truncate_in_place(c, padded_keep);
        out[d].col(i) = haar_dwt_inverse(c, kHaarLevels).head(J);
      }
      continue;
    }
    Matrix basis;
    if (transform == SpatialTransform::dct) {
      basis = spatial_dct_basis(J).matrix();
    } else {
      require(model != nullptr, errc::invalid_argument, "the lsdt transform needs a trained model");
      detail::check_model(seq, *model);
      basis = model->basis(d).matrix();
    }
    Matrix g = basis * m;
    for (int i = 0; i < F; ++i) truncate_in_place(g.col(i), keep);
    out[d] = basis.transpose() * g;
  }
  return MotionSequence(std::move(out), seq.frame_rate());
}

inline std::vector<SparsityPoint> sparsity_distortion_curve(const MotionSequence& seq, SpatialTransform transform,
                                                            const std::vector<double>& fractions,
                                                            const TransformModel* model = nullptr) {
  require(!fractions.empty(), errc::invalid_argument, "no fractions given");
  std::vector<SparsityPoint> out;
  for (double f : fractions)
    out.push_back({f, distortion(seq, sparse_approximation(seq, transform, f, model)), transform});
  return out;
}

struct RDPoint {
  CodecId codec = CodecId::frame;
  int clip_length = 0;
  int bits = 0;
  double ratio = 0;       // CR
  double distortion = 0;  // D
  std::size_t stream_bytes = 0;
};

struct SweepConfig {
  bool frame = true;
  bool clip = true;
  std::vector<int> bits;
  std::vector<int> clip_lengths;
};

inline RDPoint measure(const MotionSequence& seq, const TransformModel& model, CodecId codec, int bits,
                       int clip_length = 0) {
  const auto stream = codec == CodecId::frame ? encode_frame_based(seq, model, bits)
                                              : encode_clip_based(seq, model, clip_length, bits);
  const auto bytes = stream.serialize();
  const auto recon = decode_stream(CompressedStream::parse(bytes), model, seq.frame_rate());
  return {codec,
          codec == CodecId::frame ? 0 : clip_length,
          bits,
          compression_ratio(seq.frames(), seq.joints(), bytes.size()),
          distortion(seq, recon),
          bytes.size()};
}

/// Frame rows (one per b) first, then clip rows ordered by L then b.
inline std::vector<RDPoint> rd_sweep(const MotionSequence& seq, const TransformModel& model, const SweepConfig& cfg) {
  require(!cfg.bits.empty(), errc::invalid_sweep, "empty list of quantizer bit depths");
  require(cfg.frame || cfg.clip, errc::invalid_sweep, "no codec selected");
  require(!cfg.clip || !cfg.clip_lengths.empty(), errc::invalid_sweep, "clip codec selected without clip lengths");
  std::vector<RDPoint> out;
  if (cfg.frame)
    for (int b : cfg.bits) out.push_back(measure(seq, model, CodecId::frame, b));
  if (cfg.clip)
    for (int L : cfg.clip_lengths)
      for (int b : cfg.bits) out.push_back(measure(seq, model, CodecId::clip, b, L));
  return out;
}

inline void write_rd_csv(std::ostream& os, const std::vector<RDPoint>& points) {
  os << "codec,L,b,CR,D\n";
  os.precision(10);
  for (const auto& p : points)
    os << to_string(p.codec) << ',' << p.clip_length << ',' << p.bits << ',' << p.ratio << ',' << p.distortion << '\n';
}

inline void write_sparsity_csv(std::ostream& os, const std::vector<SparsityPoint>& points) {
  os << "transform,fraction,D\n";
  os.precision(10);
  for (const auto& p : points) os << to_string(p.transform) << ',' << p.fraction << ',' << p.distortion << '\n';
}

inline void write_convergence_csv(std::ostream& os, const TrainMeta& meta) {
  os << "dim,iteration,objective\n";
  os.precision(17);
  for (int d = 0; d < 3; ++d) {
    const auto& obj = meta.traces[d].objective;
    for (std::size_t k = 0; k < obj.size(); ++k) os << to_string(static_cast<Dim>(d)) << ',' << k << ',' << obj[k] << '\n';
  }
}

inline void write_per_joint_csv(std::ostream& os, const Vector& per_joint) {
  os << "joint,D\n";
  os.precision(10);
  for (Eigen::Index j = 0; j < per_joint.size(); ++j) os << j << ',' << per_joint(j) << '\n';
}

struct SyntheticParams {
  int joints = 31;
  int frames = 1200;
  int rank = 8;                  // k: dimension of the per-axis joint subspace
  int harmonics = 3;             // sinusoids per latent curve
  double max_frequency = 1.5;    // Hz
  double frame_rate = 120.0;
  double amplitude = 30.0;       // bound on the summed sinusoid amplitudes of a latent curve
  double translation = 20.0;     // amplitude of the shared rigid translation
  double offset = 15.0;          // std-dev of the static per-joint offsets (0 disables)
  double noise = 0.0;            // i.i.d. Gaussian noise std-dev
  std::uint64_t seed = 1;        // motion: latent curves, translation, noise
  /// Skeleton: mixing matrix and offsets. Unset means derived from `seed`; sequences
  /// sharing a skeleton seed span the same joint subspace.
  std::optional<std::uint64_t> skeleton_seed;
};

namespace detail {

/// SplitMix64: small, fully specified generator so output is identical on every platform.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t state_;
};

inline Vector sinusoid_sum(SplitMix64& rng, int frames, int harmonics, double max_frequency, double frame_rate,
                           double amplitude) {
  Vector x = Vector::Zero(frames);
  for (int h = 0; h < harmonics; ++h) {
    const double a = amplitude / harmonics * rng.uniform();
    const double f = max_frequency * rng.uniform();
    const double phase = 2.0 * std::numbers::pi * rng.uniform();
    for (int i = 0; i < frames; ++i) x(i) += a * std::sin(2.0 * std::numbers::pi * f * i / frame_rate + phase);
  }
  return x;
}

}  // namespace detail

/// Per axis: (J x k random mixing) * (k smooth latent curves) + shared rigid
/// translation + static per-joint offsets + optional noise. Deterministic in the seed.
inline MotionSequence gen_synthetic(const SyntheticParams& p) {
  require(p.joints >= 1 && p.frames >= 1, errc::invalid_argument, "J and F must be positive");
  require(p.rank >= 1 && p.rank <= p.joints, errc::invalid_argument, "subspace rank k must be in [1, J]");
  require(p.harmonics >= 1, errc::invalid_argument, "harmonics must be >= 1");
  require(p.max_frequency >= 0 && p.frame_rate > 0, errc::invalid_argument, "bad frequency parameters");
  detail::SplitMix64 skeleton(p.skeleton_seed.value_or(p.seed));
  detail::SplitMix64 rng(p.seed ^ 0xD1B54A32D192ED03ull);
  std::array<Matrix, 3> data;
  for (int d = 0; d < 3; ++d) {
    Matrix mixing(p.joints, p.rank);
    for (int j = 0; j < p.joints; ++j)
      for (int k = 0; k < p.rank; ++k) mixing(j, k) = skeleton.normal() / std::sqrt(static_cast<double>(p.rank));
    Vector offsets(p.joints);
    for (int j = 0; j < p.joints; ++j) offsets(j) = p.offset * skeleton.normal();
    Matrix latent(p.rank, p.frames);
    for (int k = 0; k < p.rank; ++k)
      latent.row(k) =
          detail::sinusoid_sum(rng, p.frames, p.harmonics, p.max_frequency, p.frame_rate, p.amplitude).transpose();
    const Vector shift =
        detail::sinusoid_sum(rng, p.frames, p.harmonics, p.max_frequency, p.frame_rate, p.translation);
    data[d] = mixing * latent;
    data[d].rowwise() += shift.transpose();
    data[d].colwise() += offsets;
    if (p.noise > 0)
      for (int i = 0; i < p.frames; ++i)
        for (int j = 0; j < p.joints; ++j) data[d](j, i) += p.noise * rng.normal();
  }
  return MotionSequence(std::move(data), p.frame_rate);
}

inline MotionSequence gen_synthetic(int joints, int frames, int rank, std::uint64_t seed,
                                   std::optional<std::uint64_t> skeleton_seed = std::nullopt) {
  SyntheticParams p;
  p.joints = joints;
  p.frames = frames;
  p.rank = rank;
  p.seed = seed;
  p.skeleton_seed = skeleton_seed;
  return gen_synthetic(p);
}

}  // namespace mocap
