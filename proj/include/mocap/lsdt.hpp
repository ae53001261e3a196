#pragma once

// Learned spatial decorrelation transform: alternating minimization of
//   sum_i || B m_i - e_i ||^2   s.t.  B orthogonal, ||e_i||_0 <= P
// by exact hard truncation (sparse step) and an SVD Procrustes refit (basis step).

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <future>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "mocap/byte_io.hpp"
#include "mocap/error.hpp"
#include "mocap/motion.hpp"
#include "mocap/transforms.hpp"

namespace mocap {

/// pca starts from the principal axes of the training frames themselves.
enum class InitKind : std::uint8_t { dct = 0, haar = 1, identity = 2, pca = 3 };

inline const char* to_string(InitKind k) {
  switch (k) {
    case InitKind::dct: return "dct";
    case InitKind::haar: return "haar";
    case InitKind::identity: return "identity";
    case InitKind::pca: return "pca";
  }
  return "?";
}

inline InitKind parse_init(std::string_view s) {
  if (s == "dct") return InitKind::dct;
  if (s == "haar" || s == "dwt") return InitKind::haar;
  if (s == "identity") return InitKind::identity;
  if (s == "pca" || s == "klt") return InitKind::pca;
  fail(errc::invalid_argument, "unknown init '" + std::string(s) + "' (expected dct, haar, identity or pca)");
}

inline Matrix initial_basis(InitKind kind, int joints) {
  switch (kind) {
    case InitKind::dct: return spatial_dct_basis(joints).matrix();
    case InitKind::haar: return haar_basis(joints, 3).matrix();
    case InitKind::identity: return Matrix::Identity(joints, joints);
    case InitKind::pca: break;
  }
  fail(errc::invalid_argument, "the pca init needs training frames");
}

/// Rows are the eigenvectors of M M^T by decreasing eigenvalue, each signed so its
/// largest-magnitude entry is positive.
inline Matrix pca_basis(const Matrix& frames) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(frames * frames.transpose());
  require(eig.info() == Eigen::Success, errc::svd_failure, "eigen-decomposition of M M^T failed");
  const Eigen::Index n = frames.rows();
  Matrix b(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    Vector v = eig.eigenvectors().col(n - 1 - k);
    Eigen::Index at = 0;
    v.cwiseAbs().maxCoeff(&at);
    b.row(k) = v(at) < 0 ? Vector(-v).transpose() : v.transpose();
  }
  return b;
}

inline Matrix initial_basis(InitKind kind, const Matrix& frames) {
  return kind == InitKind::pca ? pca_basis(frames) : initial_basis(kind, static_cast<int>(frames.rows()));
}

/// Training frames per dimension, one column per frame.
struct TrainingBatch {
  std::array<Matrix, 3> frames;
  std::string source;

  int joints() const { return static_cast<int>(frames[0].rows()); }
  int size() const { return static_cast<int>(frames[0].cols()); }

  void validate() const {
    require(frames[0].rows() > 0 && frames[0].cols() > 0, errc::invalid_argument, "training batch is empty");
    for (int d = 0; d < 3; ++d) {
      require(frames[d].rows() == frames[0].rows() && frames[d].cols() == frames[0].cols(), errc::shape_mismatch,
              "training batch dimensions differ in shape");
      require(frames[d].allFinite(), errc::non_finite_value, "training batch contains non-finite values");
    }
  }

  /// Stacks the frames of several sequences. With `residuals`, uses m_i - m_{i-1}
  /// (first frame of each sequence kept raw) instead of raw frames.
  static TrainingBatch from_sequences(const std::vector<MotionSequence>& seqs, bool residuals = false,
                                      std::string source = {}) {
    require(!seqs.empty(), errc::invalid_argument, "no training sequences");
    const int J = seqs.front().joints();
    Eigen::Index N = 0;
    for (const auto& s : seqs) {
      require(s.joints() == J, errc::shape_mismatch, "training sequences have different marker counts");
      N += s.frames();
    }
    TrainingBatch b;
    b.source = std::move(source);
    for (int d = 0; d < 3; ++d) {
      b.frames[d].resize(J, N);
      Eigen::Index at = 0;
      for (const auto& s : seqs) {
        const Matrix& m = s.dim(d);
        if (residuals) {
          b.frames[d].col(at) = m.col(0);
          if (m.cols() > 1)
            b.frames[d].middleCols(at + 1, m.cols() - 1) = m.rightCols(m.cols() - 1) - m.leftCols(m.cols() - 1);
        } else {
          b.frames[d].middleCols(at, m.cols()) = m;
        }
        at += m.cols();
      }
    }
    return b;
  }
};

/// ||B M - E||_F^2.
inline double objective(const Matrix& basis, const Matrix& frames, const Matrix& sparse) {
  require(basis.rows() == basis.cols() && basis.cols() == frames.rows() && sparse.rows() == basis.rows() &&
              sparse.cols() == frames.cols(),
          errc::shape_mismatch, "objective: shapes do not conform");
  return (basis * frames - sparse).squaredNorm();
}

/// Exact minimizer over E for fixed B: column i is the P-term truncation of B m_i.
inline Matrix sparse_step(const Matrix& basis, const Matrix& frames, int sparsity) {
  require(basis.rows() == basis.cols() && basis.cols() == frames.rows(), errc::shape_mismatch,
          "sparse_step: shapes do not conform");
  require(sparsity >= 1 && sparsity <= basis.rows(), errc::invalid_argument,
          "sparsity P must be in [1, J]");
  Matrix e = basis * frames;
  for (Eigen::Index i = 0; i < e.cols(); ++i) truncate_in_place(e.col(i), sparsity);
  return e;
}

namespace detail {

/// Flips paired singular vectors so that the largest-magnitude entry of each left
/// singular vector is nonnegative (lowest index wins ties).
inline void canonicalize_svd_signs(Matrix& u, Matrix& v) {
  for (Eigen::Index k = 0; k < u.cols(); ++k) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index r = 0; r < u.rows(); ++r) {
      const double a = std::abs(u(r, k));
      if (a > best) {
        best = a;
        arg = r;
      }
    }
    if (u(arg, k) < 0) {
      u.col(k) = -u.col(k);
      v.col(k) = -v.col(k);
    }
  }
}

}  // namespace detail

/// Orthogonal Procrustes: with M E^T = U S V^T, returns B = V U^T, the orthogonal
/// matrix maximizing Tr(B M E^T) (equivalently minimizing ||B M - E||_F^2).
inline Matrix procrustes_step(const Matrix& frames, const Matrix& sparse) {
  require(frames.rows() == sparse.rows() && frames.cols() == sparse.cols(), errc::shape_mismatch,
          "procrustes_step: M and E must have the same shape");
  const Matrix cross = frames * sparse.transpose();
  require(cross.allFinite(), errc::svd_failure, "procrustes_step: non-finite cross-covariance");
  Eigen::JacobiSVD<Matrix> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  require(svd.info() == Eigen::Success, errc::svd_failure, "procrustes_step: SVD did not converge");
  Matrix u = svd.matrixU();
  Matrix v = svd.matrixV();
  detail::canonicalize_svd_signs(u, v);
  return v * u.transpose();
}

struct TrainOptions {
  int sparsity = 8;           // P
  int max_iterations = 500;   // K
  double tolerance = 1e-8;    // relative decrease over `window` iterations
  int window = 10;
  InitKind init = InitKind::dct;
  int threads = 1;
};

enum class StopReason : std::uint8_t { max_iterations, tolerance, exact_fit, stationary };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::max_iterations: return "max-iterations";
    case StopReason::tolerance: return "tolerance";
    case StopReason::exact_fit: return "exact-fit";
    case StopReason::stationary: return "stationary";
  }
  return "?";
}

struct DimensionTrace {
  /// objective[0] is the value after the first sparse step on the initial basis;
  /// objective[k] is the value at the end of iteration k (basis refit, then sparse step).
  std::vector<double> objective;
  /// Every half step: sparse, basis, sparse, basis, ...
  std::vector<double> half_steps;
  /// max |B B^T - I| after each basis update.
  std::vector<double> orthogonality;
  int iterations = 0;
  StopReason stop = StopReason::max_iterations;
};

struct TrainMeta {
  int sparsity = 8;
  int max_iterations = 500;
  std::uint64_t training_frames = 0;
  InitKind init = InitKind::dct;
  double tolerance = 1e-8;
  std::array<DimensionTrace, 3> traces;
};

/// Three learned J x J orthogonal matrices, one per coordinate axis.
class TransformModel {
 public:
  TransformModel() = default;
  TransformModel(std::array<OrthonormalBasis, 3> bases, TrainMeta meta)
      : bases_(std::move(bases)), meta_(std::move(meta)) {
    require(bases_[1].size() == bases_[0].size() && bases_[2].size() == bases_[0].size(), errc::shape_mismatch,
            "per-dimension bases differ in size");
  }

  /// A model using the same fixed basis for every dimension (no training).
  static TransformModel uniform(const OrthonormalBasis& basis) {
    TrainMeta meta;
    meta.sparsity = basis.size();
    meta.max_iterations = 0;
    meta.init = basis.kind() == BasisKind::haar_dwt ? InitKind::haar
                : basis.kind() == BasisKind::dct   ? InitKind::dct
                                                   : InitKind::identity;
    return TransformModel({basis, basis, basis}, meta);
  }

  int joints() const { return bases_[0].size(); }
  const OrthonormalBasis& basis(int d) const { return bases_.at(static_cast<std::size_t>(d)); }
  const OrthonormalBasis& basis(Dim d) const { return basis(static_cast<int>(d)); }
  const TrainMeta& meta() const { return meta_; }

 private:
  std::array<OrthonormalBasis, 3> bases_;
  TrainMeta meta_;
};

struct DimensionResult {
  Matrix basis;
  DimensionTrace trace;
};

/// Runs the alternating minimization for one coordinate axis.
inline DimensionResult train_dimension(const Matrix& frames, const TrainOptions& opt) {
  const int J = static_cast<int>(frames.rows());
  require(opt.sparsity >= 1 && opt.sparsity <= J, errc::invalid_argument,
          "sparsity P=" + std::to_string(opt.sparsity) + " must be in [1, J=" + std::to_string(J) + "]");
  require(opt.max_iterations >= 1, errc::invalid_argument, "max iterations K must be >= 1");
  require(opt.tolerance >= 0 && std::isfinite(opt.tolerance), errc::invalid_argument, "tolerance must be >= 0");
  require(opt.window >= 1, errc::invalid_argument, "convergence window must be >= 1");
  require(frames.cols() >= 1, errc::invalid_argument, "no training frames");
  require(frames.allFinite(), errc::non_finite_value, "training data contains non-finite values");

  DimensionResult out;
  Matrix basis = initial_basis(opt.init, frames);
  auto& tr = out.trace;
  const double energy = frames.squaredNorm();
  // Objective value treated as an exact fit (floating-point zero relative to the data).
  const double exact_floor = 1e-24 * energy;

  Matrix coeffs = basis * frames;  // G = B M
  auto truncate_all = [&](Matrix& g) {
    for (Eigen::Index i = 0; i < g.cols(); ++i) truncate_in_place(g.col(i), opt.sparsity);
  };
  Matrix sparse = coeffs;
  truncate_all(sparse);
  double current = (coeffs - sparse).squaredNorm();
  tr.objective.push_back(current);
  tr.half_steps.push_back(current);

  for (int it = 1; it <= opt.max_iterations; ++it) {
    Matrix next = procrustes_step(frames, sparse);
    Matrix next_coeffs = next * frames;
    const double after_basis = (next_coeffs - sparse).squaredNorm();
    if (after_basis > current + exact_floor) {
      // The refit is the exact minimizer; a computed increase is rounding noise at a fixed point.
      tr.stop = StopReason::stationary;
      break;
    }
    basis = std::move(next);
    coeffs = std::move(next_coeffs);
    tr.half_steps.push_back(after_basis);
    tr.orthogonality.push_back(orthogonality_error(basis));

    sparse = coeffs;
    truncate_all(sparse);
    current = (coeffs - sparse).squaredNorm();
    tr.half_steps.push_back(current);
    tr.objective.push_back(current);
    tr.iterations = it;

    if (current <= exact_floor) {
      tr.stop = StopReason::exact_fit;
      break;
    }
    if (it >= opt.window) {
      const double past = tr.objective[static_cast<std::size_t>(it - opt.window)];
      if (past > 0 && (past - current) / past < opt.tolerance) {
        tr.stop = StopReason::tolerance;
        break;
      }
    }
  }
  out.basis = std::move(basis);
  return out;
}

/// Trains B^x, B^y, B^z independently. Dimensions run concurrently when threads > 1.
inline TransformModel train_lsdt(const TrainingBatch& batch, const TrainOptions& opt) {
  batch.validate();
  std::array<DimensionResult, 3> results;
  if (opt.threads > 1) {
    std::array<std::future<DimensionResult>, 3> jobs;
    for (int d = 0; d < 3; ++d)
      jobs[d] = std::async(std::launch::async, [&, d] { return train_dimension(batch.frames[d], opt); });
    for (int d = 0; d < 3; ++d) results[d] = jobs[d].get();
  } else {
    for (int d = 0; d < 3; ++d) results[d] = train_dimension(batch.frames[d], opt);
  }
  TrainMeta meta;
  meta.sparsity = opt.sparsity;
  meta.max_iterations = opt.max_iterations;
  meta.training_frames = static_cast<std::uint64_t>(batch.size());
  meta.init = opt.init;
  meta.tolerance = opt.tolerance;
  std::array<OrthonormalBasis, 3> bases;
  for (int d = 0; d < 3; ++d) {
    bases[d] = OrthonormalBasis(std::move(results[d].basis), BasisKind::learned, 1e-9);
    meta.traces[d] = std::move(results[d].trace);
  }
  return TransformModel(std::move(bases), std::move(meta));
}

// Model file: "LSDT" | version u16 | J u16 | P u16 | K u32 | N u64 | init u8 |
// 3 x (J x J f64 row-major, x then y then z) | CRC32.
inline constexpr std::string_view kModelMagic = "LSDT";
inline constexpr std::uint16_t kModelVersion = 1;

inline std::vector<std::uint8_t> serialize_model(const TransformModel& model) {
  io::ByteWriter w;
  w.put_bytes(kModelMagic);
  w.u16(kModelVersion);
  w.u16(static_cast<std::uint16_t>(model.joints()));
  w.u16(static_cast<std::uint16_t>(model.meta().sparsity));
  w.u32(static_cast<std::uint32_t>(model.meta().max_iterations));
  w.u64(model.meta().training_frames);
  w.u8(static_cast<std::uint8_t>(model.meta().init));
  for (int d = 0; d < 3; ++d) {
    const Matrix& b = model.basis(d).matrix();
    for (Eigen::Index r = 0; r < b.rows(); ++r)
      for (Eigen::Index c = 0; c < b.cols(); ++c) w.f64(b(r, c));
  }
  w.seal_crc32();
  return std::move(w).take();
}

/// Parses a model file. Orthogonality is checked before the CRC so that a damaged
/// matrix is reported as an invariant violation.
inline TransformModel parse_model(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, errc::format_mismatch);
  require(bytes.size() >= 4 && std::equal(kModelMagic.begin(), kModelMagic.end(), bytes.begin()),
          errc::format_mismatch, "not an LSDT model file (bad magic)");
  r.take(4);
  const auto version = r.u16();
  require(version == kModelVersion, errc::format_mismatch, "unsupported model version " + std::to_string(version));
  const int J = r.u16();
  require(J > 0, errc::format_mismatch, "model declares J=0");
  TrainMeta meta;
  meta.sparsity = r.u16();
  meta.max_iterations = static_cast<int>(r.u32());
  meta.training_frames = r.u64();
  const auto init = r.u8();
  require(init <= 3, errc::format_mismatch, "unknown init code " + std::to_string(init));
  meta.init = static_cast<InitKind>(init);
  const std::size_t body = 8u * 3u * static_cast<std::size_t>(J) * static_cast<std::size_t>(J);
  require(r.remaining() == body + 4, errc::format_mismatch,
          "model file size does not match J=" + std::to_string(J));
  std::array<OrthonormalBasis, 3> bases;
  for (int d = 0; d < 3; ++d) {
    Matrix b(J, J);
    for (int i = 0; i < J; ++i)
      for (int j = 0; j < J; ++j) b(i, j) = r.f64();
    require(b.allFinite(), errc::invariant_violation, std::string("basis ") + to_string(static_cast<Dim>(d)) +
                                                          " has non-finite entries");
    const double err = orthogonality_error(b);
    require(err <= 1e-9, errc::invariant_violation,
            std::string("basis ") + to_string(static_cast<Dim>(d)) + " is not orthogonal (max |BB^T - I| = " +
                std::to_string(err) + ")");
    bases[d] = OrthonormalBasis(std::move(b), BasisKind::learned, 1e-9);
  }
  const std::size_t crc_at = r.position();
  const auto stored = r.u32();
  require(stored == io::crc32(bytes.first(crc_at)), errc::corrupt_stream, "model file CRC mismatch");
  return TransformModel(std::move(bases), std::move(meta));
}

inline void save_model(const TransformModel& model, const std::filesystem::path& path) {
  io::write_file(path, serialize_model(model));
}

inline TransformModel load_model(const std::filesystem::path& path) { return parse_model(io::read_file(path)); }

}  // namespace mocap
