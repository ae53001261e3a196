#pragma once

// Orthonormal bases (temporal/spatial DCT, Haar DWT, learned) and the
// hard-truncation operator.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mocap/error.hpp"

namespace mocap {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class BasisKind { dct, haar_dwt, learned, custom };

/// Largest absolute entry of Q Q^T - I and Q^T Q - I.
inline double orthogonality_error(const Matrix& q) {
  if (q.rows() != q.cols()) return std::numeric_limits<double>::infinity();
  const auto n = q.rows();
  const Matrix id = Matrix::Identity(n, n);
  return std::max((q * q.transpose() - id).cwiseAbs().maxCoeff(), (q.transpose() * q - id).cwiseAbs().maxCoeff());
}

/// A square orthogonal matrix. Construction checks the orthogonality invariant.
class OrthonormalBasis {
 public:
  static constexpr double kTolerance = 1e-10;

  OrthonormalBasis() = default;

  OrthonormalBasis(Matrix matrix, BasisKind kind, double tolerance = kTolerance)
      : matrix_(std::move(matrix)), kind_(kind) {
    require(matrix_.rows() > 0 && matrix_.rows() == matrix_.cols(), errc::shape_mismatch,
            "basis must be a non-empty square matrix");
    require(matrix_.allFinite(), errc::non_finite_value, "basis has non-finite entries");
    const double err = orthogonality_error(matrix_);
    require(err <= tolerance, errc::invariant_violation,
            "basis is not orthogonal (max |QQ^T - I| = " + std::to_string(err) + ")");
  }

  static OrthonormalBasis identity(int n) { return {Matrix::Identity(n, n), BasisKind::custom}; }

  int size() const { return static_cast<int>(matrix_.rows()); }
  const Matrix& matrix() const { return matrix_; }
  BasisKind kind() const { return kind_; }

 private:
  Matrix matrix_;
  BasisKind kind_ = BasisKind::custom;
};

/// Orthonormal DCT-II in row-vector form: entry (n, k) = a_k cos(pi (2n+1) k / 2L),
/// so that a length-L row vector times this matrix gives its DCT coefficients.
inline OrthonormalBasis dct_matrix(int length) {
  require(length >= 1, errc::invalid_argument, "DCT length must be >= 1");
  const double L = length;
  Matrix u(length, length);
  for (int n = 0; n < length; ++n) {
    for (int k = 0; k < length; ++k) {
      const double alpha = k == 0 ? std::sqrt(1.0 / L) : std::sqrt(2.0 / L);
      u(n, k) = alpha * std::cos(std::numbers::pi * (2.0 * n + 1.0) * k / (2.0 * L));
    }
  }
  return {std::move(u), BasisKind::dct};
}

/// Spatial DCT as an analysis operator: coefficients = matrix * frame.
inline OrthonormalBasis spatial_dct_basis(int joints) {
  return {dct_matrix(joints).matrix().transpose(), BasisKind::dct};
}

/// Smallest multiple of 2^levels that is >= n.
inline int haar_padded_length(int n, int levels) {
  const int block = 1 << levels;
  return (n + block - 1) / block * block;
}

/// Multi-level orthonormal Haar analysis. The input is zero-padded to a multiple
/// of 2^levels; the output uses the usual layout [approx | detail_L | ... | detail_1].
inline Vector haar_dwt_forward(const Vector& v, int levels) {
  require(levels >= 1 && levels < 30, errc::invalid_argument, "Haar levels must be in [1, 29]");
  const int padded = haar_padded_length(static_cast<int>(v.size()), levels);
  Vector cur = Vector::Zero(padded);
  cur.head(v.size()) = v;
  Vector tmp(padded);
  const double s = std::numbers::sqrt2 / 2.0;
  int n = padded;
  for (int l = 0; l < levels; ++l) {
    const int half = n / 2;
    for (int k = 0; k < half; ++k) {
      tmp(k) = s * (cur(2 * k) + cur(2 * k + 1));
      tmp(half + k) = s * (cur(2 * k) - cur(2 * k + 1));
    }
    cur.head(n) = tmp.head(n);
    n = half;
  }
  return cur;
}

/// Inverse of haar_dwt_forward on the padded length; callers truncate to the original size.
inline Vector haar_dwt_inverse(const Vector& coeffs, int levels) {
  require(levels >= 1 && levels < 30, errc::invalid_argument, "Haar levels must be in [1, 29]");
  const int padded = static_cast<int>(coeffs.size());
  require(padded % (1 << levels) == 0, errc::shape_mismatch, "Haar coefficient length must be a multiple of 2^levels");
  Vector cur = coeffs;
  Vector tmp(padded);
  const double s = std::numbers::sqrt2 / 2.0;
  int n = padded >> (levels - 1);
  for (int l = 0; l < levels; ++l) {
    const int half = n / 2;
    for (int k = 0; k < half; ++k) {
      tmp(2 * k) = s * (cur(k) + cur(half + k));
      tmp(2 * k + 1) = s * (cur(k) - cur(half + k));
    }
    cur.head(n) = tmp.head(n);
    n *= 2;
  }
  return cur;
}

/// J x J Haar analysis matrix usable as a spatial transform for any J. At each level,
/// an odd trailing sample is carried to the next level unchanged; for J divisible by
/// 2^levels this is exactly the matrix of haar_dwt_forward.
inline OrthonormalBasis haar_basis(int joints, int levels = 3) {
  require(joints >= 1, errc::invalid_argument, "Haar basis size must be >= 1");
  require(levels >= 1, errc::invalid_argument, "Haar levels must be >= 1");
  Matrix h = Matrix::Identity(joints, joints);
  const double s = std::numbers::sqrt2 / 2.0;
  int n = joints;
  for (int l = 0; l < levels && n >= 2; ++l) {
    const int pairs = n / 2;
    const bool odd = n % 2 == 1;
    const int approx = pairs + (odd ? 1 : 0);
    // Stage operator on the first n rows: approximations first, then details.
    Matrix stage = Matrix::Identity(joints, joints);
    stage.topLeftCorner(n, n).setZero();
    for (int k = 0; k < pairs; ++k) {
      stage(k, 2 * k) = s;
      stage(k, 2 * k + 1) = s;
      stage(approx + k, 2 * k) = s;
      stage(approx + k, 2 * k + 1) = -s;
    }
    if (odd) stage(pairs, n - 1) = 1.0;
    h = stage * h;
    n = approx;
  }
  return {std::move(h), BasisKind::haar_dwt};
}

/// Indices of the P largest-magnitude entries; ties go to the lower index.
inline std::vector<int> largest_magnitude_support(const Eigen::Ref<const Vector>& g, int keep) {
  const int n = static_cast<int>(g.size());
  require(keep >= 0 && keep <= n, errc::invalid_argument,
          "sparsity " + std::to_string(keep) + " out of range [0, " + std::to_string(n) + "]");
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  auto before = [&g](int a, int b) {
    const double ma = std::abs(g(a));
    const double mb = std::abs(g(b));
    return ma > mb || (ma == mb && a < b);
  };
  if (keep < n) std::nth_element(idx.begin(), idx.begin() + keep, idx.end(), before);
  idx.resize(static_cast<std::size_t>(keep));
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// Zeroes all but the `keep` largest-magnitude entries in place.
inline void truncate_in_place(Eigen::Ref<Vector> g, int keep) {
  const int n = static_cast<int>(g.size());
  if (keep == n) return;
  const auto support = largest_magnitude_support(g, keep);
  Vector out = Vector::Zero(n);
  for (int i : support) out(i) = g(i);
  g = out;
}

/// Best approximation of g with at most `keep` nonzeros (hard truncation).
inline Vector truncate(const Vector& g, int keep) {
  Vector out = g;
  truncate_in_place(out, keep);
  return out;
}

/// B * X.
inline Matrix apply_forward(const OrthonormalBasis& basis, const Matrix& x) {
  require(x.rows() == basis.size(), errc::shape_mismatch,
          "apply_forward: basis is " + std::to_string(basis.size()) + "x" + std::to_string(basis.size()) +
              " but input has " + std::to_string(x.rows()) + " rows");
  return basis.matrix() * x;
}

/// B^T * Y.
inline Matrix apply_inverse(const OrthonormalBasis& basis, const Matrix& y) {
  require(y.rows() == basis.size(), errc::shape_mismatch,
          "apply_inverse: basis is " + std::to_string(basis.size()) + "x" + std::to_string(basis.size()) +
              " but input has " + std::to_string(y.rows()) + " rows");
  return basis.matrix().transpose() * y;
}

}  // namespace mocap
