#include <cmath>

#include "test_util.hpp"

using namespace mocap;
using namespace mocap::test;

namespace {

/// Best approximation error with at most `keep` nonzeros, by exhaustive subset search.
double best_subset_error(const Vector& g, int keep) {
  const int n = static_cast<int>(g.size());
  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (std::popcount(mask) > keep) continue;
    double err = 0;
    for (int i = 0; i < n; ++i)
      if (!(mask & (1u << i))) err += g(i) * g(i);
    best = std::min(best, err);
  }
  return best;
}

}  // namespace

TEST(Transforms, DctSmallCases) {
  EXPECT_EQ(dct_matrix(1).matrix(), Matrix::Ones(1, 1));
  const Matrix u2 = dct_matrix(2).matrix();
  const double h = std::sqrt(0.5);
  EXPECT_NEAR(u2(0, 0), h, 1e-15);
  EXPECT_NEAR(u2(0, 1), h, 1e-15);
  EXPECT_NEAR(u2(1, 0), h, 1e-15);
  EXPECT_NEAR(u2(1, 1), -h, 1e-15);
  for (int L : {3, 8, 31, 240}) {
    const Matrix u = dct_matrix(L).matrix();
    EXPECT_LE((u.transpose() * u - Matrix::Identity(L, L)).cwiseAbs().maxCoeff(), 1e-12) << L;
  }
  EXPECT_ERRC(dct_matrix(0), errc::invalid_argument);
}

TEST(Transforms, DctOfConstantRow) {
  const int L = 16;
  const Eigen::RowVectorXd row = Eigen::RowVectorXd::Constant(L, 2.5);
  const Eigen::RowVectorXd c = row * dct_matrix(L).matrix();
  EXPECT_NEAR(c(0), std::sqrt(L) * 2.5, 1e-12);
  EXPECT_LE(c.tail(L - 1).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Transforms, HaarExamples) {
  const Vector a = haar_dwt_forward(Vector{{1.0, 1.0}}, 1);
  EXPECT_NEAR(a(0), std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(a(1), 0.0, 1e-15);
  const Vector b = haar_dwt_forward(Vector{{1.0, -1.0}}, 1);
  EXPECT_NEAR(b(0), 0.0, 1e-15);
  EXPECT_NEAR(b(1), std::sqrt(2.0), 1e-15);
  EXPECT_EQ(haar_padded_length(31, 3), 32);
  EXPECT_EQ(haar_padded_length(32, 3), 32);
  EXPECT_EQ(haar_padded_length(6, 3), 8);
}

TEST(Transforms, HaarRoundTripAndEnergy) {
  std::mt19937_64 rng(4);
  const Vector v = gaussian(rng, 31, 1);
  const Vector c = haar_dwt_forward(v, 3);
  ASSERT_EQ(c.size(), 32);
  EXPECT_NEAR(c.norm(), v.norm(), 1e-12);
  EXPECT_LE((haar_dwt_inverse(c, 3).head(31) - v).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Transforms, HaarBasisIsOrthonormal) {
  for (int J : {1, 2, 5, 6, 8, 31, 32}) {
    const auto h = haar_basis(J);
    EXPECT_LE(orthogonality_error(h.matrix()), 1e-12) << J;
  }
  // On lengths that need no padding, the basis agrees with the padded transform.
  std::mt19937_64 rng(5);
  const Vector v = gaussian(rng, 16, 1);
  EXPECT_LE((haar_basis(16).matrix() * v - haar_dwt_forward(v, 3)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Transforms, OrthonormalBasisRejectsNonOrthogonal) {
  Matrix m = Matrix::Identity(3, 3);
  m(0, 1) = 1e-6;
  EXPECT_ERRC(OrthonormalBasis(m, BasisKind::custom), errc::invariant_violation);
  EXPECT_ERRC(OrthonormalBasis(Matrix::Identity(2, 3), BasisKind::custom), errc::shape_mismatch);
}

TEST(Transforms, TruncateExamples) {
  EXPECT_EQ(truncate(Vector{{3.0, -5.0, 1.0, 2.0}}, 2), (Vector{{3.0, -5.0, 0.0, 0.0}}));
  const Vector g{{0.5, -2.0, 7.0}};
  EXPECT_EQ(truncate(g, 3), g);
  EXPECT_EQ(truncate(g, 0), Vector::Zero(3));
  // Ties keep the lower index.
  EXPECT_EQ(truncate(Vector{{1.0, -1.0, 1.0}}, 1), (Vector{{1.0, 0.0, 0.0}}));
  EXPECT_EQ(truncate(Vector{{0.0, 2.0, -2.0, 2.0}}, 2), (Vector{{0.0, 2.0, -2.0, 0.0}}));
  EXPECT_ERRC(truncate(g, 4), errc::invalid_argument);
  EXPECT_ERRC(truncate(g, -1), errc::invalid_argument);
}

TEST(Transforms, TruncateMatchesExhaustiveSearch) {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> len(1, 10);
  for (int t = 0; t < 300; ++t) {
    const int n = len(rng);
    const Vector g = gaussian(rng, n, 1);
    for (int keep = 0; keep <= std::min(n, 5); ++keep) {
      const Vector out = truncate(g, keep);
      EXPECT_LE((out.array() != 0).count(), keep);
      EXPECT_NEAR((g - out).squaredNorm(), best_subset_error(g, keep), 1e-12);
      EXPECT_EQ(truncate(out, keep), out);
      for (int i = 0; i < n; ++i)
        if (out(i) != 0) EXPECT_EQ(out(i), g(i));
    }
  }
}

TEST(Transforms, ApplyForwardInverse) {
  std::mt19937_64 rng(7);
  const OrthonormalBasis b(random_orthogonal(rng, 9), BasisKind::custom);
  const Matrix x = gaussian(rng, 9, 4);
  EXPECT_EQ(apply_forward(OrthonormalBasis::identity(9), x), x);
  EXPECT_EQ(apply_inverse(OrthonormalBasis::identity(9), x), x);
  EXPECT_EQ(apply_inverse(b, Matrix::Zero(9, 2)), Matrix::Zero(9, 2));
  EXPECT_LE((apply_inverse(b, apply_forward(b, x)) - x).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((apply_forward(b, apply_inverse(b, x)) - x).cwiseAbs().maxCoeff(), 1e-10);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(apply_forward(b, x.col(k)).norm(), x.col(k).norm(), 1e-10);
  EXPECT_ERRC(apply_forward(b, gaussian(rng, 8, 1)), errc::shape_mismatch);
  EXPECT_ERRC(apply_inverse(b, gaussian(rng, 8, 1)), errc::shape_mismatch);
}
