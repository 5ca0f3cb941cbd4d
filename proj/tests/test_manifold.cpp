#include "geolvq/manifold.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace geolvq;

namespace {

Vector vec3(double a, double b, double c) {
  Vector v(3);
  v << a, b, c;
  return v;
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = g(rng);
  return m;
}

Matrix random_psd(Eigen::Index d, Eigen::Index rank, std::mt19937_64& rng) {
  const Matrix om = random_matrix(rank, d, rng);
  return om.transpose() * om;
}

Matrix projector(const Matrix& u) { return u * u.transpose(); }

double sum_sq_geodesic(const Vector& m, const std::vector<Vector>& pts) {
  double s = 0.0;
  for (const auto& p : pts) {
    const double a = std::acos(std::clamp(m.dot(p), -1.0, 1.0));
    s += a * a;
  }
  return s;
}

}  // namespace

TEST(SphereKarcher, MidpointOfQuarterArc) {
  const auto m = karcher_mean_sphere({vec3(1, 0, 0), vec3(0, 1, 0)});
  EXPECT_NEAR(m(0), 1 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(m(1), 1 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(m(2), 0.0, 1e-12);
}

TEST(SphereKarcher, MinimizesSumOfSquaredGeodesics) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::vector<Vector> pts;
  for (int i = 0; i < 12; ++i) {
    Vector p = vec3(2.0 + g(rng), g(rng), g(rng));
    pts.push_back(p.normalized());
  }
  const Vector m = karcher_mean_sphere(pts);
  const double best = sum_sq_geodesic(m, pts);
  // brute-force oracle: random perturbations never improve the objective
  for (int rep = 0; rep < 2000; ++rep) {
    Vector q = m + 0.05 * vec3(g(rng), g(rng), g(rng));
    q.normalize();
    EXPECT_GE(sum_sq_geodesic(q, pts), best - 1e-12);
  }
}

TEST(SphereKarcher, WeightsPullTowardHeavierPoint) {
  const auto m = karcher_mean_sphere({vec3(1, 0, 0), vec3(0, 1, 0)}, {0.75, 0.25});
  EXPECT_NEAR(std::atan2(m(1), m(0)), std::numbers::pi / 8, 1e-12);
}

TEST(SphereKarcher, HalfSphereViolationThrows) {
  const std::vector<Vector> pts{vec3(1, 0, 0), vec3(-1, 0, 0), vec3(0, 1, 0), vec3(0, -1, 0)};
  EXPECT_THROW(karcher_mean_sphere(pts), std::domain_error);
}

TEST(SphereKarcher, WideButValidSetConverges) {
  // spread over more than a quarter sphere; the hull search must find a center
  const std::vector<Vector> pts{vec3(1, 0, 0.05).normalized(), vec3(-0.95, 0.1, 0.3).normalized(),
                                vec3(0, 1, 0.02).normalized(), vec3(0, -1, 0.02).normalized()};
  const auto r = karcher_mean_sphere_detailed(pts, {0.25, 0.25, 0.25, 0.25});
  EXPECT_LT(r.tangent_norm, 1e-12);
}

TEST(Grassmann, OrthogonalLinesAreRightAngle) {
  Matrix a = Matrix::Zero(3, 1), b = Matrix::Zero(3, 1);
  a(0, 0) = 1;
  b(1, 0) = 1;
  EXPECT_NEAR(grassmann_distance(a, b), std::numbers::pi / 2, 1e-15);
}

TEST(Grassmann, SmallAnglesAccurate) {
  for (double theta : {1e-9, 1e-5, 0.3, 1.2}) {
    Matrix a = Matrix::Zero(4, 2), b = Matrix::Zero(4, 2);
    a(0, 0) = 1;
    a(1, 1) = 1;
    b(0, 0) = std::cos(theta);
    b(2, 0) = std::sin(theta);
    b(1, 1) = 1;
    const auto ang = grassmann_principal_angles(a, b);
    EXPECT_NEAR(ang(0), 0.0, 1e-15);
    EXPECT_NEAR(ang(1), theta, 1e-12 * std::max(1.0, theta) + theta * 1e-9);
  }
}

TEST(Grassmann, DistanceIgnoresBasisChoice) {
  std::mt19937_64 rng(8);
  const Matrix u = orthonormalize(random_matrix(6, 3, rng));
  const Matrix v = orthonormalize(random_matrix(6, 3, rng));
  const Matrix rot = orthonormalize(random_matrix(3, 3, rng));
  EXPECT_NEAR(grassmann_distance(u, v), grassmann_distance(u * rot, v), 1e-12);
  EXPECT_NEAR(grassmann_distance(u, u * rot), 0.0, 1e-7);
}

TEST(Grassmann, ExpOfLogReachesTarget) {
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix y = orthonormalize(random_matrix(7, 2, rng));
    const Matrix x = orthonormalize(y + 0.4 * random_matrix(7, 2, rng));
    const Matrix h = grassmann_log(y, x);
    // tangent: Y'H = 0, and |H| is the distance
    EXPECT_LT((y.transpose() * h).norm(), 1e-12);
    EXPECT_NEAR(h.norm(), grassmann_distance(y, x), 1e-10);
    EXPECT_LT((projector(grassmann_exp(y, h)) - projector(x)).norm(), 1e-10);
  }
}

TEST(Grassmann, MeanOfTwoIsMidpoint) {
  std::mt19937_64 rng(10);
  const Matrix a = orthonormalize(random_matrix(5, 2, rng));
  const Matrix b = orthonormalize(a + 0.1 * random_matrix(5, 2, rng));
  const auto m = subspace_karcher_mean({a, b});
  const double d = grassmann_distance(a, b);
  EXPECT_NEAR(grassmann_distance(m.basis, a), d / 2, 1e-9);
  EXPECT_NEAR(grassmann_distance(m.basis, b), d / 2, 1e-9);
  EXPECT_TRUE(m.warnings.empty());
}

TEST(Grassmann, WarnsBeyondUniquenessRadius) {
  Matrix a = Matrix::Zero(3, 1), b = Matrix::Zero(3, 1);
  a(0, 0) = 1;
  b(0, 0) = std::cos(0.7);
  b(1, 0) = std::sin(0.7);
  const auto m = subspace_karcher_mean({a, b});
  EXPECT_EQ(m.warnings.size(), 1u);
}

TEST(Spd, GeometricMeanOfSwappedDiagonals) {
  const Matrix a = Vector(vec3(1, 4, 0).head(2)).asDiagonal();
  const Matrix b = Vector(vec3(4, 1, 0).head(2)).asDiagonal();
  const Matrix g = spd_geometric_mean({a, b});
  EXPECT_NEAR((g - 2.0 * Matrix::Identity(2, 2)).norm(), 0.0, 1e-12);
}

TEST(Spd, GeometricMeanSolvesRiccati) {
  std::mt19937_64 rng(12);
  const Matrix a = random_psd(4, 4, rng) + Matrix::Identity(4, 4);
  const Matrix b = random_psd(4, 4, rng) + Matrix::Identity(4, 4);
  const Matrix g = spd_geometric_mean({a, b});
  EXPECT_LT((g * a.inverse() * g - b).norm(), 1e-9 * b.norm());
}

TEST(Spd, KarcherMeanOfCommutingMatrices) {
  std::vector<Matrix> mats;
  Vector expect = Vector::Ones(3);
  for (int k = 0; k < 4; ++k) {
    const Vector d = vec3(1 + k, 2.0 / (1 + k), 3 + 0.5 * k);
    mats.push_back(d.asDiagonal());
    expect = expect.cwiseProduct(d);
  }
  expect = expect.array().pow(0.25);
  const Matrix g = spd_geometric_mean(mats);
  EXPECT_LT((g - Matrix(expect.asDiagonal())).norm(), 1e-10);
}

TEST(Spd, KarcherMeanIsPermutationInvariant) {
  std::mt19937_64 rng(13);
  std::vector<Matrix> mats;
  for (int k = 0; k < 4; ++k) mats.push_back(random_psd(3, 3, rng) + 0.5 * Matrix::Identity(3, 3));
  const Matrix g1 = spd_geometric_mean(mats);
  std::swap(mats[0], mats[3]);
  std::swap(mats[1], mats[2]);
  EXPECT_LT((g1 - spd_geometric_mean(mats)).norm(), 1e-9);
}

TEST(PsdMean, Idempotent) {
  std::mt19937_64 rng(14);
  const Matrix l = random_psd(6, 3, rng);
  const Matrix m = psd_mean({l, l, l});
  EXPECT_LT((m - l).norm(), 1e-9 * l.norm());
}

TEST(PsdMean, PreservesRank) {
  std::mt19937_64 rng(15);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<Matrix> ls;
    const Matrix base = random_psd(8, 3, rng);
    for (int k = 0; k < 5; ++k) {
      const Matrix om = random_matrix(3, 8, rng);
      Eigen::SelfAdjointEigenSolver<Matrix> es(base);
      const Matrix top = es.eigenvectors().rightCols(3).transpose();
      const Matrix o = top + 0.2 * om;
      ls.push_back(o.transpose() * o);
    }
    const Matrix m = psd_mean(ls);
    EXPECT_EQ(numerical_rank(m), 3);
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-10);
  }
}

TEST(PsdMean, DiagonalCase) {
  const Matrix l1 = Vector(vec3(1, 4, 0)).asDiagonal();
  const Matrix l2 = Vector(vec3(4, 1, 0)).asDiagonal();
  const Matrix m = psd_mean({l1, l2});
  EXPECT_LT((m - Matrix(Vector(vec3(2, 2, 0)).asDiagonal())).norm(), 1e-10);
}

TEST(PsdMean, RankMismatchThrows) {
  const Matrix l1 = Vector(vec3(1, 4, 0)).asDiagonal();
  const Matrix l2 = Vector(vec3(4, 0, 0)).asDiagonal();
  EXPECT_THROW(psd_mean({l1, l2}), std::invalid_argument);
}

TEST(PsdConvex, Endpoints) {
  std::mt19937_64 rng(16);
  const Matrix l1 = random_psd(5, 2, rng);
  const Matrix l2 = random_psd(5, 2, rng);
  EXPECT_LT((psd_convex_combination(l1, l2, 0.0) - l1).norm(), 1e-9 * l1.norm());
  EXPECT_LT((psd_convex_combination(l1, l2, 1.0) - l2).norm(), 1e-9 * l2.norm());
}

TEST(PsdConvex, MidpointMatchesMean) {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 10; ++rep) {
    const Matrix l1 = random_psd(6, 3, rng);
    const Matrix l2 = random_psd(6, 3, rng);
    const Matrix c = psd_convex_combination(l1, l2, 0.5);
    EXPECT_LT((c - psd_mean({l1, l2})).norm(), 1e-8 * l1.norm());
    EXPECT_EQ(numerical_rank(c), 3);
  }
}

TEST(PsdConvex, SharedRangeIsSpdGeodesic) {
  // same range: the combination reduces to the SPD geodesic in that range
  const Matrix l1 = Vector(vec3(1, 9, 0)).asDiagonal();
  const Matrix l2 = Vector(vec3(4, 1, 0)).asDiagonal();
  const Matrix c = psd_convex_combination(l1, l2, 0.25);
  EXPECT_NEAR(c(0, 0), std::pow(4.0, 0.25), 1e-12);
  EXPECT_NEAR(c(1, 1), std::pow(9.0, 0.75), 1e-12);
  EXPECT_NEAR(c(2, 2), 0.0, 1e-14);
}

// Spread wide enough that the unit fixed-point step cycles.
TEST(Spd, KarcherMeanOfWidelySpreadMatrices) {
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> ex(-5.0, 5.0);
  std::vector<Matrix> mats;
  for (int i = 0; i < 8; ++i) {
    const Eigen::HouseholderQR<Matrix> qr(random_matrix(10, 10, rng));
    const Matrix q = qr.householderQ();
    Vector ev(10);
    for (auto& e : ev) e = std::exp(ex(rng));
    mats.push_back(q * ev.asDiagonal() * q.transpose());
  }
  const Matrix x = spd_geometric_mean(mats);
  const Matrix ih = spd_inv_sqrt(x);
  Matrix s = Matrix::Zero(10, 10);
  for (const auto& a : mats) s += spd_log(ih * a * ih);
  EXPECT_LT(s.norm() / 8.0, 1e-6);

  const Matrix g = random_matrix(10, 10, rng) + 4.0 * Matrix::Identity(10, 10);
  std::vector<Matrix> moved;
  for (const auto& a : mats) moved.push_back(g * a * g.transpose());
  const Matrix gx = g * x * g.transpose();
  EXPECT_LT((spd_geometric_mean(moved) - gx).norm() / gx.norm(), 1e-8);
}
