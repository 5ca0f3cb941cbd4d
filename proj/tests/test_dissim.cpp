#include "geolvq/dissim.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace geolvq;

namespace {

ProjectionMatrix diag_half() {
  Matrix om = Matrix::Identity(2, 2) / std::sqrt(2.0);
  return ProjectionMatrix(om);
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Model random_model(Variant variant, int C, Eigen::Index D, Eigen::Index M, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Model m;
  m.variant = variant;
  m.prototypes = Matrix(C, D);
  for (Eigen::Index i = 0; i < m.prototypes.size(); ++i) m.prototypes(i) = n(rng);
  m.prototypes.rowwise().normalize();
  const int k = variant == Variant::AngleLocal ? C : 1;
  for (int j = 0; j < k; ++j) {
    Matrix om(M, D);
    for (Eigen::Index i = 0; i < om.size(); ++i) om(i) = n(rng);
    m.metrics.push_back(ProjectionMatrix::normalized(om));
  }
  return m;
}

}  // namespace

TEST(Transforms, GBetaEndpointsAndValue) {
  for (double beta : {0.1, 1.0, 5.0, 50.0}) {
    EXPECT_NEAR(g_beta(1.0, beta), 0.0, 1e-15);
    EXPECT_NEAR(g_beta(-1.0, beta), 1.0, 1e-15);
  }
  const double e = std::exp(1.0);
  EXPECT_NEAR(g_beta(0.0, 1.0), (e - 1.0) / (e * e - 1.0), 1e-15);
}

TEST(Transforms, GThetaEndpointsAndValue) {
  for (double theta : {0.1, 1.0, 5.0, 100.0}) {
    EXPECT_NEAR(g_theta(-1.0, theta), 0.0, 1e-15);
    EXPECT_NEAR(g_theta(1.0, theta), 1.0, 1e-15);
  }
  const double e2 = std::exp(2.0);
  EXPECT_NEAR(g_theta(0.0, 2.0), (e2 - 1.0) / (e2 * e2 - 1.0), 1e-15);
  EXPECT_NEAR(std::exp(log_g_theta(0.3, 2.0)), g_theta(0.3, 2.0), 1e-15);
}

TEST(Transforms, Monotone) {
  double prev_b = 2.0;
  double prev_t = -1.0;
  for (int k = 0; k <= 1000; ++k) {
    const double b = -1.0 + 2.0 * k / 1000.0;
    const double gb = g_beta(b, 1.0);
    const double gt = g_theta(b, 1.0);
    EXPECT_LT(gb, prev_b);
    EXPECT_GT(gt, prev_t);
    prev_b = gb;
    prev_t = gt;
  }
}

TEST(Transforms, DerivativesMatchCentralDifferences) {
  for (double s : {0.5, 1.0, 2.0, 30.0}) {
    for (double b : {-0.7, 0.0, 0.4, 0.9}) {
      const double h = 1e-6;
      const double fb = (g_beta(b + h, s) - g_beta(b - h, s)) / (2 * h);
      const double ft = (g_theta(b + h, s) - g_theta(b - h, s)) / (2 * h);
      EXPECT_NEAR(g_beta_derivative(b, s), fb, 1e-6 * std::max(1.0, std::abs(fb)));
      EXPECT_NEAR(g_theta_derivative(b, s), ft, 1e-6 * std::max(1.0, std::abs(ft)));
    }
  }
}

TEST(Transforms, OutOfRangeCosineRejected) {
  EXPECT_THROW(g_beta(1.1, 1.0), std::domain_error);
  EXPECT_THROW(g_theta(-1.01, 1.0), std::domain_error);
  EXPECT_NO_THROW(g_beta(1.0 + 1e-12, 1.0));
}

TEST(MetricCosine, HandCases) {
  const auto om = diag_half();
  EXPECT_NEAR(metric_cosine(vec({0.3, 0.8}), vec({0.3, 0.8}), om), 1.0, 1e-15);
  EXPECT_NEAR(metric_cosine(vec({1, 0}), vec({0, 1}), om), 0.0, 1e-15);
  MaskVector m(2);
  m << true, false;
  const Vector w = vec({1, 1}) / std::sqrt(2.0);
  EXPECT_NEAR(metric_cosine(vec({1, 123.0}), m, w, om), 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(MetricCosine, NullSpaceRejected) {
  Matrix om(1, 2);
  om << 1, 0;
  EXPECT_THROW(metric_cosine(vec({0, 1}), vec({1, 1}), ProjectionMatrix(om)), std::domain_error);
}

TEST(MetricCosine, ScaleInvarianceAndZeroFillIdentity) {
  auto m = random_model(Variant::AngleGlobal, 3, 6, 4, 5);
  Vector x = vec({0.3, -1.2, 0.7, 2.0, 0.1, -0.4});
  const Vector w = m.prototypes.row(1).transpose();
  const auto& om = m.metrics.front();
  // Bit-exact for power-of-two scales; other scales differ only by rounding.
  EXPECT_EQ(metric_cosine(8.0 * x, w, om), metric_cosine(x, w, om));
  EXPECT_EQ(metric_cosine(0.25 * x, w, om), metric_cosine(x, w, om));
  EXPECT_NEAR(metric_cosine(7.3 * x, w, om), metric_cosine(x, w, om), 1e-15);
  const Vector u = om.matrix() * x;
  const Vector v = om.matrix() * w;
  EXPECT_EQ(metric_cosine(x, w, om), std::clamp(u.dot(v) / (u.norm() * v.norm()), -1.0, 1.0));
  EXPECT_NEAR(angle_dissimilarity(7.3 * x, w, om, 1.0), angle_dissimilarity(x, w, om, 1.0),
              1e-12);
}

TEST(AngleDissimilarity, SelfAndAntipodal) {
  const auto om = ProjectionMatrix::scaled_identity(3);
  const Vector a = vec({1, 2, 2}) / 3.0;
  EXPECT_NEAR(angle_dissimilarity(a, a, om, 1.0), 0.0, 1e-15);
  EXPECT_NEAR(angle_dissimilarity(a, -a, om, 1.0), 1.0, 1e-15);
}

TEST(PartialEuclidean, HandCases) {
  const auto om = diag_half();
  MaskVector m(2);
  m << true, false;
  EXPECT_NEAR(partial_euclidean(vec({1, 99}), m, vec({0, 0}), om), 1.0, 1e-15);
  const Vector x = vec({0.5, -1.0});
  const Vector w = vec({0.1, 0.2});
  const Vector d = x - w;
  EXPECT_NEAR(partial_euclidean(x, w, om), d.dot(om.lambda() * d), 1e-15);
  EXPECT_EQ(partial_euclidean(vec({3, 7}), m, vec({3, -1}), om), 0.0);
}

TEST(NearestPrototype, ExactMatchAndTieRule) {
  Model m;
  m.variant = Variant::AngleGlobal;
  m.prototypes = Matrix(3, 2);
  m.prototypes << 1, 0, 0, 1, -1, 0;
  m.metrics.push_back(ProjectionMatrix::scaled_identity(2));
  auto dec = nearest_prototype(vec({0, 2}), m);
  EXPECT_EQ(dec.label, 1);
  EXPECT_NEAR(dec.dissimilarity, 0.0, 1e-15);
  // (0, -1) is at 90 degrees from both class 0 and class 2.
  EXPECT_EQ(nearest_prototype(vec({0, -1}), m).label, 0);
}

TEST(NearestPrototype, ScaleInvariantForAngleVariants) {
  auto m = random_model(Variant::AngleLocal, 4, 5, 3, 9);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    Vector x(5);
    for (auto& v : x) v = n(rng);
    EXPECT_EQ(nearest_prototype(x, m).label, nearest_prototype(4.2 * x, m).label);
  }
}

TEST(Model, BatchMatchesPerSample) {
  for (auto variant : {Variant::AngleGlobal, Variant::AngleLocal, Variant::EuclideanPartial,
                       Variant::Probabilistic}) {
    auto m = random_model(variant, 3, 4, 2, 17);
    Matrix v(5, 4);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0.0, 1.0);
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = n(rng);
    Mask mask = Mask::Constant(5, 4, true);
    mask(1, 2) = false;
    mask(3, 0) = false;
    auto data = LabeledDataset::with_default_names(v, mask, {0, 1, 2, 0, 1}, 3);
    const Matrix d = dissimilarity_matrix(m, data);
    for (Eigen::Index i = 0; i < 5; ++i) {
      const Vector di = dissimilarities(m, v.row(i).transpose(), mask.row(i).transpose());
      for (int c = 0; c < 3; ++c) EXPECT_NEAR(d(i, c), di(c), 1e-13);
    }
  }
}

TEST(Model, ValidateRejectsWrongMetricCount) {
  auto m = random_model(Variant::AngleGlobal, 3, 4, 2, 1);
  m.variant = Variant::AngleLocal;
  EXPECT_THROW(m.validate(), std::invalid_argument);
}
