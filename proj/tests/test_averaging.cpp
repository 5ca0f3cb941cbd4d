#include "geolvq/averaging.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace geolvq;

namespace {

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

LabeledDataset gaussian_data(Eigen::Index n, Eigen::Index d, int C, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Matrix v(n, d);
  std::vector<ClassIndex> y;
  for (Eigen::Index i = 0; i < n; ++i) {
    y.push_back(static_cast<ClassIndex>(i % C));
    for (Eigen::Index j = 0; j < d; ++j) v(i, j) = g(rng) + (j == y.back() ? 2.0 : 0.0);
  }
  std::vector<std::string> names, cls;
  for (Eigen::Index j = 0; j < d; ++j) names.push_back("f" + std::to_string(j));
  for (int c = 0; c < C; ++c) cls.push_back("c" + std::to_string(c));
  return LabeledDataset(v, Mask::Constant(n, d, true), y, names, cls);
}

// small rotation of the rows' span: Omega -> Omega (I + eps A), A skew
Model perturbed(const Model& m, double eps, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Model out = m;
  const auto D = m.dim();
  for (auto& p : out.metrics) {
    Matrix a(D, D);
    for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = n(rng);
    a = 0.5 * (a - a.transpose()).eval();
    p = ProjectionMatrix::normalized(p.matrix() * (Matrix::Identity(D, D) + eps * a));
  }
  for (Eigen::Index c = 0; c < out.prototypes.rows(); ++c) {
    for (Eigen::Index j = 0; j < D; ++j) out.prototypes(c, j) += eps * n(rng);
  }
  out.prototypes.rowwise().normalize();
  return out;
}

}  // namespace

TEST(Averaging, CopiesAverageToThemselves) {
  for (Variant v : {Variant::AngleGlobal, Variant::AngleLocal, Variant::EuclideanPartial}) {
    const Model m = random_model(v, 3, 6, 2, 11);
    const auto res = average_models({m, m, m}, 1);
    ASSERT_EQ(res.clusters.size(), 1u);
    const Model& a = res.clusters[0].model;
    EXPECT_LT((a.prototypes - m.prototypes).norm(), 1e-9) << to_string(v);
    for (size_t k = 0; k < m.metrics.size(); ++k) {
      EXPECT_LT((a.metrics[k].lambda() - m.metrics[k].lambda()).norm(), 1e-9) << to_string(v);
      EXPECT_NEAR(a.metrics[k].trace(), 1.0, 1e-12);
    }
    EXPECT_EQ(res.rank, 2);
    EXPECT_LT(res.distances.norm(), 1e-6);
  }
}

TEST(Averaging, EuclideanPrototypesAreArithmeticMean) {
  Model a = random_model(Variant::EuclideanPartial, 2, 4, 2, 1);
  Model b = a;
  b.prototypes *= 3.0;
  const auto res = average_models({a, b}, 1);
  EXPECT_LT((res.clusters[0].model.prototypes - 2.0 * a.prototypes).norm(), 1e-12);
}

TEST(Averaging, DistancesAreSymmetricAndBasisInvariant) {
  const Model a = random_model(Variant::AngleGlobal, 3, 5, 2, 3);
  const Model b = random_model(Variant::AngleGlobal, 3, 5, 2, 4);
  Model a_rot = a;
  Matrix q(2, 2);
  q << 0.6, -0.8, 0.8, 0.6;
  a_rot.metrics[0] = ProjectionMatrix(q * a.metrics[0].matrix());
  const Matrix d = model_distances({a, b, a_rot}, 2);
  EXPECT_LT((d - d.transpose()).norm(), 1e-15);
  EXPECT_NEAR(d(0, 2), 0.0, 1e-7);
  EXPECT_GT(d(0, 1), 1e-3);
  EXPECT_NEAR(d(0, 1), d(2, 1), 1e-7);
}

TEST(Averaging, RecoversTwoGroups) {
  const Model a = random_model(Variant::AngleGlobal, 3, 6, 2, 21);
  const Model b = random_model(Variant::AngleGlobal, 3, 6, 2, 22);
  std::vector<Model> ms;
  for (int i = 0; i < 4; ++i) ms.push_back(perturbed(i % 2 ? b : a, 0.02, 100 + static_cast<std::uint64_t>(i)));
  const auto res = average_models(ms, 2);
  ASSERT_EQ(res.clusters.size(), 2u);
  EXPECT_EQ(res.clusters[0].members, (std::vector<int>{0, 2}));
  EXPECT_EQ(res.clusters[1].members, (std::vector<int>{1, 3}));
  // each average stays close to its own group's range
  const auto basis = [](const Model& m) { return factorize_psd(m.metrics[0].lambda(), 2).u; };
  EXPECT_LT(grassmann_distance(basis(res.clusters[0].model), basis(a)), 0.1);
  EXPECT_LT(grassmann_distance(basis(res.clusters[1].model), basis(b)), 0.1);
}

TEST(Averaging, TrainingScoresAndBestCluster) {
  const auto data = gaussian_data(90, 4, 3, 5);
  TrainConfig cfg;
  cfg.rank = 2;
  cfg.epochs = 100;
  std::vector<Model> ms;
  for (std::uint64_t s = 1; s <= 3; ++s) {
    cfg.seed = s;
    ms.push_back(train_model(data, cfg).model);
  }
  const auto res = average_models(ms, 2, &data);
  for (const auto& cl : res.clusters) ASSERT_TRUE(cl.train_macro.has_value());
  const auto& best = res.best();
  for (const auto& cl : res.clusters) EXPECT_GE(*best.train_macro, *cl.train_macro);

  const auto elbow = cluster_diagnostics(ms, 5, data);
  ASSERT_EQ(elbow.size(), 3u);
  for (size_t n = 0; n < elbow.size(); ++n) {
    EXPECT_EQ(elbow[n].clusters, static_cast<int>(n + 1));
    EXPECT_EQ(elbow[n].train_macro.size(), n + 1);
    int total = 0;
    for (int s : elbow[n].sizes) total += s;
    EXPECT_EQ(total, 3);
  }
  EXPECT_NEAR(elbow[1].train_macro[0] + elbow[1].train_macro[1],
              res.clusters[0].train_macro.value() + res.clusters[1].train_macro.value(), 1e-12);
}

TEST(Averaging, BestPrefersLargerClusterOnTies) {
  AverageResult r;
  r.clusters.resize(2);
  r.clusters[0].members = {0};
  r.clusters[1].members = {1, 2};
  r.clusters[0].train_macro = 0.8;
  r.clusters[1].train_macro = 0.8;
  EXPECT_EQ(&r.best(), &r.clusters[1]);
  r.clusters[0].train_macro = 0.9;
  EXPECT_EQ(&r.best(), &r.clusters[0]);
}

TEST(Averaging, TruncatesToCommonRank) {
  const Model a = random_model(Variant::AngleGlobal, 2, 5, 3, 7);
  Model b = random_model(Variant::AngleGlobal, 2, 5, 3, 8);
  Matrix om = b.metrics[0].matrix();
  om.row(2) = 0.5 * om.row(0) - om.row(1);
  b.metrics[0] = ProjectionMatrix::normalized(om);
  const auto res = average_models({a, b}, 1);
  EXPECT_EQ(res.rank, 2);
  ASSERT_FALSE(res.warnings.empty());
  EXPECT_NE(res.warnings[0].find("common rank 2"), std::string::npos);
  EXPECT_EQ(numerical_rank(res.clusters[0].model.metrics[0].lambda()), 2);
}

TEST(Averaging, RejectsIncompatibleModels) {
  const Model a = random_model(Variant::AngleGlobal, 3, 5, 2, 1);
  EXPECT_THROW(average_models({}, 1), std::invalid_argument);
  EXPECT_THROW(average_models({a, random_model(Variant::AngleGlobal, 3, 5, 3, 2)}, 1), std::invalid_argument);
  try {
    average_models({a, random_model(Variant::AngleGlobal, 3, 5, 3, 2)}, 1);
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("equal rank"), std::string::npos);
  }
  EXPECT_THROW(average_models({a, random_model(Variant::AngleLocal, 3, 5, 2, 2)}, 1), std::invalid_argument);
  EXPECT_THROW(average_models({a, random_model(Variant::AngleGlobal, 4, 5, 2, 2)}, 1), std::invalid_argument);
  Model s = a;
  s.steepness = 2.0;
  EXPECT_THROW(average_models({a, s}, 1), std::invalid_argument);
  EXPECT_THROW(average_models({a, a}, 3), std::invalid_argument);
  EXPECT_THROW(average_models({a, a}, 0), std::invalid_argument);
}

TEST(Averaging, AntipodalPrototypesHaveNoMean) {
  const Model a = random_model(Variant::AngleGlobal, 2, 3, 2, 1);
  Model b = a;
  b.prototypes.row(1) *= -1.0;
  try {
    average_models({a, b}, 1);
    FAIL() << "expected a domain error";
  } catch (const std::domain_error& e) {
    EXPECT_NE(std::string(e.what()).find("class 1"), std::string::npos);
  }
}

TEST(MajorityVote, IdenticalModelsMatchSinglePrediction) {
  const auto data = gaussian_data(60, 5, 3, 9);
  const Model m = random_model(Variant::AngleGlobal, 3, 5, 3, 4);
  EXPECT_EQ(majority_vote({m, m, m}, data), predict(m, data));
}

TEST(MajorityVote, MajorityAndTieBreak) {
  const auto data = gaussian_data(60, 5, 3, 9);
  const Model a = random_model(Variant::AngleGlobal, 3, 5, 3, 4);
  const Model b = random_model(Variant::AngleGlobal, 3, 5, 3, 5);
  const auto pa = predict(a, data);
  const auto pb = predict(b, data);
  EXPECT_EQ(majority_vote({a, b, a}, data), pa);
  const auto tie = majority_vote({a, b}, data);
  for (size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(tie[i], std::min(pa[i], pb[i]));
  EXPECT_THROW(majority_vote({}, data), std::invalid_argument);
}
