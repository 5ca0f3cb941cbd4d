#include "geolvq/cluster.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

using namespace geolvq;

namespace {

Matrix euclidean_distances(const Matrix& pts) {
  const auto n = pts.rows();
  Matrix d = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) d(i, j) = (pts.row(i) - pts.row(j)).norm();
  }
  return d;
}

// Ward from first principles: merge the pair minimizing the increase in
// within-cluster sum of squares; height sqrt(2 nA nB / (nA + nB)) |muA - muB|.
std::vector<double> brute_force_ward_heights(const Matrix& pts) {
  std::vector<std::vector<Eigen::Index>> clusters;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) clusters.push_back({i});
  std::vector<double> heights;
  auto centroid = [&](const std::vector<Eigen::Index>& c) {
    Eigen::RowVectorXd m = Eigen::RowVectorXd::Zero(pts.cols());
    for (auto i : c) m += pts.row(i);
    return (m / static_cast<double>(c.size())).eval();
  };
  while (clusters.size() > 1) {
    double best = 1e300;
    size_t ba = 0, bb = 0;
    for (size_t a = 0; a < clusters.size(); ++a) {
      for (size_t b = a + 1; b < clusters.size(); ++b) {
        const double na = static_cast<double>(clusters[a].size());
        const double nb = static_cast<double>(clusters[b].size());
        const double h =
            std::sqrt(2 * na * nb / (na + nb)) * (centroid(clusters[a]) - centroid(clusters[b])).norm();
        if (h < best) {
          best = h;
          ba = a;
          bb = b;
        }
      }
    }
    heights.push_back(best);
    clusters[ba].insert(clusters[ba].end(), clusters[bb].begin(), clusters[bb].end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bb));
  }
  return heights;
}

}  // namespace

TEST(Ward, TwoSeparatedGroups) {
  Matrix pts(6, 2);
  pts << 0, 0, 0.1, 0, 0, 0.1, 10, 10, 10.1, 10, 10, 10.1;
  const auto tree = ward_linkage(euclidean_distances(pts), WardVariant::Raw);
  const auto label = tree.cut(2);
  EXPECT_EQ(label, (std::vector<int>{0, 0, 0, 1, 1, 1}));
  const auto mem = tree.members(2);
  EXPECT_EQ(mem[0], (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(mem[1], (std::vector<int>{3, 4, 5}));
}

TEST(Ward, RawHandComputedHeights) {
  Matrix pts(4, 1);
  pts << 0, 1, 5, 6;
  const auto tree = ward_linkage(euclidean_distances(pts), WardVariant::Raw);
  const auto h = tree.heights();
  ASSERT_EQ(h.size(), 3u);
  EXPECT_DOUBLE_EQ(h[0], 1.0);
  EXPECT_DOUBLE_EQ(h[1], 1.0);
  EXPECT_DOUBLE_EQ(h[2], 9.0);
  // tie between (0,1) and (2,3): lowest pair merges first
  EXPECT_EQ(tree.merges()[0].left, 0);
  EXPECT_EQ(tree.merges()[0].right, 1);
}

TEST(Ward, SquaredMatchesCentroidOracle) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int rep = 0; rep < 10; ++rep) {
    Matrix pts(12, 3);
    for (Eigen::Index i = 0; i < pts.size(); ++i) pts(i) = g(rng);
    const auto h = ward_linkage(euclidean_distances(pts), WardVariant::Squared).heights();
    const auto expect = brute_force_ward_heights(pts);
    ASSERT_EQ(h.size(), expect.size());
    for (size_t i = 0; i < h.size(); ++i) EXPECT_NEAR(h[i], expect[i], 1e-10);
  }
}

TEST(Ward, HeightsMonotone) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  Matrix pts(20, 2);
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts(i) = g(rng);
  const auto h = ward_linkage(euclidean_distances(pts), WardVariant::Squared).heights();
  for (size_t i = 1; i < h.size(); ++i) EXPECT_GE(h[i], h[i - 1] - 1e-12);
}

TEST(Ward, CutsAreNested) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  Matrix pts(15, 2);
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts(i) = g(rng);
  const auto tree = ward_linkage(euclidean_distances(pts));
  for (int n = 1; n < 15; ++n) {
    const auto coarse = tree.cut(n);
    const auto fine = tree.cut(n + 1);
    std::set<int> seen(fine.begin(), fine.end());
    EXPECT_EQ(seen.size(), static_cast<size_t>(n + 1));
    for (int i = 0; i < 15; ++i) {
      for (int j = 0; j < 15; ++j) {
        if (fine[static_cast<size_t>(i)] == fine[static_cast<size_t>(j)]) {
          EXPECT_EQ(coarse[static_cast<size_t>(i)], coarse[static_cast<size_t>(j)]);
        }
      }
    }
  }
  auto order = tree.leaf_order();
  std::sort(order.begin(), order.end());
  for (int i = 0; i < 15; ++i) EXPECT_EQ(order[static_cast<size_t>(i)], i);
}

TEST(Ward, SingleLeaf) {
  const auto tree = ward_linkage(Matrix::Zero(1, 1));
  EXPECT_EQ(tree.cut(1), std::vector<int>{0});
  EXPECT_EQ(tree.leaf_order(), std::vector<int>{0});
}

TEST(Ward, RejectsInvalidDistances) {
  Matrix d = Matrix::Zero(3, 3);
  d(0, 1) = 1;
  EXPECT_THROW(ward_linkage(d), std::invalid_argument);
  d(1, 0) = 1;
  d(2, 2) = 0.5;
  EXPECT_THROW(ward_linkage(d), std::invalid_argument);
  d(2, 2) = 0;
  d(0, 2) = d(2, 0) = -1;
  EXPECT_THROW(ward_linkage(d), std::invalid_argument);
  EXPECT_THROW(ward_linkage(Matrix::Zero(2, 3)), std::invalid_argument);
  EXPECT_THROW(ward_linkage(Matrix::Zero(3, 3)).cut(4), std::invalid_argument);
}
