#pragma once

// Agglomerative Ward clustering on a precomputed distance matrix.
//
// Ward::Raw applies the Lance-Williams Ward update to the distances as given
// (R's "ward.D"); Ward::Squared applies it to squared distances and reports
// square-rooted heights ("ward.D2"). The dendrogram is kept so that any
// number of clusters can be cut from one run.

#include "geolvq/core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace geolvq {

enum class WardVariant { Raw, Squared };

struct Merge {
  int left;    // node ids: leaves 0..k-1, merge m creates node k+m
  int right;
  double height;
  int size;
};

class Dendrogram {
 public:
  Dendrogram(int leaves, std::vector<Merge> merges)
      : leaves_(leaves), merges_(std::move(merges)) {}

  int leaves() const { return leaves_; }
  const std::vector<Merge>& merges() const { return merges_; }

  /// Cluster id per leaf for n clusters. Ids are numbered by the smallest
  /// leaf they contain, so the labelling does not depend on merge order.
  std::vector<int> cut(int n) const {
    if (n < 1 || n > leaves_) throw std::invalid_argument("cluster count out of range");
    std::vector<int> parent(static_cast<size_t>(leaves_ + static_cast<int>(merges_.size())));
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int a) {
      while (parent[static_cast<size_t>(a)] != a) a = parent[static_cast<size_t>(a)];
      return a;
    };
    const int applied = leaves_ - n;
    for (int m = 0; m < applied; ++m) {
      const int node = leaves_ + m;
      parent[static_cast<size_t>(find(merges_[static_cast<size_t>(m)].left))] = node;
      parent[static_cast<size_t>(find(merges_[static_cast<size_t>(m)].right))] = node;
    }
    std::vector<int> root(static_cast<size_t>(leaves_));
    for (int i = 0; i < leaves_; ++i) root[static_cast<size_t>(i)] = find(i);
    std::vector<int> label(static_cast<size_t>(leaves_), -1);
    int next = 0;
    for (int i = 0; i < leaves_; ++i) {
      if (label[static_cast<size_t>(i)] >= 0) continue;
      for (int j = i; j < leaves_; ++j) {
        if (root[static_cast<size_t>(j)] == root[static_cast<size_t>(i)]) label[static_cast<size_t>(j)] = next;
      }
      ++next;
    }
    return label;
  }

  /// Member lists of the n clusters.
  std::vector<std::vector<int>> members(int n) const {
    const auto label = cut(n);
    std::vector<std::vector<int>> out(static_cast<size_t>(n));
    for (int i = 0; i < leaves_; ++i) out[static_cast<size_t>(label[static_cast<size_t>(i)])].push_back(i);
    return out;
  }

  /// Heights of the merges, in merge order.
  std::vector<double> heights() const {
    std::vector<double> h;
    for (const auto& m : merges_) h.push_back(m.height);
    return h;
  }

  /// Leaves in dendrogram order (left subtree first).
  std::vector<int> leaf_order() const {
    if (merges_.empty()) {
      std::vector<int> one(static_cast<size_t>(leaves_));
      std::iota(one.begin(), one.end(), 0);
      return one;
    }
    std::vector<int> out;
    std::vector<int> stack{leaves_ + static_cast<int>(merges_.size()) - 1};
    while (!stack.empty()) {
      const int node = stack.back();
      stack.pop_back();
      if (node < leaves_) {
        out.push_back(node);
      } else {
        const auto& m = merges_[static_cast<size_t>(node - leaves_)];
        stack.push_back(m.right);
        stack.push_back(m.left);
      }
    }
    return out;
  }

 private:
  int leaves_;
  std::vector<Merge> merges_;
};

/// Ward linkage. Among equal smallest distances the lowest (i, j) pair of
/// active clusters merges first.
inline Dendrogram ward_linkage(const Matrix& distances, WardVariant variant = WardVariant::Raw) {
  const auto k = distances.rows();
  if (k < 1 || distances.cols() != k) throw std::invalid_argument("distance matrix must be square");
  const double scale = std::max(1.0, distances.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < k; ++i) {
    if (distances(i, i) != 0.0) throw std::invalid_argument("distance matrix diagonal must be zero");
    for (Eigen::Index j = 0; j < k; ++j) {
      if (!(distances(i, j) >= 0.0)) throw std::invalid_argument("negative or NaN distance");
      if (std::abs(distances(i, j) - distances(j, i)) > 1e-12 * scale) {
        throw std::invalid_argument("distance matrix is not symmetric");
      }
    }
  }
  Matrix d = variant == WardVariant::Squared ? distances.cwiseAbs2().eval() : distances;
  std::vector<int> node(static_cast<size_t>(k));
  std::vector<int> size(static_cast<size_t>(k), 1);
  std::vector<bool> active(static_cast<size_t>(k), true);
  std::iota(node.begin(), node.end(), 0);
  std::vector<Merge> merges;
  for (Eigen::Index step = 0; step + 1 < k; ++step) {
    Eigen::Index bi = -1;
    Eigen::Index bj = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < k; ++i) {
      if (!active[static_cast<size_t>(i)]) continue;
      for (Eigen::Index j = i + 1; j < k; ++j) {
        if (active[static_cast<size_t>(j)] && d(i, j) < best) {
          best = d(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    const double ni = size[static_cast<size_t>(bi)];
    const double nj = size[static_cast<size_t>(bj)];
    for (Eigen::Index m = 0; m < k; ++m) {
      if (!active[static_cast<size_t>(m)] || m == bi || m == bj) continue;
      const double nm = size[static_cast<size_t>(m)];
      const double v = ((ni + nm) * d(bi, m) + (nj + nm) * d(bj, m) - nm * d(bi, bj)) / (ni + nj + nm);
      d(bi, m) = v;
      d(m, bi) = v;
    }
    const double height = variant == WardVariant::Squared ? std::sqrt(std::max(best, 0.0)) : best;
    const int a = node[static_cast<size_t>(bi)];
    const int b = node[static_cast<size_t>(bj)];
    merges.push_back({std::min(a, b), std::max(a, b), height,
                      size[static_cast<size_t>(bi)] + size[static_cast<size_t>(bj)]});
    node[static_cast<size_t>(bi)] = static_cast<int>(k + step);
    size[static_cast<size_t>(bi)] += size[static_cast<size_t>(bj)];
    active[static_cast<size_t>(bj)] = false;
  }
  return Dendrogram(static_cast<int>(k), std::move(merges));
}

struct ModelCluster {
  std::vector<std::vector<int>> member_indices;
  std::vector<double> linkage_heights;
};

inline ModelCluster ward_cluster(const Matrix& distances, int n_clusters,
                                 WardVariant variant = WardVariant::Raw) {
  const auto tree = ward_linkage(distances, variant);
  return {tree.members(n_clusters), tree.heights()};
}

}  // namespace geolvq
