#pragma once

// Geodesic average models. Trained models are clustered by the Grassmann
// distance between their metric ranges (Ward linkage), and each cluster is
// collapsed into one model: Karcher-mean prototypes on the sphere and the
// rank-preserving PSD mean of the relevance matrices.
//
// Prototypes are averaged index by index, which is only meaningful when
// every model started from class means (as initial_model does).

#include "geolvq/analysis.hpp"
#include "geolvq/cluster.hpp"
#include "geolvq/manifold.hpp"

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace geolvq {

struct AveragedCluster {
  std::vector<int> members;            // indices into the input model list
  Model model;
  std::optional<double> train_macro;   // macro accuracy of `model` on the training data
  std::vector<std::string> warnings;
};

struct AverageResult {
  Matrix distances;                    // k x k model distances
  Dendrogram tree{1, {}};
  Eigen::Index rank = 0;               // common rank the metrics were averaged at
  std::vector<AveragedCluster> clusters;
  std::vector<std::string> warnings;

  /// Cluster whose average scores best on the training data (larger cluster
  /// on ties, then lower index). Without training scores: the largest cluster.
  const AveragedCluster& best() const {
    size_t pick = 0;
    for (size_t i = 1; i < clusters.size(); ++i) {
      const auto& a = clusters[i];
      const auto& b = clusters[pick];
      const double sa = a.train_macro.value_or(0.0);
      const double sb = b.train_macro.value_or(0.0);
      if (sa > sb || (sa == sb && a.members.size() > b.members.size())) pick = i;
    }
    return clusters[pick];
  }
};

namespace detail {

inline void check_compatible(const std::vector<Model>& models) {
  if (models.empty()) throw std::invalid_argument("no models to average");
  const Model& ref = models.front();
  ref.validate();
  for (size_t i = 1; i < models.size(); ++i) {
    const Model& m = models[i];
    m.validate();
    if (m.variant != ref.variant) throw std::invalid_argument("models differ in variant");
    if (m.num_classes() != ref.num_classes() || m.dim() != ref.dim()) {
      throw std::invalid_argument("models differ in class count or dimension");
    }
    if (m.rank() != ref.rank()) {
      throw std::invalid_argument("models differ in rank; equal rank is needed to build the average model");
    }
    if (m.steepness != ref.steepness) throw std::invalid_argument("models differ in steepness");
  }
}

/// Smallest numerical rank of any relevance matrix in the ensemble.
inline Eigen::Index common_rank(const std::vector<Model>& models) {
  Eigen::Index r = models.front().rank();
  for (const auto& m : models) {
    for (const auto& p : m.metrics) r = std::min(r, numerical_rank(p.lambda()));
  }
  if (r < 1) throw std::invalid_argument("a model has a zero relevance matrix");
  return r;
}

inline Matrix range_basis(const ProjectionMatrix& p, Eigen::Index rank) {
  return factorize_psd(p.lambda(), rank).u;
}

/// Omega (rank x D) with Omega' Omega = Lambda, rescaled to unit trace.
inline ProjectionMatrix projection_from_psd(const PsdMean& mean) {
  const Matrix a = mean.basis.transpose() * mean.mean * mean.basis;
  return ProjectionMatrix::normalized(spd_sqrt(0.5 * (a + a.transpose())) * mean.basis.transpose());
}

}  // namespace detail

/// Pairwise model distances: Grassmann distance of the metric ranges, averaged
/// over the C metrics of local models.
inline Matrix model_distances(const std::vector<Model>& models, Eigen::Index rank) {
  const auto k = static_cast<Eigen::Index>(models.size());
  const size_t nm = models.front().metrics.size();
  std::vector<std::vector<Matrix>> bases(models.size());
  for (size_t i = 0; i < models.size(); ++i) {
    for (const auto& p : models[i].metrics) bases[i].push_back(detail::range_basis(p, rank));
  }
  Matrix d = Matrix::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i + 1; j < k; ++j) {
      double s = 0.0;
      for (size_t c = 0; c < nm; ++c) {
        s += grassmann_distance(bases[static_cast<size_t>(i)][c], bases[static_cast<size_t>(j)][c]);
      }
      d(i, j) = d(j, i) = s / static_cast<double>(nm);
    }
  }
  return d;
}

/// One model from a group: Karcher-mean prototypes per class (arithmetic
/// mean for the Euclidean variant) and the rank-preserving mean of each metric.
inline AveragedCluster average_group(const std::vector<Model>& models, const std::vector<int>& members,
                                     Eigen::Index rank) {
  AveragedCluster out;
  out.members = members;
  const Model& ref = models[static_cast<size_t>(members.front())];
  Model& avg = out.model;
  avg.variant = ref.variant;
  avg.steepness = ref.steepness;
  avg.prototypes = Matrix::Zero(ref.num_classes(), ref.dim());
  for (int c = 0; c < ref.num_classes(); ++c) {
    std::vector<Vector> pts;
    for (int i : members) pts.push_back(models[static_cast<size_t>(i)].prototypes.row(c).transpose());
    if (is_angle_variant(ref.variant)) {
      try {
        avg.prototypes.row(c) = karcher_mean_sphere(pts).transpose();
      } catch (const std::domain_error& e) {
        throw std::domain_error("class " + std::to_string(c) + " prototypes: " + e.what());
      }
    } else {
      Vector s = Vector::Zero(ref.dim());
      for (const auto& p : pts) s += p;
      avg.prototypes.row(c) = (s / static_cast<double>(pts.size())).transpose();
    }
  }
  for (size_t k = 0; k < ref.metrics.size(); ++k) {
    std::vector<Matrix> lambdas;
    for (int i : members) {
      lambdas.push_back(factorize_psd(models[static_cast<size_t>(i)].metrics[k].lambda(), rank).reconstruct());
    }
    auto mean = psd_mean_detailed(lambdas, rank);
    for (auto& w : mean.warnings) out.warnings.push_back("metric " + std::to_string(k) + ": " + w);
    avg.metrics.push_back(detail::projection_from_psd(mean));
  }
  avg.validate();
  return out;
}

/// Clusters the models into n_clusters groups and averages each. With
/// training data, each average's macro accuracy is reported for elbow selection.
inline AverageResult average_models(const std::vector<Model>& models, int n_clusters,
                                    const LabeledDataset* train = nullptr) {
  detail::check_compatible(models);
  if (n_clusters < 1 || n_clusters > static_cast<int>(models.size())) {
    throw std::invalid_argument("cluster count must lie in 1..number of models");
  }
  AverageResult res;
  res.rank = detail::common_rank(models);
  if (res.rank < models.front().rank()) {
    res.warnings.push_back("relevance matrices truncated to common rank " + std::to_string(res.rank));
  }
  res.distances = model_distances(models, res.rank);
  res.tree = ward_linkage(res.distances, WardVariant::Raw);
  for (const auto& group : res.tree.members(n_clusters)) {
    auto cl = average_group(models, group, res.rank);
    if (train) cl.train_macro = evaluate(cl.model, *train).macro_avg;
    res.clusters.push_back(std::move(cl));
  }
  return res;
}

struct ElbowPoint {
  int clusters = 0;
  std::vector<double> train_macro;  // per cluster
  std::vector<int> sizes;
};

/// Training macro accuracy of every cluster average for 1..max_clusters
/// clusters, all cut from one dendrogram.
inline std::vector<ElbowPoint> cluster_diagnostics(const std::vector<Model>& models, int max_clusters,
                                                   const LabeledDataset& train) {
  detail::check_compatible(models);
  const auto rank = detail::common_rank(models);
  const auto tree = ward_linkage(model_distances(models, rank), WardVariant::Raw);
  std::vector<ElbowPoint> out;
  for (int n = 1; n <= std::min<int>(max_clusters, static_cast<int>(models.size())); ++n) {
    ElbowPoint p{n, {}, {}};
    for (const auto& group : tree.members(n)) {
      p.train_macro.push_back(evaluate(average_group(models, group, rank).model, train).macro_avg);
      p.sizes.push_back(static_cast<int>(group.size()));
    }
    out.push_back(std::move(p));
  }
  return out;
}

/// Majority vote of the models' predictions; ties go to the lowest class index.
inline std::vector<ClassIndex> majority_vote(const std::vector<Model>& models, const LabeledDataset& data) {
  if (models.empty()) throw std::invalid_argument("no models to vote");
  const int C = models.front().num_classes();
  Eigen::MatrixXi votes = Eigen::MatrixXi::Zero(data.size(), C);
  for (const auto& m : models) {
    const auto p = predict(m, data);
    for (Eigen::Index i = 0; i < data.size(); ++i) ++votes(i, p[static_cast<size_t>(i)]);
  }
  std::vector<ClassIndex> out(static_cast<size_t>(data.size()));
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    Eigen::Index arg = 0;
    votes.row(i).maxCoeff(&arg);  // first maximum
    out[static_cast<size_t>(i)] = static_cast<ClassIndex>(arg);
  }
  return out;
}

}  // namespace geolvq
