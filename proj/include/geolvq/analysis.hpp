#pragma once

// Evaluation metrics, feature relevance, classification-term decomposition of
// the metric cosine, reduced-model curves, and coordinates for rendering
// rank-3 models on the sphere (Mollweide projection, decision surfaces).

#include "geolvq/cluster.hpp"
#include "geolvq/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace geolvq {

using CountMatrix = Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic>;

struct EvaluationReport {
  CountMatrix confusion;      // rows true, columns predicted
  Vector class_accuracy;      // NaN for classes absent from the data
  double macro_avg = 0.0;     // mean over classes present
  double accuracy = 0.0;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::vector<std::string> warnings;

  double error() const { return 1.0 - accuracy; }
};

inline EvaluationReport evaluate_predictions(const std::vector<ClassIndex>& truth,
                                             const std::vector<ClassIndex>& predicted, int classes,
                                             std::optional<ClassIndex> healthy = std::nullopt) {
  if (truth.size() != predicted.size() || truth.empty()) {
    throw std::invalid_argument("truth and predictions must be aligned and nonempty");
  }
  EvaluationReport r;
  r.confusion = CountMatrix::Zero(classes, classes);
  long correct = 0;
  for (size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= classes || predicted[i] < 0 || predicted[i] >= classes) {
      throw std::invalid_argument("label out of range");
    }
    ++r.confusion(truth[i], predicted[i]);
    correct += truth[i] == predicted[i];
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
  r.class_accuracy = Vector::Constant(classes, std::numeric_limits<double>::quiet_NaN());
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < classes; ++c) {
    const long n = r.confusion.row(c).sum();
    if (n == 0) {
      r.warnings.push_back("class " + std::to_string(c) + " is empty; excluded from the macro average");
      continue;
    }
    r.class_accuracy(c) = static_cast<double>(r.confusion(c, c)) / static_cast<double>(n);
    sum += r.class_accuracy(c);
    ++present;
  }
  r.macro_avg = sum / present;
  if (healthy) {
    const ClassIndex h = *healthy;
    if (h < 0 || h >= classes) throw std::invalid_argument("healthy class out of range");
    long sick = 0;
    long flagged = 0;
    for (int c = 0; c < classes; ++c) {
      if (c == h) continue;
      sick += r.confusion.row(c).sum();
      flagged += r.confusion.row(c).sum() - r.confusion(c, h);
    }
    r.sensitivity = sick > 0 ? static_cast<double>(flagged) / static_cast<double>(sick)
                             : std::numeric_limits<double>::quiet_NaN();
    r.specificity = r.class_accuracy(h);
  }
  return r;
}

/// Nearest-prototype (or posterior-argmax) predictions scored against labels.
inline EvaluationReport evaluate(const Model& model, const LabeledDataset& data,
                                 std::optional<ClassIndex> healthy = std::nullopt) {
  if (model.num_classes() != data.num_classes()) {
    throw std::invalid_argument("model and data have different class counts");
  }
  return evaluate_predictions(data.labels(), predict(model, data), data.num_classes(), healthy);
}

/// diag(Lambda) per metric: one row for a global model, C rows for local.
inline Matrix feature_relevance(const Model& model) {
  Matrix out(static_cast<Eigen::Index>(model.metrics.size()), model.dim());
  for (size_t k = 0; k < model.metrics.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = model.metrics[k].matrix().colwise().squaredNorm();
  }
  return out;
}

/// Feature indices sorted by decreasing score (stable for ties).
inline std::vector<Eigen::Index> rank_descending(const Vector& score) {
  std::vector<Eigen::Index> idx(static_cast<size_t>(score.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return score(a) > score(b); });
  return idx;
}

struct RatioOccurrence {
  std::string name;
  int numerator = 0;
  int denominator = 0;
};

/// Counts how often each base feature appears in the first `top_n` ratio
/// features ("a/b") of `ranking`, split by numerator and denominator.
inline std::vector<RatioOccurrence> ratio_occurrence(const std::vector<std::string>& names,
                                                     const std::vector<Eigen::Index>& ranking,
                                                     size_t top_n) {
  std::map<std::string, RatioOccurrence> acc;
  for (size_t r = 0; r < std::min(top_n, ranking.size()); ++r) {
    const auto& n = names[static_cast<size_t>(ranking[r])];
    const auto slash = n.find('/');
    if (slash == std::string::npos) throw std::invalid_argument("feature '" + n + "' is not a ratio");
    const std::string a = n.substr(0, slash);
    const std::string b = n.substr(slash + 1);
    acc[a].name = a;
    acc[a].numerator++;
    acc[b].name = b;
    acc[b].denominator++;
  }
  std::vector<RatioOccurrence> out;
  for (auto& [k, v] : acc) out.push_back(v);
  std::stable_sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    return x.numerator + x.denominator > y.numerator + y.denominator;
  });
  return out;
}

/// T(F1, F2) = x_F1 Lambda(F1, F2) w_F2 / (|x|_Lambda |w|_Lambda); the entries
/// sum to the metric cosine. Missing features of x give zero rows; their
/// columns keep the prototype's contribution through Lambda's cross terms.
inline Matrix classification_terms(const Vector& x, const MaskVector& mask, const Model& model,
                                   ClassIndex c) {
  if (!is_angle_variant(model.variant)) {
    throw std::invalid_argument("classification terms need an angle-based model");
  }
  const Vector xz = detail::zero_fill(x, mask);
  const Vector w = model.prototypes.row(c).transpose();
  const auto& metric = model.metric_for(c);
  const double nu = detail::checked_norm(metric.matrix() * xz);
  const double nv = detail::checked_norm(metric.matrix() * w);
  return xz.asDiagonal() * metric.lambda() * w.asDiagonal() / (nu * nv);
}

struct ClassTermAggregate {
  std::vector<Matrix> mean_terms;               // per class, D x D
  std::vector<std::vector<int>> row_order;      // Ward (squared) dendrogram leaf order
  std::vector<std::vector<int>> col_order;
};

namespace detail {

inline Matrix row_distances(const Matrix& a) {
  const auto n = a.rows();
  Matrix d = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      d(i, j) = d(j, i) = (a.row(i) - a.row(j)).norm();
    }
  }
  return d;
}

}  // namespace detail

/// Mean classification terms of each class's samples against that class's
/// prototype, with Ward orderings of rows and columns for biclustering.
inline ClassTermAggregate class_term_aggregate(const Model& model, const LabeledDataset& data) {
  ClassTermAggregate out;
  for (int c = 0; c < model.num_classes(); ++c) {
    Matrix sum = Matrix::Zero(model.dim(), model.dim());
    int n = 0;
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      if (data.label(i) != c) continue;
      sum += classification_terms(data.values().row(i).transpose(), data.mask().row(i).transpose(),
                                  model, c);
      ++n;
    }
    if (n == 0) throw std::invalid_argument("class " + std::to_string(c) + " has no samples");
    const Matrix mean = sum / n;
    out.mean_terms.push_back(mean);
    out.row_order.push_back(ward_linkage(detail::row_distances(mean), WardVariant::Squared).leaf_order());
    out.col_order.push_back(
        ward_linkage(detail::row_distances(mean.transpose()), WardVariant::Squared).leaf_order());
  }
  return out;
}

/// Per class, features by decreasing row sum of the mean term matrix (the
/// share of the cosine attributed to that sample dimension).
inline std::vector<std::vector<Eigen::Index>> term_feature_ranking(const ClassTermAggregate& agg) {
  std::vector<std::vector<Eigen::Index>> out;
  for (const auto& m : agg.mean_terms) out.push_back(rank_descending(m.rowwise().sum()));
  return out;
}

/// Predictions when every feature outside `keep` is dropped from both the
/// samples and the prototypes. Samples with nothing left are predicted -1.
inline std::vector<ClassIndex> restricted_predictions(const Model& model, const LabeledDataset& data,
                                                      const MaskVector& keep) {
  const int C = model.num_classes();
  Mask used = data.mask();
  for (Eigen::Index i = 0; i < used.rows(); ++i) used.row(i) = used.row(i) && keep.transpose();
  const Matrix xz = used.select(data.values(), 0.0);
  const Matrix w = keep.transpose().replicate(C, 1).select(model.prototypes, 0.0);
  Matrix b = Matrix::Constant(data.size(), C, -2.0);
  for (int c = 0; c < C; ++c) {
    const Matrix& om = model.metric_for(c).matrix();
    const Vector v = om * w.row(c).transpose();
    const double nv = v.norm();
    if (nv < kNullSpaceTolerance) continue;
    const Matrix u = xz * om.transpose();
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      const double nu = u.row(i).norm();
      if (nu >= kNullSpaceTolerance) b(i, c) = u.row(i).dot(v) / (nu * nv);
    }
  }
  std::vector<ClassIndex> pred(static_cast<size_t>(data.size()), -1);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    double best = -1.5;
    for (int c = 0; c < C; ++c) {
      if (b(i, c) > best) {
        best = b(i, c);
        pred[static_cast<size_t>(i)] = c;
      }
    }
  }
  return pred;
}

struct ReducedPoint {
  Eigen::Index top_x = 0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double balanced_accuracy = 0.0;
};

struct ReducedCurve {
  ClassIndex class_label = 0;
  std::vector<ReducedPoint> points;
  Eigen::Index features_for_98 = 0;  // smallest x with BA >= 0.98 BA(x = D)
};

/// One-vs-rest balanced accuracy of class c as the model is reduced to the
/// top-x features of that class's ordering, for x = 1..D.
inline std::vector<ReducedCurve> reduced_model_curve(
    const Model& model, const LabeledDataset& data,
    const std::vector<std::vector<Eigen::Index>>& ordering) {
  if (model.variant == Variant::EuclideanPartial) {
    throw std::invalid_argument("reduced-model curves need an angle-based model");
  }
  if (static_cast<int>(ordering.size()) != model.num_classes()) {
    throw std::invalid_argument("need one feature ordering per class");
  }
  std::vector<ReducedCurve> out;
  for (int c = 0; c < model.num_classes(); ++c) {
    ReducedCurve curve{c, {}, 0};
    MaskVector keep = MaskVector::Constant(model.dim(), false);
    const auto& ord = ordering[static_cast<size_t>(c)];
    if (static_cast<Eigen::Index>(ord.size()) != model.dim()) {
      throw std::invalid_argument("ordering must be a permutation of all features");
    }
    for (size_t x = 0; x < ord.size(); ++x) {
      keep(ord[x]) = true;
      const auto pred = restricted_predictions(model, data, keep);
      long tp = 0, pos = 0, tn = 0, neg = 0;
      for (Eigen::Index i = 0; i < data.size(); ++i) {
        const bool is_c = data.label(i) == c;
        const bool said_c = pred[static_cast<size_t>(i)] == c;
        if (is_c) {
          ++pos;
          tp += said_c;
        } else {
          ++neg;
          tn += !said_c;
        }
      }
      ReducedPoint p;
      p.top_x = static_cast<Eigen::Index>(x + 1);
      p.sensitivity = pos ? static_cast<double>(tp) / pos : std::numeric_limits<double>::quiet_NaN();
      p.specificity = neg ? static_cast<double>(tn) / neg : std::numeric_limits<double>::quiet_NaN();
      p.balanced_accuracy = 0.5 * (p.sensitivity + p.specificity);
      curve.points.push_back(p);
    }
    const double full = curve.points.back().balanced_accuracy;
    for (const auto& p : curve.points) {
      if (p.balanced_accuracy >= 0.98 * full) {
        curve.features_for_98 = p.top_x;
        break;
      }
    }
    out.push_back(std::move(curve));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sphere rendering coordinates.

struct PlanePoint {
  double x = 0.0;
  double y = 0.0;
};

/// Mollweide coordinates of a unit 3-vector (latitude from z, longitude
/// atan2(y, x)). The auxiliary angle solves 2t + sin 2t = pi sin(lat) by
/// safeguarded Newton iteration.
inline PlanePoint mollweide_project(const Vector& p) {
  if (p.size() != 3) throw std::invalid_argument("Mollweide needs 3-vectors");
  if (std::abs(p.norm() - 1.0) > 1e-9) throw std::invalid_argument("point is not unit norm");
  const double lat = std::asin(std::clamp(p(2), -1.0, 1.0));
  const double lon = std::atan2(p(1), p(0));
  const double target = std::numbers::pi * std::sin(lat);
  double lo = -std::numbers::pi / 2;
  double hi = std::numbers::pi / 2;
  double t = lat;
  if (std::abs(std::abs(lat) - std::numbers::pi / 2) < 1e-15) {
    t = lat;
  } else {
    for (int it = 0; it < 200; ++it) {
      const double f = 2 * t + std::sin(2 * t) - target;
      if (std::abs(f) < 1e-14) break;
      if (f > 0) hi = t; else lo = t;
      const double df = 2 + 2 * std::cos(2 * t);
      double next = df > 0 ? t - f / df : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - t) < 1e-15) {
        t = next;
        break;
      }
      t = next;
    }
  }
  return {2 * std::numbers::sqrt2 / std::numbers::pi * lon * std::cos(t),
          std::numbers::sqrt2 * std::sin(t)};
}

/// Unit vector from Mollweide coordinates (inverse of mollweide_project).
inline Vector mollweide_unproject(const PlanePoint& q) {
  const double t = std::asin(std::clamp(q.y / std::numbers::sqrt2, -1.0, 1.0));
  const double lat = std::asin(std::clamp((2 * t + std::sin(2 * t)) / std::numbers::pi, -1.0, 1.0));
  const double c = std::cos(t);
  const double lon = c > 0 ? std::numbers::pi * q.x / (2 * std::numbers::sqrt2 * c) : 0.0;
  Vector out(3);
  out << std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat);
  return out;
}

/// n near-uniform unit vectors (Fibonacci lattice), deterministic.
inline Matrix fibonacci_sphere(Eigen::Index n) {
  if (n < 1) throw std::invalid_argument("need at least one point");
  Matrix out(n, 3);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(n);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * static_cast<double>(i);
    out.row(i) << r * std::cos(phi), r * std::sin(phi), z;
    out.row(i).normalize();
  }
  return out;
}

struct SurfaceSample {
  Matrix points;                  // n x 3 unit vectors in the projected space
  std::vector<PlanePoint> coords;
  std::vector<ClassIndex> label;
  Matrix posterior;               // n x C; only for probabilistic models
};

namespace detail {

inline Matrix projected_prototypes(const Model& model) {
  if (model.is_local() || model.rank() != 3 || !is_angle_variant(model.variant)) {
    throw std::invalid_argument("decision surfaces need a global angle model of rank 3");
  }
  Matrix v = model.prototypes * model.metrics.front().matrix().transpose();
  for (Eigen::Index c = 0; c < v.rows(); ++c) {
    if (v.row(c).norm() < kNullSpaceTolerance) throw std::domain_error("vector in metric null space");
    v.row(c).normalize();
  }
  return v;
}

}  // namespace detail

/// Labels (and posteriors for probabilistic models) on a Fibonacci lattice of
/// the sphere in the 3-dimensional projected space.
inline SurfaceSample decision_surface_sample(const Model& model, Eigen::Index n_points) {
  const Matrix v = detail::projected_prototypes(model);
  SurfaceSample s;
  s.points = fibonacci_sphere(n_points);
  const Matrix b = (s.points * v.transpose()).cwiseMax(-1.0).cwiseMin(1.0);
  if (model.variant == Variant::Probabilistic) {
    s.posterior = detail::posterior_from_cosines(b, model.steepness);
  }
  for (Eigen::Index i = 0; i < n_points; ++i) {
    s.coords.push_back(mollweide_project(s.points.row(i).transpose()));
    Eigen::Index arg = 0;
    b.row(i).maxCoeff(&arg);
    s.label.push_back(static_cast<ClassIndex>(arg));
  }
  return s;
}

/// Fraction of surface points whose largest posterior is below `level`.
inline double uncertain_fraction(const SurfaceSample& s, double level = 0.5) {
  if (s.posterior.size() == 0) throw std::invalid_argument("surface has no posteriors");
  long n = 0;
  for (Eigen::Index i = 0; i < s.posterior.rows(); ++i) n += s.posterior.row(i).maxCoeff() < level;
  return static_cast<double>(n) / static_cast<double>(s.posterior.rows());
}

struct ProjectedData {
  Matrix points;  // N x 3, normalized Omega x
  std::vector<PlanePoint> coords;
  Matrix prototypes;  // C x 3
  std::vector<PlanePoint> prototype_coords;
};

inline ProjectedData project_samples(const Model& model, const LabeledDataset& data) {
  ProjectedData out;
  out.prototypes = detail::projected_prototypes(model);
  out.points = data.zero_filled() * model.metrics.front().matrix().transpose();
  for (Eigen::Index i = 0; i < out.points.rows(); ++i) {
    if (out.points.row(i).norm() < kNullSpaceTolerance) throw std::domain_error("vector in metric null space");
    out.points.row(i).normalize();
    out.coords.push_back(mollweide_project(out.points.row(i).transpose()));
  }
  for (Eigen::Index c = 0; c < out.prototypes.rows(); ++c) {
    out.prototype_coords.push_back(mollweide_project(out.prototypes.row(c).transpose()));
  }
  return out;
}

}  // namespace geolvq
