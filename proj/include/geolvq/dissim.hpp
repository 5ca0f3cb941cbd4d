#pragma once

// Dissimilarities on the (metric) hypersphere and the partial-distance
// Euclidean baseline, plus the Model type and nearest-prototype decisions.
//
// Missing coordinates of a sample are zero-filled before the projection is
// applied. Because the sample enters the metric cosine linearly in both the
// inner product and its norm, this is the same as summing over observed
// dimensions only. Prototypes are always complete.

#include "geolvq/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace geolvq {

using MaskVector = Eigen::Array<bool, Eigen::Dynamic, 1>;

inline constexpr double kNullSpaceTolerance = 1e-12;
inline constexpr double kCosineTolerance = 1e-9;

/// M x D factor of the metric tensor Lambda = Omega^T Omega.
class ProjectionMatrix {
 public:
  ProjectionMatrix() = default;
  explicit ProjectionMatrix(Matrix omega) : omega_(std::move(omega)) {
    if (omega_.rows() < 1 || omega_.cols() < 1 || omega_.rows() > omega_.cols()) {
      throw std::invalid_argument("projection must be M x D with 1 <= M <= D");
    }
  }

  /// Rescaled so that trace(Omega^T Omega) = 1.
  static ProjectionMatrix normalized(Matrix omega) {
    const double f = omega.norm();
    if (!(f > 0.0) || !std::isfinite(f)) {
      throw std::invalid_argument("projection matrix is zero or non-finite");
    }
    omega /= f;
    return ProjectionMatrix(std::move(omega));
  }

  /// Identity scaled to unit trace: Lambda = I / D.
  static ProjectionMatrix scaled_identity(Eigen::Index dim) {
    return ProjectionMatrix(Matrix::Identity(dim, dim) / std::sqrt(static_cast<double>(dim)));
  }

  const Matrix& matrix() const { return omega_; }
  Eigen::Index rank() const { return omega_.rows(); }
  Eigen::Index dim() const { return omega_.cols(); }
  Matrix lambda() const { return omega_.transpose() * omega_; }
  double trace() const { return omega_.squaredNorm(); }

 private:
  Matrix omega_;
};

struct Prototype {
  Vector w;
  ClassIndex class_label = 0;
};

enum class Variant { AngleGlobal, AngleLocal, Probabilistic, EuclideanPartial };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::AngleGlobal: return "angle-global";
    case Variant::AngleLocal: return "angle-local";
    case Variant::Probabilistic: return "probabilistic";
    case Variant::EuclideanPartial: return "euclidean-partial";
  }
  return "unknown";
}

inline Variant variant_from_string(const std::string& s) {
  if (s == "angle-global" || s == "angle" || s == "alvq") return Variant::AngleGlobal;
  if (s == "angle-local" || s == "local" || s == "lalvq") return Variant::AngleLocal;
  if (s == "probabilistic" || s == "plvq") return Variant::Probabilistic;
  if (s == "euclidean-partial" || s == "euclidean" || s == "elvq") {
    return Variant::EuclideanPartial;
  }
  throw std::invalid_argument("unknown variant '" + s + "'");
}

inline bool is_angle_variant(Variant v) { return v != Variant::EuclideanPartial; }

/// One prototype per class (row c belongs to class c), one global projection
/// or one per class, and the steepness (beta, or Theta for probabilistic).
struct Model {
  Variant variant = Variant::AngleGlobal;
  Matrix prototypes;                       // C x D
  std::vector<ProjectionMatrix> metrics;   // 1, or C for AngleLocal
  double steepness = 1.0;

  int num_classes() const { return static_cast<int>(prototypes.rows()); }
  Eigen::Index dim() const { return prototypes.cols(); }
  Eigen::Index rank() const { return metrics.front().rank(); }
  bool is_local() const { return metrics.size() > 1; }

  const ProjectionMatrix& metric_for(int c) const {
    return metrics[is_local() ? static_cast<size_t>(c) : 0];
  }

  Prototype prototype(int c) const { return {prototypes.row(c).transpose(), c}; }

  void validate() const {
    if (prototypes.rows() < 2) throw std::invalid_argument("model needs at least two classes");
    if (metrics.empty()) throw std::invalid_argument("model has no metric");
    const size_t expected = variant == Variant::AngleLocal ? prototypes.rows() : 1;
    if (metrics.size() != expected) {
      throw std::invalid_argument("model has " + std::to_string(metrics.size()) +
                                  " projection matrices, expected " + std::to_string(expected));
    }
    for (const auto& m : metrics) {
      if (m.dim() != dim() || m.rank() != rank()) {
        throw std::invalid_argument("projection shapes do not match the model");
      }
    }
    if (!(steepness > 0.0)) throw std::invalid_argument("steepness must be positive");
    if (!prototypes.allFinite()) throw std::invalid_argument("non-finite prototype");
  }
};

inline double check_cosine(double b) {
  if (!(b >= -1.0 - kCosineTolerance && b <= 1.0 + kCosineTolerance)) {
    throw std::domain_error("cosine " + std::to_string(b) + " outside [-1, 1]");
  }
  return std::clamp(b, -1.0, 1.0);
}

// For large steepness the ratio of exponentials is rewritten in scaled form
// to avoid overflow; expm1 keeps small steepness accurate.

/// (e^{-beta (b - 1)} - 1) / (e^{2 beta} - 1): 0 at b = 1, 1 at b = -1.
inline double g_beta(double b, double beta) {
  if (!(beta > 0.0)) throw std::domain_error("beta must be positive");
  b = check_cosine(b);
  if (2.0 * beta < 40.0) return std::expm1(beta * (1.0 - b)) / std::expm1(2.0 * beta);
  const double tail = std::exp(-2.0 * beta);
  return (std::exp(-beta * (1.0 + b)) - tail) / (1.0 - tail);
}

/// d g_beta / d b.
inline double g_beta_derivative(double b, double beta) {
  b = std::clamp(b, -1.0, 1.0);
  if (2.0 * beta < 40.0) return -beta * std::exp(beta * (1.0 - b)) / std::expm1(2.0 * beta);
  return -beta * std::exp(-beta * (1.0 + b)) / (1.0 - std::exp(-2.0 * beta));
}

/// (e^{Theta (b + 1)} - 1) / (e^{2 Theta} - 1): 0 at b = -1, 1 at b = 1.
inline double g_theta(double b, double theta) {
  if (!(theta > 0.0)) throw std::domain_error("theta must be positive");
  b = check_cosine(b);
  if (2.0 * theta < 40.0) return std::expm1(theta * (1.0 + b)) / std::expm1(2.0 * theta);
  const double tail = std::exp(-2.0 * theta);
  return (std::exp(theta * (b - 1.0)) - tail) / (1.0 - tail);
}

/// log g_theta(b); -inf at b = -1.
inline double log_g_theta(double b, double theta) {
  b = std::clamp(b, -1.0, 1.0);
  if (b <= -1.0) return -std::numeric_limits<double>::infinity();
  const double a = theta * (1.0 + b);
  // log(e^a - 1) - log(e^{2 theta} - 1), both written as x + log1p(-e^{-x}).
  return a - 2.0 * theta + std::log1p(-std::exp(-a)) - std::log1p(-std::exp(-2.0 * theta));
}

/// log of d g_theta / d b.
inline double log_g_theta_derivative(double b, double theta) {
  b = std::clamp(b, -1.0, 1.0);
  return std::log(theta) + theta * (b - 1.0) - std::log1p(-std::exp(-2.0 * theta));
}

inline double g_theta_derivative(double b, double theta) {
  return std::exp(log_g_theta_derivative(b, theta));
}

namespace detail {

inline void require_observed(const MaskVector& mask) {
  if (!mask.any()) throw std::invalid_argument("sample has no observed dimension");
}

inline Vector zero_fill(const Vector& x, const MaskVector& mask) {
  if (x.size() != mask.size()) throw std::invalid_argument("sample and mask sizes differ");
  return mask.select(x, 0.0);
}

inline double checked_norm(const Vector& v) {
  const double n = v.norm();
  if (!(n >= kNullSpaceTolerance)) throw std::domain_error("vector in metric null space");
  return n;
}

}  // namespace detail

/// x^T Lambda w / (|x|_Lambda |w|_Lambda) over the observed coordinates of x.
inline double metric_cosine(const Vector& x, const MaskVector& mask, const Vector& w,
                            const ProjectionMatrix& omega) {
  detail::require_observed(mask);
  if (w.size() != omega.dim()) throw std::invalid_argument("dimension mismatch");
  const Vector u = omega.matrix() * detail::zero_fill(x, mask);
  const Vector v = omega.matrix() * w;
  const double nu = detail::checked_norm(u);
  const double nv = detail::checked_norm(v);
  return check_cosine(u.dot(v) / (nu * nv));
}

inline double metric_cosine(const Vector& x, const Vector& w, const ProjectionMatrix& omega) {
  return metric_cosine(x, MaskVector::Constant(x.size(), true), w, omega);
}

inline double angle_dissimilarity(const Vector& x, const MaskVector& mask, const Vector& w,
                                  const ProjectionMatrix& omega, double beta) {
  return g_beta(metric_cosine(x, mask, w, omega), beta);
}

inline double angle_dissimilarity(const Vector& x, const Vector& w,
                                  const ProjectionMatrix& omega, double beta) {
  return g_beta(metric_cosine(x, w, omega), beta);
}

/// (D / |D_obs|) * sum over observed m, n of (x_m - w_m) Lambda_mn (x_n - w_n).
inline double partial_euclidean(const Vector& x, const MaskVector& mask, const Vector& w,
                                const ProjectionMatrix& omega) {
  detail::require_observed(mask);
  const Vector diff = mask.select(x - w, 0.0);
  const double factor =
      static_cast<double>(x.size()) / static_cast<double>(mask.count());
  return factor * (omega.matrix() * diff).squaredNorm();
}

inline double partial_euclidean(const Vector& x, const Vector& w,
                                const ProjectionMatrix& omega) {
  return partial_euclidean(x, MaskVector::Constant(x.size(), true), w, omega);
}

/// Dissimilarity of the model's variant given a metric cosine. Probabilistic
/// models use 1 - g_Theta(b), which orders classes like the posterior does.
inline double dissimilarity_from_cosine(const Model& model, double b) {
  switch (model.variant) {
    case Variant::Probabilistic: return 1.0 - g_theta(b, model.steepness);
    default: return g_beta(b, model.steepness);
  }
}

/// Metric cosines of every (zero-filled) row of `xz` against every prototype.
/// Throws if a row or prototype is in the null space of its metric.
inline Matrix cosine_matrix(const Model& model, const Matrix& xz) {
  const int C = model.num_classes();
  Matrix out(xz.rows(), C);
  auto fill = [&](const ProjectionMatrix& metric, int c_begin, int c_end) {
    const Matrix u = xz * metric.matrix().transpose();
    const Vector nu = u.rowwise().norm();
    if (nu.size() > 0 && !(nu.minCoeff() >= kNullSpaceTolerance)) {
      throw std::domain_error("vector in metric null space");
    }
    for (int c = c_begin; c < c_end; ++c) {
      const Vector v = metric.matrix() * model.prototypes.row(c).transpose();
      const double nv = detail::checked_norm(v);
      out.col(c) = ((u * v).array() / (nu.array() * nv)).cwiseMax(-1.0).cwiseMin(1.0).matrix();
    }
  };
  if (model.is_local()) {
    for (int c = 0; c < C; ++c) fill(model.metric_for(c), c, c + 1);
  } else {
    fill(model.metrics.front(), 0, C);
  }
  return out;
}

/// Model dissimilarities of one sample to every prototype.
inline Vector dissimilarities(const Model& model, const Vector& x, const MaskVector& mask) {
  const int C = model.num_classes();
  Vector d(C);
  for (int c = 0; c < C; ++c) {
    const Vector w = model.prototypes.row(c).transpose();
    const auto& metric = model.metric_for(c);
    if (model.variant == Variant::EuclideanPartial) {
      d(c) = partial_euclidean(x, mask, w, metric);
    } else {
      d(c) = dissimilarity_from_cosine(model, metric_cosine(x, mask, w, metric));
    }
  }
  return d;
}

struct Decision {
  ClassIndex label = -1;
  double dissimilarity = 0.0;
};

/// Lowest dissimilarity wins; exact ties go to the lowest class index.
inline Decision argmin_decision(const Vector& d) {
  Decision best{-1, std::numeric_limits<double>::infinity()};
  for (Eigen::Index c = 0; c < d.size(); ++c) {
    if (d(c) < best.dissimilarity) best = {static_cast<ClassIndex>(c), d(c)};
  }
  if (best.label < 0) throw std::domain_error("all dissimilarities degenerate");
  return best;
}

inline Decision nearest_prototype(const Vector& x, const MaskVector& mask, const Model& model) {
  return argmin_decision(dissimilarities(model, x, mask));
}

inline Decision nearest_prototype(const Vector& x, const Model& model) {
  return nearest_prototype(x, MaskVector::Constant(x.size(), true), model);
}

/// Partial-distance dissimilarities for all rows of a dataset (N x C).
inline Matrix partial_euclidean_matrix(const Model& model, const LabeledDataset& data) {
  const int C = model.num_classes();
  Matrix out(data.size(), C);
  const Matrix& x = data.values();
  for (int c = 0; c < C; ++c) {
    const auto& omega = model.metric_for(c).matrix();
    const Eigen::RowVectorXd w = model.prototypes.row(c);
    const Matrix diff = data.mask().select(x.rowwise() - w, 0.0);
    const Vector sq = (diff * omega.transpose()).rowwise().squaredNorm();
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      out(i, c) = static_cast<double>(data.dim()) /
                  static_cast<double>(data.mask().row(i).count()) * sq(i);
    }
  }
  return out;
}

/// Model dissimilarities for every sample of a dataset (N x C).
inline Matrix dissimilarity_matrix(const Model& model, const LabeledDataset& data) {
  if (data.dim() != model.dim()) throw std::invalid_argument("model/data dimension mismatch");
  if (model.variant == Variant::EuclideanPartial) return partial_euclidean_matrix(model, data);
  Matrix b = cosine_matrix(model, data.zero_filled());
  return b.unaryExpr([&](double v) { return dissimilarity_from_cosine(model, v); });
}

inline std::vector<ClassIndex> predict(const Model& model, const LabeledDataset& data) {
  const Matrix d = dissimilarity_matrix(model, data);
  std::vector<ClassIndex> out(static_cast<size_t>(data.size()));
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    out[static_cast<size_t>(i)] = argmin_decision(d.row(i).transpose()).label;
  }
  return out;
}

}  // namespace geolvq
