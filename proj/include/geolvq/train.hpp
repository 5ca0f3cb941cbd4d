#pragma once

// Training objectives with analytic gradients and a batch optimizer for the
// deterministic angle variants (global/local metric), the partial-distance
// Euclidean baseline and the probabilistic (KL) variant.
//
// Gradients of the cosine variants are accumulated through one coefficient
// per (sample, class) cosine: K(i, c) = dE / db(i, c). With u = Omega x and
// v = Omega w,
//   db/dw     = Lambda (x / (|u||v|) - b w / |v|^2)
//   db/dOmega = Omega [(x w' + w x') / (|u||v|) - b (x x' / |u|^2 + w w' / |v|^2)]
// so summing over samples needs only a few dense products per class.

#include "geolvq/dissim.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace geolvq {

/// (dJ - dK) / (dJ + dK), with dJ the correct and dK the best wrong distance.
inline double glvq_relative_cost(double dj, double dk) {
  if (dj < 0.0 || dk < 0.0) throw std::domain_error("negative dissimilarity");
  if (!(dj + dk > 0.0)) throw std::domain_error("dJ + dK must be positive");
  return (dj - dk) / (dj + dk);
}

/// C x C misclassification weights; rows are true classes, columns predicted.
class CostWeightMatrix {
 public:
  explicit CostWeightMatrix(Matrix gamma) : gamma_(std::move(gamma)) {
    if (gamma_.rows() != gamma_.cols() || gamma_.rows() < 2) {
      throw std::invalid_argument("cost weights must be C x C with C >= 2");
    }
    if (!gamma_.allFinite() || gamma_.minCoeff() < 0.0) {
      throw std::invalid_argument("cost weights must be finite and nonnegative");
    }
    if (std::abs(gamma_.sum() - 1.0) > 1e-9) {
      throw std::invalid_argument("cost weights must sum to 1");
    }
  }

  /// Rescales any nonnegative matrix with positive sum.
  static CostWeightMatrix normalized(Matrix gamma) {
    const double s = gamma.sum();
    if (!(s > 0.0)) throw std::invalid_argument("cost weights sum to zero");
    return CostWeightMatrix(gamma / s);
  }

  /// Equal entries: each class then weighs in inversely to its size.
  static CostWeightMatrix uniform(int classes) {
    return normalized(Matrix::Ones(classes, classes));
  }

  const Matrix& gamma() const { return gamma_; }
  int num_classes() const { return static_cast<int>(gamma_.rows()); }
  double operator()(ClassIndex truth, ClassIndex predicted) const {
    return gamma_(truth, predicted);
  }

 private:
  Matrix gamma_;
};

/// sum_c (1 / n_c) sum_{i: y_i = c} gamma(c, yhat_i) lambda_i.
inline double cost_weighted_objective(const std::vector<double>& costs,
                                      const std::vector<ClassIndex>& labels,
                                      const std::vector<ClassIndex>& predictions,
                                      const CostWeightMatrix& gamma) {
  if (costs.size() != labels.size() || labels.size() != predictions.size()) {
    throw std::invalid_argument("cost, label and prediction arrays differ in length");
  }
  const int C = gamma.num_classes();
  std::vector<double> n(static_cast<size_t>(C), 0.0);
  for (ClassIndex y : labels) {
    if (y < 0 || y >= C) throw std::invalid_argument("label out of range");
    n[static_cast<size_t>(y)] += 1.0;
  }
  for (int c = 0; c < C; ++c) {
    if (n[static_cast<size_t>(c)] == 0.0) {
      throw std::invalid_argument("class " + std::to_string(c) + " is empty in the batch");
    }
  }
  double total = 0.0;
  for (size_t i = 0; i < costs.size(); ++i) {
    total += gamma(labels[i], predictions[i]) * costs[i] / n[static_cast<size_t>(labels[i])];
  }
  return total;
}

struct LabelDistribution {
  Vector p;
};

/// True class gets 1 - eps, the others eps / (C - 1).
inline LabelDistribution smoothed_target(ClassIndex y, int classes, double eps) {
  if (!(eps >= 0.0) || eps >= static_cast<double>(classes - 1) / classes) {
    throw std::invalid_argument("label smoothing must satisfy 0 <= eps < (C-1)/C");
  }
  LabelDistribution t{Vector::Constant(classes, eps / (classes - 1))};
  t.p(y) = 1.0 - eps;
  return t;
}

/// (1/N) sum_i sum_c phat ln(phat / p); phat = 0 contributes 0.
inline double kl_objective(const std::vector<LabelDistribution>& posteriors,
                           const std::vector<LabelDistribution>& targets) {
  if (posteriors.size() != targets.size() || posteriors.empty()) {
    throw std::invalid_argument("posterior and target lists must be aligned and nonempty");
  }
  double total = 0.0;
  for (size_t i = 0; i < posteriors.size(); ++i) {
    const Vector& ph = posteriors[i].p;
    const Vector& p = targets[i].p;
    if (ph.size() != p.size()) throw std::invalid_argument("distribution sizes differ");
    for (Eigen::Index c = 0; c < p.size(); ++c) {
      if (!(p(c) > 0.0)) throw std::domain_error("target distribution has a zero entry");
      if (ph(c) > 0.0) total += ph(c) * std::log(ph(c) / p(c));
    }
  }
  return total / static_cast<double>(posteriors.size());
}

namespace detail {

/// log g_Theta for every cosine, then a numerically stable softmax per row.
inline Matrix posterior_from_cosines(const Matrix& b, double theta) {
  Matrix logp = b.unaryExpr([&](double v) { return log_g_theta(v, theta); });
  for (Eigen::Index i = 0; i < logp.rows(); ++i) {
    const double mx = logp.row(i).maxCoeff();
    if (!std::isfinite(mx)) throw std::domain_error("all posterior numerators are zero");
    const double lse = mx + std::log((logp.row(i).array() - mx).exp().sum());
    logp.row(i).array() -= lse;
  }
  return logp.array().exp().matrix();
}

}  // namespace detail

inline LabelDistribution plvq_posterior(const Vector& x, const MaskVector& mask,
                                        const Model& model) {
  const int C = model.num_classes();
  Matrix b(1, C);
  for (int c = 0; c < C; ++c) {
    b(0, c) = metric_cosine(x, mask, model.prototypes.row(c).transpose(), model.metric_for(c));
  }
  return {detail::posterior_from_cosines(b, model.steepness).row(0).transpose()};
}

inline LabelDistribution plvq_posterior(const Vector& x, const Model& model) {
  return plvq_posterior(x, MaskVector::Constant(x.size(), true), model);
}

/// N x C posteriors for a dataset.
inline Matrix plvq_posteriors(const Model& model, const LabeledDataset& data) {
  return detail::posterior_from_cosines(cosine_matrix(model, data.zero_filled()),
                                        model.steepness);
}

// Per-sample derivatives of the metric cosine. Missing coordinates of x are
// zero-filled, so they contribute nothing.

inline Vector grad_cosine_wrt_prototype(const Vector& x, const MaskVector& mask,
                                        const Vector& w, const ProjectionMatrix& omega) {
  const Vector xz = detail::zero_fill(x, mask);
  const Matrix& om = omega.matrix();
  const Vector u = om * xz;
  const Vector v = om * w;
  const double nu = detail::checked_norm(u);
  const double nv = detail::checked_norm(v);
  const double b = u.dot(v) / (nu * nv);
  return om.transpose() * (u / (nu * nv) - b * v / (nv * nv));
}

inline Matrix grad_cosine_wrt_omega(const Vector& x, const MaskVector& mask, const Vector& w,
                                    const ProjectionMatrix& omega) {
  const Vector xz = detail::zero_fill(x, mask);
  const Matrix& om = omega.matrix();
  const Vector u = om * xz;
  const Vector v = om * w;
  const double nu = detail::checked_norm(u);
  const double nv = detail::checked_norm(v);
  const double b = u.dot(v) / (nu * nv);
  return (u * w.transpose() + v * xz.transpose()) / (nu * nv) -
         b * (u * xz.transpose() / (nu * nu) + v * w.transpose() / (nv * nv));
}

/// Parameter-shaped gradient: one C x D block and one block per metric.
struct ModelGradient {
  Matrix prototypes;
  std::vector<Matrix> omegas;
};

struct ObjectiveEvaluation {
  double cost = 0.0;
  ModelGradient gradient;
  std::vector<ClassIndex> predictions;
};

/// Zero-filled data plus per-class sample counts, computed once per training run.
struct TrainingBatch {
  Matrix xz;
  Mask mask;
  std::vector<ClassIndex> labels;
  std::vector<double> class_count;
  Vector observed_factor;  // D / |observed dims| per sample
  int classes = 0;

  explicit TrainingBatch(const LabeledDataset& data)
      : xz(data.zero_filled()),
        mask(data.mask()),
        labels(data.labels()),
        class_count(static_cast<size_t>(data.num_classes()), 0.0),
        observed_factor(data.size()),
        classes(data.num_classes()) {
    for (ClassIndex y : labels) class_count[static_cast<size_t>(y)] += 1.0;
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      observed_factor(i) = static_cast<double>(data.dim()) /
                           static_cast<double>(mask.row(i).count());
    }
  }

  Eigen::Index size() const { return xz.rows(); }
};

namespace detail {

/// Per-sample weight of the objective: 1/N, or gamma(y, yhat) / n_y.
inline Vector sample_weights(const TrainingBatch& batch,
                             const std::vector<ClassIndex>& predictions,
                             const CostWeightMatrix* gamma) {
  const auto n = batch.size();
  Vector weight(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto y = batch.labels[static_cast<size_t>(i)];
    weight(i) = gamma ? (*gamma)(y, predictions[static_cast<size_t>(i)]) /
                            batch.class_count[static_cast<size_t>(y)]
                      : 1.0 / static_cast<double>(n);
  }
  return weight;
}

/// Chain rule from cosine coefficients K (N x C) into prototype and metric
/// gradients, for the cosines `b` of `model` on `batch`.
inline ModelGradient cosine_chain(const Model& model, const TrainingBatch& batch,
                                  const Matrix& b, const Matrix& k) {
  const int C = model.num_classes();
  ModelGradient g{Matrix::Zero(C, model.dim()), {}};
  const Matrix& x = batch.xz;
  auto accumulate = [&](const ProjectionMatrix& metric, int c0, int c1) {
    const Matrix& om = metric.matrix();
    const Vector nu = (x * om.transpose()).rowwise().norm();
    const Matrix w = model.prototypes.middleRows(c0, c1 - c0);
    const Vector nv = (w * om.transpose()).rowwise().norm();
    const Matrix kk = k.middleCols(c0, c1 - c0);
    const Matrix bb = b.middleCols(c0, c1 - c0);
    // K~(i,c) = K / (|u_i||v_c|); q_c = sum_i K b / |v_c|^2; r_i = sum_c K b / |u_i|^2.
    Matrix kt = kk;
    for (Eigen::Index i = 0; i < kt.rows(); ++i) {
      for (Eigen::Index c = 0; c < kt.cols(); ++c) kt(i, c) /= nu(i) * nv(c);
    }
    const Matrix kb = kk.cwiseProduct(bb);
    const Vector q = kb.colwise().sum().transpose().cwiseQuotient(nv.cwiseAbs2());
    const Vector r = kb.rowwise().sum().cwiseQuotient(nu.cwiseAbs2());
    const Matrix lambda = metric.lambda();
    const Matrix xtk = x.transpose() * kt;  // D x (c1 - c0)
    for (int c = c0; c < c1; ++c) {
      g.prototypes.row(c) =
          (lambda * (xtk.col(c - c0) - q(c - c0) * w.row(c - c0).transpose())).transpose();
    }
    const Matrix cross = xtk * w;  // D x D
    const Matrix s = cross + cross.transpose() - x.transpose() * r.asDiagonal() * x -
                     w.transpose() * q.asDiagonal() * w;
    g.omegas.push_back(om * s);
  };
  if (model.is_local()) {
    for (int c = 0; c < C; ++c) accumulate(model.metric_for(c), c, c + 1);
  } else {
    accumulate(model.metrics.front(), 0, C);
  }
  return g;
}

/// Column of the correct class and of the closest wrong class for each row.
inline void winners(const Matrix& d, const std::vector<ClassIndex>& labels,
                    std::vector<ClassIndex>& wrong, std::vector<ClassIndex>& predicted) {
  const auto n = d.rows();
  wrong.assign(static_cast<size_t>(n), -1);
  predicted.assign(static_cast<size_t>(n), -1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto y = labels[static_cast<size_t>(i)];
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < d.cols(); ++c) {
      if (c != y && d(i, c) < best) {
        best = d(i, c);
        wrong[static_cast<size_t>(i)] = static_cast<ClassIndex>(c);
      }
    }
    predicted[static_cast<size_t>(i)] = argmin_decision(d.row(i).transpose()).label;
  }
}

inline void check_model_matches(const Model& model, const TrainingBatch& batch) {
  if (model.dim() != batch.xz.cols()) throw std::invalid_argument("model/data dimension mismatch");
  if (model.num_classes() != batch.classes) throw std::invalid_argument("model/data class mismatch");
}

}  // namespace detail

/// GLVQ objective (identity squashing) for the angle and partial-distance
/// variants: mean relative cost, or the cost-weighted sum when `gamma` is set.
inline ObjectiveEvaluation glvq_objective(const Model& model, const TrainingBatch& batch,
                                          const CostWeightMatrix* gamma = nullptr,
                                          bool with_gradient = true) {
  detail::check_model_matches(model, batch);
  const auto n = batch.size();
  const int C = model.num_classes();
  ObjectiveEvaluation out;
  const bool euclid = model.variant == Variant::EuclideanPartial;

  Matrix b;
  Matrix d;
  if (euclid) {
    d.resize(n, C);
    for (int c = 0; c < C; ++c) {
      const Matrix& om = model.metric_for(c).matrix();
      const Eigen::RowVectorXd w = model.prototypes.row(c);
      const Matrix diff = batch.mask.select(batch.xz.rowwise() - w, 0.0);
      d.col(c) = batch.observed_factor.cwiseProduct((diff * om.transpose()).rowwise().squaredNorm());
    }
  } else {
    b = cosine_matrix(model, batch.xz);
    d = b.unaryExpr([&](double v) { return g_beta(v, model.steepness); });
  }

  std::vector<ClassIndex> wrong;
  detail::winners(d, batch.labels, wrong, out.predictions);
  const Vector weight = detail::sample_weights(batch, out.predictions, gamma);

  Matrix k = Matrix::Zero(n, C);  // dE / dd(i, c)
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto y = batch.labels[static_cast<size_t>(i)];
    const auto kw = wrong[static_cast<size_t>(i)];
    const double dj = d(i, y);
    const double dk = d(i, kw);
    const double s = dj + dk;
    out.cost += weight(i) * glvq_relative_cost(dj, dk);
    k(i, y) = weight(i) * 2.0 * dk / (s * s);
    k(i, kw) = -weight(i) * 2.0 * dj / (s * s);
  }
  if (!std::isfinite(out.cost)) throw std::domain_error("non-finite training cost");
  if (!with_gradient) return out;

  if (!euclid) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int c = 0; c < C; ++c) {
        if (k(i, c) != 0.0) k(i, c) *= g_beta_derivative(b(i, c), model.steepness);
      }
    }
    out.gradient = detail::cosine_chain(model, batch, b, k);
    return out;
  }

  // Partial distance: dd/dw = -2 f m.(Lambda delta), dd/dOmega = 2 f Omega delta delta'.
  const auto dim = model.dim();
  out.gradient.prototypes = Matrix::Zero(C, dim);
  std::vector<Matrix> s(model.metrics.size(), Matrix::Zero(dim, dim));
  for (int c = 0; c < C; ++c) {
    const Matrix lambda = model.metric_for(c).lambda();
    const Eigen::RowVectorXd w = model.prototypes.row(c);
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (k(i, c) != 0.0) rows.push_back(i);
    }
    if (rows.empty()) continue;
    Matrix delta(static_cast<Eigen::Index>(rows.size()), dim);
    Vector coef(static_cast<Eigen::Index>(rows.size()));
    for (size_t r = 0; r < rows.size(); ++r) {
      const auto i = rows[r];
      delta.row(static_cast<Eigen::Index>(r)) =
          batch.mask.row(i).select(batch.xz.row(i) - w, 0.0);
      coef(static_cast<Eigen::Index>(r)) = 2.0 * k(i, c) * batch.observed_factor(i);
    }
    const Matrix ld = delta * lambda;  // rows are (Lambda delta)'
    Eigen::RowVectorXd gw = Eigen::RowVectorXd::Zero(dim);
    for (size_t r = 0; r < rows.size(); ++r) {
      const auto i = rows[r];
      gw -= coef(static_cast<Eigen::Index>(r)) *
            batch.mask.row(i).select(ld.row(static_cast<Eigen::Index>(r)), 0.0);
    }
    out.gradient.prototypes.row(c) = gw;
    s[model.is_local() ? static_cast<size_t>(c) : 0] +=
        delta.transpose() * coef.asDiagonal() * delta;
  }
  for (size_t m = 0; m < model.metrics.size(); ++m) {
    out.gradient.omegas.push_back(model.metrics[m].matrix() * s[m]);
  }
  return out;
}

/// Expected KL divergence between smoothed targets and posteriors.
/// dH_i/db_j = (g'_j / sum g) [ln r_j - sum_c phat_c ln r_c], r = phat / p.
inline ObjectiveEvaluation kl_training_objective(const Model& model, const TrainingBatch& batch,
                                                 double label_smoothing,
                                                 const CostWeightMatrix* gamma = nullptr,
                                                 bool with_gradient = true) {
  detail::check_model_matches(model, batch);
  const auto n = batch.size();
  const int C = model.num_classes();
  const double theta = model.steepness;
  const Matrix b = cosine_matrix(model, batch.xz);
  const Matrix logg = b.unaryExpr([&](double v) { return log_g_theta(v, theta); });

  ObjectiveEvaluation out;
  out.predictions.resize(static_cast<size_t>(n));
  Matrix logp(n, C);
  Vector lse(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mx = logg.row(i).maxCoeff();
    if (!std::isfinite(mx)) throw std::domain_error("all posterior numerators are zero");
    lse(i) = mx + std::log((logg.row(i).array() - mx).exp().sum());
    logp.row(i) = logg.row(i).array() - lse(i);
    Eigen::Index arg = 0;
    logp.row(i).maxCoeff(&arg);
    out.predictions[static_cast<size_t>(i)] = static_cast<ClassIndex>(arg);
  }
  const Vector weight = detail::sample_weights(batch, out.predictions, gamma);

  Matrix k = Matrix::Zero(n, C);
  const double floor = std::log(std::numeric_limits<double>::min());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto y = batch.labels[static_cast<size_t>(i)];
    const Vector target = smoothed_target(y, C, label_smoothing).p;
    Vector logr(C);
    double h = 0.0;
    for (int c = 0; c < C; ++c) {
      logr(c) = std::max(logp(i, c), floor) - std::log(target(c));
      h += std::exp(logp(i, c)) * logr(c);
    }
    out.cost += weight(i) * h;
    if (!with_gradient) continue;
    for (int c = 0; c < C; ++c) {
      const double ratio = std::exp(log_g_theta_derivative(b(i, c), theta) - lse(i));
      k(i, c) = weight(i) * ratio * (logr(c) - h);
    }
  }
  if (!std::isfinite(out.cost)) throw std::domain_error("non-finite training cost");
  if (with_gradient) out.gradient = detail::cosine_chain(model, batch, b, k);
  return out;
}

struct TrainConfig {
  Variant variant = Variant::AngleGlobal;
  Eigen::Index rank = 0;          // 0 means full rank D
  double steepness = 1.0;         // beta, or Theta for the probabilistic variant
  int epochs = 300;
  double learn_rate_w = 0.05;     // length of a normalized prototype step
  double learn_rate_omega = 0.05; // Frobenius length of a normalized metric step
  double rate_growth = 1.1;       // after an accepted step
  double rate_shrink = 0.5;       // after a rejected step
  std::uint64_t seed = 1;
  std::optional<CostWeightMatrix> cost_weights;
  double label_smoothing = 0.01;
  double tolerance = 1e-7;
  int patience = 10;
  double init_noise = 0.01;

  void validate(Eigen::Index dim, int classes) const {
    if (rank < 0 || rank > dim) throw std::invalid_argument("rank must satisfy 1 <= M <= D");
    if (!(steepness > 0.0)) throw std::invalid_argument("steepness must be positive");
    if (epochs < 0) throw std::invalid_argument("epochs must be nonnegative");
    if (!(learn_rate_w > 0.0) || !(learn_rate_omega > 0.0)) {
      throw std::invalid_argument("learning rates must be positive");
    }
    if (!(rate_growth >= 1.0) || !(rate_shrink > 0.0 && rate_shrink < 1.0)) {
      throw std::invalid_argument("rate growth must be >= 1 and shrink in (0, 1)");
    }
    if (!(label_smoothing >= 0.0) ||
        label_smoothing >= static_cast<double>(classes - 1) / classes) {
      throw std::invalid_argument("label smoothing must satisfy 0 <= eps < (C-1)/C");
    }
    if (cost_weights && cost_weights->num_classes() != classes) {
      throw std::invalid_argument("cost weight matrix size does not match class count");
    }
  }
};

struct TrainResult {
  Model model;
  std::vector<double> cost_trace;  // cost after each accepted step, starting at init
  int epochs_run = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

/// Class means over observed entries plus small Gaussian noise, and a random
/// projection with entries in [-1, 1]; both normalized as training keeps them.
inline Model initial_model(const LabeledDataset& data, const TrainConfig& config) {
  config.validate(data.dim(), data.num_classes());
  const int C = data.num_classes();
  const auto dim = data.dim();
  const auto rank = config.rank == 0 ? dim : config.rank;
  const auto counts = data.class_counts();
  for (int c = 0; c < C; ++c) {
    if (counts[static_cast<size_t>(c)] == 0) {
      throw std::invalid_argument("class '" + data.class_names()[static_cast<size_t>(c)] +
                                  "' absent from training set");
    }
  }
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> noise(0.0, config.init_noise);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);

  Model m;
  m.variant = config.variant;
  m.steepness = config.steepness;
  m.prototypes = Matrix::Zero(C, dim);
  Matrix sums = Matrix::Zero(C, dim);
  Matrix seen = Matrix::Zero(C, dim);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index d = 0; d < dim; ++d) {
      if (data.mask()(i, d)) {
        sums(data.label(i), d) += data.values()(i, d);
        seen(data.label(i), d) += 1.0;
      }
    }
  }
  for (int c = 0; c < C; ++c) {
    for (Eigen::Index d = 0; d < dim; ++d) {
      const double mean = seen(c, d) > 0.0 ? sums(c, d) / seen(c, d) : 0.0;
      m.prototypes(c, d) = mean + noise(rng);
    }
    if (is_angle_variant(config.variant)) m.prototypes.row(c).normalize();
  }
  const int metrics = config.variant == Variant::AngleLocal ? C : 1;
  for (int k = 0; k < metrics; ++k) {
    Matrix om(rank, dim);
    for (Eigen::Index r = 0; r < rank; ++r) {
      for (Eigen::Index d = 0; d < dim; ++d) om(r, d) = unif(rng);
    }
    m.metrics.push_back(ProjectionMatrix::normalized(std::move(om)));
  }
  m.validate();
  return m;
}

namespace detail {

inline ObjectiveEvaluation evaluate_objective(const Model& model, const TrainingBatch& batch,
                                              const TrainConfig& config, bool with_gradient) {
  const CostWeightMatrix* gamma = config.cost_weights ? &*config.cost_weights : nullptr;
  if (model.variant == Variant::Probabilistic) {
    return kl_training_objective(model, batch, config.label_smoothing, gamma, with_gradient);
  }
  return glvq_objective(model, batch, gamma, with_gradient);
}

inline Model take_step(const Model& model, const ModelGradient& g, double rate_w,
                       double rate_omega) {
  Model next = model;
  const double gw = g.prototypes.norm();
  if (gw > 0.0) next.prototypes -= (rate_w / gw) * g.prototypes;
  if (is_angle_variant(model.variant)) next.prototypes.rowwise().normalize();
  double go = 0.0;
  for (const auto& o : g.omegas) go += o.squaredNorm();
  go = std::sqrt(go);
  for (size_t k = 0; k < next.metrics.size(); ++k) {
    Matrix om = model.metrics[k].matrix();
    if (go > 0.0) om -= (rate_omega / go) * g.omegas[k];
    next.metrics[k] = ProjectionMatrix::normalized(std::move(om));
  }
  return next;
}

}  // namespace detail

/// Full-batch descent along normalized gradient directions. A step that
/// raises the cost is rejected and both rates are halved; an accepted step
/// grows them slightly. Prototypes return to the unit sphere (angle variants)
/// and each Omega to unit trace after every step.
inline TrainResult train_model(const LabeledDataset& train, const TrainConfig& config,
                               std::optional<Model> start = std::nullopt) {
  TrainResult res;
  res.model = start ? *start : initial_model(train, config);
  res.model.validate();
  if (res.model.variant != config.variant) {
    throw std::invalid_argument("start model variant differs from the configuration");
  }
  const TrainingBatch batch(train);
  ObjectiveEvaluation current = detail::evaluate_objective(res.model, batch, config, true);
  res.cost_trace.push_back(current.cost);
  double rate_w = config.learn_rate_w;
  double rate_omega = config.learn_rate_omega;
  int quiet = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    res.epochs_run = epoch + 1;
    Model candidate = detail::take_step(res.model, current.gradient, rate_w, rate_omega);
    ObjectiveEvaluation next = detail::evaluate_objective(candidate, batch, config, true);
    double change = 0.0;
    if (next.cost <= current.cost) {
      change = current.cost - next.cost;
      res.model = std::move(candidate);
      current = std::move(next);
      res.cost_trace.push_back(current.cost);
      rate_w *= config.rate_growth;
      rate_omega *= config.rate_growth;
    } else {
      rate_w *= config.rate_shrink;
      rate_omega *= config.rate_shrink;
    }
    quiet = change < config.tolerance ? quiet + 1 : 0;
    if (quiet >= config.patience) {
      res.converged = true;
      break;
    }
  }
  if (res.cost_trace.back() > res.cost_trace.front()) {
    res.warnings.push_back("final training cost exceeds the initial cost");
  }
  return res;
}

/// Deterministic angle variants (global or local metric) and the Euclidean baseline.
inline TrainResult train_alvq(const LabeledDataset& train, TrainConfig config) {
  if (config.variant == Variant::Probabilistic) config.variant = Variant::AngleGlobal;
  return train_model(train, config);
}

inline TrainResult train_plvq(const LabeledDataset& train, TrainConfig config) {
  config.variant = Variant::Probabilistic;
  return train_model(train, config);
}

// Flat parameter vectors for gradient checking: prototypes row-major, then
// each Omega row-major.

inline Vector pack_parameters(const Model& model) {
  Eigen::Index size = model.prototypes.size();
  for (const auto& m : model.metrics) size += m.matrix().size();
  Vector out(size);
  Eigen::Index at = 0;
  for (Eigen::Index r = 0; r < model.prototypes.rows(); ++r) {
    for (Eigen::Index c = 0; c < model.prototypes.cols(); ++c) out(at++) = model.prototypes(r, c);
  }
  for (const auto& m : model.metrics) {
    for (Eigen::Index r = 0; r < m.matrix().rows(); ++r) {
      for (Eigen::Index c = 0; c < m.matrix().cols(); ++c) out(at++) = m.matrix()(r, c);
    }
  }
  return out;
}

inline Vector pack_gradient(const ModelGradient& g) {
  Eigen::Index size = g.prototypes.size();
  for (const auto& m : g.omegas) size += m.size();
  Vector out(size);
  Eigen::Index at = 0;
  for (Eigen::Index r = 0; r < g.prototypes.rows(); ++r) {
    for (Eigen::Index c = 0; c < g.prototypes.cols(); ++c) out(at++) = g.prototypes(r, c);
  }
  for (const auto& m : g.omegas) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) out(at++) = m(r, c);
    }
  }
  return out;
}

/// Same layout as `like`, parameters taken from `flat` (no normalization).
inline Model unpack_parameters(const Model& like, const Vector& flat) {
  Model m = like;
  Eigen::Index at = 0;
  for (Eigen::Index r = 0; r < m.prototypes.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.prototypes.cols(); ++c) m.prototypes(r, c) = flat(at++);
  }
  for (auto& metric : m.metrics) {
    Matrix om = metric.matrix();
    for (Eigen::Index r = 0; r < om.rows(); ++r) {
      for (Eigen::Index c = 0; c < om.cols(); ++c) om(r, c) = flat(at++);
    }
    metric = ProjectionMatrix(std::move(om));
  }
  if (at != flat.size()) throw std::invalid_argument("parameter vector has the wrong length");
  return m;
}

struct GradientCheck {
  double max_relative_error = 0.0;
  Eigen::Index worst_index = -1;
};

/// Central differences of `objective` at `params` against `analytic`. The
/// relative error of entry j uses max(|a_j|, |fd_j|, 1e-3 max_k |fd_k|) as
/// denominator so that entries near zero are judged on the gradient's scale.
inline GradientCheck finite_difference_check(const std::function<double(const Vector&)>& objective,
                                             const Vector& params, const Vector& analytic,
                                             double step) {
  if (analytic.size() != params.size()) throw std::invalid_argument("gradient size mismatch");
  if (!(step > 0.0)) throw std::invalid_argument("step must be positive");
  if (!std::isfinite(objective(params))) throw std::domain_error("objective not finite");
  Vector fd(params.size());
  Vector p = params;
  for (Eigen::Index j = 0; j < params.size(); ++j) {
    p(j) = params(j) + step;
    const double up = objective(p);
    p(j) = params(j) - step;
    const double down = objective(p);
    p(j) = params(j);
    if (!std::isfinite(up) || !std::isfinite(down)) throw std::domain_error("objective not finite");
    fd(j) = (up - down) / (2.0 * step);
  }
  const double scale = 1e-3 * fd.cwiseAbs().maxCoeff();
  GradientCheck out;
  for (Eigen::Index j = 0; j < params.size(); ++j) {
    const double denom = std::max({std::abs(analytic(j)), std::abs(fd(j)), scale,
                                   std::numeric_limits<double>::min()});
    const double err = std::abs(analytic(j) - fd(j)) / denom;
    if (err > out.max_relative_error) {
      out.max_relative_error = err;
      out.worst_index = j;
    }
  }
  return out;
}

/// Gradient check of the model's own training objective at its current parameters.
inline GradientCheck check_model_gradient(const Model& model, const LabeledDataset& data,
                                          const TrainConfig& config, double step = 1e-6) {
  const TrainingBatch batch(data);
  const auto analytic = detail::evaluate_objective(model, batch, config, true);
  auto f = [&](const Vector& flat) {
    return detail::evaluate_objective(unpack_parameters(model, flat), batch, config, false).cost;
  };
  return finite_difference_check(f, pack_parameters(model), pack_gradient(analytic.gradient),
                                 step);
}

}  // namespace geolvq
