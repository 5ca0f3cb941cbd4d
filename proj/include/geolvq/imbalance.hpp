#pragma once

// Minority-class oversampling: SMOTE in the flat feature space and its
// geodesic counterpart on the unit hypersphere.
//
// With missing data a seed and its neighbour are combined on their mutually
// observed coordinates only; the synthetic sample's mask is the intersection.
// For the geodesic form both vectors are renormalized on that subspace first.

#include "geolvq/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace geolvq {

inline constexpr double kUnitTolerance = 1e-9;

struct SphereTangentVector {
  Vector origin;
  Vector components;
};

namespace detail {

inline void require_unit(const Vector& v, const char* what) {
  if (std::abs(v.norm() - 1.0) > kUnitTolerance) {
    throw std::invalid_argument(std::string(what) + " is not unit norm");
  }
}

}  // namespace detail

/// Log_x(p) = theta (p - x cos theta) / sin theta, with norm theta.
inline SphereTangentVector sphere_log_map(const Vector& origin, const Vector& point) {
  detail::require_unit(origin, "origin");
  detail::require_unit(point, "point");
  if (origin.size() != point.size()) throw std::invalid_argument("dimension mismatch");
  const double c = origin.dot(point);
  const Vector r = point - c * origin;  // |r| = sin theta
  const double s = r.norm();
  const double theta = std::atan2(s, c);
  if (std::numbers::pi - theta < 1e-8) throw std::domain_error("antipodal points have no unique Log");
  if (s == 0.0) return {origin, Vector::Zero(origin.size())};
  return {origin, (theta / s) * r};
}

/// Exp_x(t) = x cos|t| + t sin|t| / |t|.
inline Vector sphere_exp_map(const SphereTangentVector& t) {
  const double n = t.components.norm();
  if (n == 0.0) return t.origin;
  Vector out = std::cos(n) * t.origin + (std::sin(n) / n) * t.components;
  return out / out.norm();
}

inline Vector sphere_exp_map(const Vector& origin, const Vector& tangent) {
  return sphere_exp_map(SphereTangentVector{origin, tangent});
}

/// Point at fraction alpha along the shorter great-circle arc from x to y.
inline Vector geodesic_interpolate(const Vector& x, const Vector& y, double alpha) {
  const auto log = sphere_log_map(x, y);
  return sphere_exp_map(x, alpha * log.components);
}

/// Synthetic samples and where each came from (indices into the class sample list).
struct SmoteResult {
  Matrix values;
  Mask mask;
  std::vector<Eigen::Index> seed_index;
  std::vector<Eigen::Index> neighbor_index;
  std::vector<double> alpha;
};

enum class SmoteMethod { Euclidean, Geodesic };

namespace detail {

/// alpha uniform on the open interval (0, 1).
inline double open_unit(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double a = 0.0;
  while (a == 0.0) a = u(rng);
  return a;
}

/// Dissimilarity on mutually observed coordinates: 1 - cosine (geodesic
/// ordering) or mean squared difference (Euclidean). Infinity if disjoint.
inline double neighbor_distance(const Matrix& v, const Mask& m, Eigen::Index a, Eigen::Index b,
                                SmoteMethod method) {
  const auto both = (m.row(a) && m.row(b)).eval();
  const auto shared = both.count();
  if (shared == 0) return std::numeric_limits<double>::infinity();
  const Eigen::RowVectorXd xa = both.select(v.row(a), 0.0);
  const Eigen::RowVectorXd xb = both.select(v.row(b), 0.0);
  if (method == SmoteMethod::Euclidean) {
    return (xa - xb).squaredNorm() / static_cast<double>(shared);
  }
  const double na = xa.norm();
  const double nb = xb.norm();
  if (na == 0.0 || nb == 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 - xa.dot(xb) / (na * nb);
}

}  // namespace detail

/// Generates n_new synthetic samples from one class. Each draws a random seed
/// sample, one of its k nearest same-class neighbours and alpha in (0, 1).
inline SmoteResult smote(const Matrix& samples, const Mask& mask, int k, Eigen::Index n_new,
                         std::uint64_t seed, SmoteMethod method) {
  const Eigen::Index n = samples.rows();
  const Eigen::Index dim = samples.cols();
  if (mask.rows() != n || mask.cols() != dim) throw std::invalid_argument("mask shape mismatch");
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  if (n_new < 0) throw std::invalid_argument("n_new must be nonnegative");
  SmoteResult out{Matrix::Zero(n_new, dim), Mask::Constant(n_new, dim, false), {}, {}, {}};
  if (n_new == 0) return out;
  if (n < k + 1) {
    throw std::invalid_argument("insufficient samples: need at least k + 1 = " +
                                std::to_string(k + 1) + ", have " + std::to_string(n));
  }

  // k nearest neighbours per sample among those sharing observed coordinates.
  std::vector<std::vector<Eigen::Index>> nbrs(static_cast<size_t>(n));
  std::vector<Eigen::Index> usable;
  for (Eigen::Index a = 0; a < n; ++a) {
    std::vector<std::pair<double, Eigen::Index>> cand;
    for (Eigen::Index b = 0; b < n; ++b) {
      if (b == a) continue;
      const double d = detail::neighbor_distance(samples, mask, a, b, method);
      if (std::isfinite(d)) cand.emplace_back(d, b);
    }
    const size_t keep = std::min(cand.size(), static_cast<size_t>(k));
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep), cand.end());
    for (size_t j = 0; j < keep; ++j) nbrs[static_cast<size_t>(a)].push_back(cand[j].second);
    if (keep > 0) usable.push_back(a);
  }
  if (usable.empty()) throw std::invalid_argument("no sample shares observed features with another");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<size_t> pick_seed(0, usable.size() - 1);
  for (Eigen::Index s = 0; s < n_new; ++s) {
    const Eigen::Index a = usable[pick_seed(rng)];
    const auto& na = nbrs[static_cast<size_t>(a)];
    std::uniform_int_distribution<size_t> pick_nbr(0, na.size() - 1);
    const Eigen::Index b = na[pick_nbr(rng)];
    const double alpha = detail::open_unit(rng);
    const auto both = (mask.row(a) && mask.row(b)).eval();

    Vector x = both.transpose().select(samples.row(a).transpose(), 0.0);
    Vector y = both.transpose().select(samples.row(b).transpose(), 0.0);
    Vector z;
    if (method == SmoteMethod::Euclidean) {
      z = x + alpha * (y - x);
    } else {
      x.normalize();
      y.normalize();
      z = geodesic_interpolate(x, y, alpha);
    }
    out.values.row(s) = z.transpose();
    out.mask.row(s) = both;
    out.seed_index.push_back(a);
    out.neighbor_index.push_back(b);
    out.alpha.push_back(alpha);
  }
  return out;
}

/// Fully observed unit vectors in, unit vectors out.
inline Matrix geodesic_smote(const Matrix& unit_samples, int k, Eigen::Index n_new,
                             std::uint64_t seed) {
  for (Eigen::Index i = 0; i < unit_samples.rows(); ++i) {
    detail::require_unit(unit_samples.row(i).transpose(), "class sample");
  }
  const Mask all = Mask::Constant(unit_samples.rows(), unit_samples.cols(), true);
  return smote(unit_samples, all, k, n_new, seed, SmoteMethod::Geodesic).values;
}

inline Matrix euclidean_smote(const Matrix& samples, int k, Eigen::Index n_new,
                              std::uint64_t seed) {
  const Mask all = Mask::Constant(samples.rows(), samples.cols(), true);
  return smote(samples, all, k, n_new, seed, SmoteMethod::Euclidean).values;
}

/// Oversamples every class up to the majority count. Originals come first and
/// are untouched; each class draws from its own stream seeded by (seed, class).
inline LabeledDataset balance_training_set(const LabeledDataset& train, SmoteMethod method, int k,
                                           std::uint64_t seed) {
  const auto counts = train.class_counts();
  const auto target = *std::max_element(counts.begin(), counts.end());
  Eigen::Index extra = 0;
  for (auto c : counts) extra += target - c;
  if (extra == 0) return train;

  Matrix values(train.size() + extra, train.dim());
  Mask mask(train.size() + extra, train.dim());
  values.topRows(train.size()) = train.values();
  mask.topRows(train.size()) = train.mask();
  std::vector<ClassIndex> labels = train.labels();
  Eigen::Index at = train.size();

  for (int c = 0; c < train.num_classes(); ++c) {
    const auto need = target - counts[static_cast<size_t>(c)];
    if (need == 0) continue;
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < train.size(); ++i) {
      if (train.label(i) == c) idx.push_back(i);
    }
    const auto members = train.subset(idx);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(c)};
    std::array<std::uint32_t, 2> words{};
    seq.generate(words.begin(), words.end());
    const std::uint64_t stream = (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
    SmoteResult syn;
    try {
      syn = smote(members.values(), members.mask(), k, need, stream, method);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("class '" + train.class_names()[static_cast<size_t>(c)] +
                                  "': " + e.what());
    }
    values.middleRows(at, need) = syn.values;
    mask.middleRows(at, need) = syn.mask;
    labels.insert(labels.end(), static_cast<size_t>(need), c);
    at += need;
  }
  return LabeledDataset(std::move(values), std::move(mask), std::move(labels),
                        train.feature_names(), train.class_names());
}

}  // namespace geolvq
