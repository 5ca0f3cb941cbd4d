#pragma once

// Data model for possibly-incomplete labeled datasets: construction checks,
// z-score standardization over observed entries, pairwise ratio features and
// stratified fold assignment.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace geolvq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;
using MaskRow = Eigen::Array<bool, 1, Eigen::Dynamic>;

/// Class labels are 0-based indices into `LabeledDataset::class_names()`.
using ClassIndex = int;

/// N x D values with a per-entry observed mask and class labels.
///
/// Immutable after construction. Entries of `values()` where the mask is false
/// carry no meaning; every accessor that computes statistics ignores them.
class LabeledDataset {
 public:
  LabeledDataset() = default;

  LabeledDataset(Matrix values, Mask mask, std::vector<ClassIndex> labels,
                 std::vector<std::string> feature_names,
                 std::vector<std::string> class_names)
      : values_(std::move(values)),
        mask_(std::move(mask)),
        labels_(std::move(labels)),
        feature_names_(std::move(feature_names)),
        class_names_(std::move(class_names)) {
    validate();
  }

  /// Fully observed dataset with generated feature/class names.
  static LabeledDataset complete(Matrix values, std::vector<ClassIndex> labels,
                                 int num_classes) {
    Mask mask = Mask::Constant(values.rows(), values.cols(), true);
    return with_default_names(std::move(values), std::move(mask), std::move(labels),
                              num_classes);
  }

  static LabeledDataset with_default_names(Matrix values, Mask mask,
                                           std::vector<ClassIndex> labels,
                                           int num_classes) {
    std::vector<std::string> features(static_cast<size_t>(values.cols()));
    for (size_t d = 0; d < features.size(); ++d) features[d] = "f" + std::to_string(d + 1);
    std::vector<std::string> classes(static_cast<size_t>(num_classes));
    for (size_t c = 0; c < classes.size(); ++c) classes[c] = std::to_string(c + 1);
    return LabeledDataset(std::move(values), std::move(mask), std::move(labels),
                          std::move(features), std::move(classes));
  }

  Eigen::Index size() const { return values_.rows(); }
  Eigen::Index dim() const { return values_.cols(); }
  int num_classes() const { return static_cast<int>(class_names_.size()); }

  const Matrix& values() const { return values_; }
  const Mask& mask() const { return mask_; }
  const std::vector<ClassIndex>& labels() const { return labels_; }
  ClassIndex label(Eigen::Index i) const { return labels_[static_cast<size_t>(i)]; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  const std::vector<std::string>& class_names() const { return class_names_; }

  /// Row i with missing coordinates set to zero.
  Vector zero_filled(Eigen::Index i) const {
    return mask_.row(i).transpose().select(values_.row(i).transpose(), 0.0);
  }

  /// All rows with missing coordinates set to zero.
  Matrix zero_filled() const { return mask_.select(values_, 0.0); }

  bool has_missing() const { return !mask_.all(); }
  Eigen::Index missing_count() const { return mask_.size() - mask_.count(); }

  std::vector<Eigen::Index> class_counts() const {
    std::vector<Eigen::Index> counts(class_names_.size(), 0);
    for (ClassIndex y : labels_) ++counts[static_cast<size_t>(y)];
    return counts;
  }

  /// Samples in `indices` order; class and feature names are kept.
  LabeledDataset subset(const std::vector<Eigen::Index>& indices) const {
    Matrix v(static_cast<Eigen::Index>(indices.size()), dim());
    Mask m(static_cast<Eigen::Index>(indices.size()), dim());
    std::vector<ClassIndex> y(indices.size());
    for (size_t r = 0; r < indices.size(); ++r) {
      v.row(static_cast<Eigen::Index>(r)) = values_.row(indices[r]);
      m.row(static_cast<Eigen::Index>(r)) = mask_.row(indices[r]);
      y[r] = labels_[static_cast<size_t>(indices[r])];
    }
    return LabeledDataset(std::move(v), std::move(m), std::move(y), feature_names_,
                          class_names_);
  }

  /// Same samples, replaced values/mask (dimension may change with new names).
  LabeledDataset with_features(Matrix values, Mask mask,
                               std::vector<std::string> feature_names) const {
    return LabeledDataset(std::move(values), std::move(mask), labels_,
                          std::move(feature_names), class_names_);
  }

  /// Rows of `other` appended; both must share dimension and class names.
  LabeledDataset concatenated(const LabeledDataset& other) const {
    if (other.dim() != dim() || other.class_names_ != class_names_) {
      throw std::invalid_argument("cannot concatenate datasets with different layout");
    }
    Matrix v(size() + other.size(), dim());
    v << values_, other.values_;
    Mask m(size() + other.size(), dim());
    m << mask_, other.mask_;
    std::vector<ClassIndex> y = labels_;
    y.insert(y.end(), other.labels_.begin(), other.labels_.end());
    return LabeledDataset(std::move(v), std::move(m), std::move(y), feature_names_,
                          class_names_);
  }

 private:
  void validate() const {
    if (values_.rows() < 1 || values_.cols() < 1) {
      throw std::invalid_argument("dataset needs at least one sample and one feature");
    }
    if (mask_.rows() != values_.rows() || mask_.cols() != values_.cols()) {
      throw std::invalid_argument("mask shape does not match values");
    }
    if (static_cast<Eigen::Index>(labels_.size()) != values_.rows()) {
      throw std::invalid_argument("label count does not match sample count");
    }
    if (static_cast<Eigen::Index>(feature_names_.size()) != values_.cols()) {
      throw std::invalid_argument("feature name count does not match dimension");
    }
    if (class_names_.size() < 2) {
      throw std::invalid_argument("dataset needs at least two classes");
    }
    const int c = num_classes();
    for (ClassIndex y : labels_) {
      if (y < 0 || y >= c) throw std::invalid_argument("label out of range");
    }
    for (Eigen::Index i = 0; i < mask_.rows(); ++i) {
      if (!mask_.row(i).any()) {
        throw std::invalid_argument("sample fully unobserved (row " + std::to_string(i) + ")");
      }
      for (Eigen::Index d = 0; d < values_.cols(); ++d) {
        if (mask_(i, d) && !std::isfinite(values_(i, d))) {
          throw std::invalid_argument("non-finite observed value at row " + std::to_string(i));
        }
      }
    }
  }

  Matrix values_;
  Mask mask_;
  std::vector<ClassIndex> labels_;
  std::vector<std::string> feature_names_;
  std::vector<std::string> class_names_;
};

struct StandardizationParams {
  Vector means;
  Vector stds;
  std::vector<Eigen::Index> computed_on;
};

/// Per-feature mean and sample standard deviation over observed entries.
/// Features with zero observed variance (or a single observation) get std 1.
inline StandardizationParams standardize_fit(const LabeledDataset& train) {
  const Eigen::Index dim = train.dim();
  StandardizationParams p{Vector::Zero(dim), Vector::Ones(dim),
                          std::vector<Eigen::Index>(static_cast<size_t>(dim), 0)};
  for (Eigen::Index d = 0; d < dim; ++d) {
    double sum = 0.0;
    Eigen::Index n = 0;
    for (Eigen::Index i = 0; i < train.size(); ++i) {
      if (train.mask()(i, d)) {
        sum += train.values()(i, d);
        ++n;
      }
    }
    if (n == 0) {
      throw std::invalid_argument("feature '" + train.feature_names()[static_cast<size_t>(d)] +
                                  "' has no observed entries");
    }
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (Eigen::Index i = 0; i < train.size(); ++i) {
      if (train.mask()(i, d)) ss += (train.values()(i, d) - mean) * (train.values()(i, d) - mean);
    }
    double sd = n >= 2 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    if (!(sd > 0.0)) sd = 1.0;
    p.means(d) = mean;
    p.stds(d) = sd;
    p.computed_on[static_cast<size_t>(d)] = n;
  }
  return p;
}

inline LabeledDataset standardize_apply(const LabeledDataset& data,
                                        const StandardizationParams& params) {
  if (params.means.size() != data.dim() || params.stds.size() != data.dim()) {
    throw std::invalid_argument("standardization dimension mismatch");
  }
  Matrix v = data.values();
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    for (Eigen::Index d = 0; d < v.cols(); ++d) {
      if (data.mask()(i, d)) v(i, d) = (v(i, d) - params.means(d)) / params.stds(d);
    }
  }
  return data.with_features(std::move(v), data.mask(), data.feature_names());
}

/// Feature (i, j), i < j, is values[i] / values[j]; observed iff both are.
inline LabeledDataset pairwise_ratio_expand(const LabeledDataset& data) {
  const Eigen::Index dim = data.dim();
  if (dim < 2) throw std::invalid_argument("ratio expansion needs at least two features");
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index d = 0; d < dim; ++d) {
      if (data.mask()(i, d) && !(data.values()(i, d) > 0.0)) {
        throw std::invalid_argument("nonpositive observed value in feature '" +
                                    data.feature_names()[static_cast<size_t>(d)] + "'");
      }
    }
  }
  const Eigen::Index out_dim = dim * (dim - 1) / 2;
  Matrix v = Matrix::Zero(data.size(), out_dim);
  Mask m = Mask::Constant(data.size(), out_dim, false);
  std::vector<std::string> names;
  names.reserve(static_cast<size_t>(out_dim));
  Eigen::Index col = 0;
  for (Eigen::Index a = 0; a < dim; ++a) {
    for (Eigen::Index b = a + 1; b < dim; ++b, ++col) {
      names.push_back(data.feature_names()[static_cast<size_t>(a)] + "/" +
                      data.feature_names()[static_cast<size_t>(b)]);
      for (Eigen::Index i = 0; i < data.size(); ++i) {
        if (data.mask()(i, a) && data.mask()(i, b)) {
          m(i, col) = true;
          v(i, col) = data.values()(i, a) / data.values()(i, b);
        }
      }
    }
  }
  return data.with_features(std::move(v), std::move(m), std::move(names));
}

struct FoldAssignment {
  std::vector<int> fold_of_sample;  // 0-based fold per sample
  int folds = 0;

  std::vector<Eigen::Index> members(int fold) const {
    std::vector<Eigen::Index> out;
    for (size_t i = 0; i < fold_of_sample.size(); ++i) {
      if (fold_of_sample[i] == fold) out.push_back(static_cast<Eigen::Index>(i));
    }
    return out;
  }

  std::vector<Eigen::Index> complement(int fold) const {
    std::vector<Eigen::Index> out;
    for (size_t i = 0; i < fold_of_sample.size(); ++i) {
      if (fold_of_sample[i] != fold) out.push_back(static_cast<Eigen::Index>(i));
    }
    return out;
  }
};

/// Per class: shuffle with the seed and deal round-robin. The dealing position
/// carries over between classes so that overall fold sizes stay balanced too.
inline FoldAssignment stratified_kfold(const LabeledDataset& data, int folds,
                                       std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("need at least two folds");
  const auto counts = data.class_counts();
  for (size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] > 0 && counts[c] < folds) {
      throw std::invalid_argument("class '" + data.class_names()[c] + "' has fewer than " +
                                  std::to_string(folds) + " members");
    }
  }
  std::mt19937_64 rng(seed);
  FoldAssignment out{std::vector<int>(static_cast<size_t>(data.size()), -1), folds};
  int next = 0;
  for (int c = 0; c < data.num_classes(); ++c) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      if (data.label(i) == c) idx.push_back(i);
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    for (Eigen::Index i : idx) {
      out.fold_of_sample[static_cast<size_t>(i)] = next;
      next = (next + 1) % folds;
    }
  }
  return out;
}

}  // namespace geolvq
