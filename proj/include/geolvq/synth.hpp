#pragma once

// Synthetic benchmark: three classes on arc-shaped bands of the unit sphere
// that meet with their narrow ends at the north pole, a nonlinear 20-feature
// augmentation, and MCAR / block-structured MNAR missingness.

#include "geolvq/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace geolvq {

enum class MissingType { MCAR, MNAR };

inline std::string to_string(MissingType t) { return t == MissingType::MCAR ? "mcar" : "mnar"; }

inline MissingType missing_type_from_string(const std::string& s) {
  if (s == "mcar" || s == "MCAR") return MissingType::MCAR;
  if (s == "mnar" || s == "MNAR") return MissingType::MNAR;
  throw std::invalid_argument("unknown missingness type '" + s + "'");
}

struct SynthConfig {
  Eigen::Index n_per_class = 300;
  Eigen::Index n_test = 30072;
  double missing_fraction = 0.0;
  MissingType missing_type = MissingType::MCAR;
  double train_fraction = 1.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (n_per_class < 1 || n_test < 0) throw std::invalid_argument("sample counts must be positive");
    if (!(missing_fraction >= 0.0 && missing_fraction <= 0.6)) {
      throw std::invalid_argument("missing fraction must lie in [0, 0.6]");
    }
    if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
      throw std::invalid_argument("train fraction must lie in (0, 1]");
    }
  }
};

namespace detail {

/// Independent stream per (seed, purpose) so that e.g. the test set does not
/// share draws with the training set.
inline std::mt19937_64 stream(std::uint64_t seed, std::uint32_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), purpose};
  return std::mt19937_64(seq);
}

inline constexpr double kArcLength = 2.0 * std::numbers::pi / 3.0;
inline constexpr double kNarrowWidth = 0.05;
inline constexpr double kWideWidth = 0.35;

}  // namespace detail

/// n_per_class unit 3-vectors per class. Class k follows the meridian at
/// longitude 2 pi k / 3 from the pole over an arc of 2 pi / 3; the band is
/// 0.05 rad wide at the pole and widens linearly to 0.35 rad.
inline LabeledDataset generate_arcs(Eigen::Index n_per_class, std::uint64_t seed) {
  if (n_per_class < 1) throw std::invalid_argument("need at least one sample per class");
  auto rng = detail::stream(seed, 1);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Matrix v(3 * n_per_class, 3);
  std::vector<ClassIndex> labels;
  Eigen::Index row = 0;
  for (int k = 0; k < 3; ++k) {
    const double lon = 2.0 * std::numbers::pi * k / 3.0;
    const Eigen::Vector3d east(-std::sin(lon), std::cos(lon), 0.0);
    for (Eigen::Index i = 0; i < n_per_class; ++i) {
      const double s = detail::kArcLength * u01(rng);
      const double width = detail::kNarrowWidth + (detail::kWideWidth - detail::kNarrowWidth) * s / detail::kArcLength;
      const double off = width * (u01(rng) - 0.5);
      const Eigen::Vector3d centre(std::sin(s) * std::cos(lon), std::sin(s) * std::sin(lon), std::cos(s));
      const Eigen::Vector3d p = std::cos(off) * centre + std::sin(off) * east;
      v.row(row++) = p.normalized().transpose();
      labels.push_back(k);
    }
  }
  return LabeledDataset(std::move(v), Mask::Constant(3 * n_per_class, 3, true), std::move(labels),
                        {"x1", "x2", "x3"}, {"1", "2", "3"});
}

/// 3 -> 20 features: the originals, log10(x + 1.5), e^x, x^3, x^5 of each,
/// and five U(-1, 1) noise columns.
inline LabeledDataset augment_nonlinear(const LabeledDataset& data, std::uint64_t seed) {
  if (data.dim() != 3) throw std::invalid_argument("augmentation expects 3 input features");
  const auto n = data.size();
  Matrix out(n, 20);
  Mask mask(n, 20);
  std::vector<std::string> names;
  const auto& src = data.values();
  const auto& in_names = data.feature_names();
  for (int j = 0; j < 3; ++j) names.push_back(in_names[static_cast<size_t>(j)]);
  out.leftCols(3) = src;
  for (int j = 0; j < 3; ++j) {
    out.col(3 + j) = (src.col(j).array() + 1.5).log10().matrix();
    out.col(6 + j) = src.col(j).array().exp().matrix();
    out.col(9 + j) = src.col(j).array().cube().matrix();
    out.col(12 + j) = src.col(j).array().pow(5).matrix();
  }
  for (const char* f : {"log10(%+1.5)", "exp(%)", "%^3", "%^5"}) {
    for (int j = 0; j < 3; ++j) {
      std::string s = f;
      s.replace(s.find('%'), 1, in_names[static_cast<size_t>(j)]);
      names.push_back(s);
    }
  }
  auto rng = detail::stream(seed, 2);
  std::uniform_real_distribution<double> noise(-1.0, 1.0);
  for (int j = 0; j < 5; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) out(i, 15 + j) = noise(rng);
    names.push_back("noise" + std::to_string(j + 1));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int f = 0; f < 20; ++f) {
      const int base = f < 15 ? f % 3 : -1;
      mask(i, f) = base < 0 ? true : data.mask()(i, base);
    }
  }
  return LabeledDataset(std::move(out), std::move(mask), data.labels(), std::move(names), data.class_names());
}

namespace detail {

inline LabeledDataset with_mask(const LabeledDataset& data, Mask mask) {
  return LabeledDataset(data.values(), std::move(mask), data.labels(), data.feature_names(), data.class_names());
}

}  // namespace detail

/// Every entry is dropped independently with probability `fraction`. A
/// sample that would lose all features has its mask row redrawn.
inline LabeledDataset inject_mcar(const LabeledDataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 0.6)) throw std::invalid_argument("missing fraction must lie in [0, 0.6]");
  if (fraction == 0.0) return data;
  auto rng = detail::stream(seed, 3);
  std::bernoulli_distribution drop(fraction);
  Mask m = data.mask();
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (;;) {
      for (Eigen::Index j = 0; j < data.dim(); ++j) m(i, j) = data.mask()(i, j) && !drop(rng);
      if (m.row(i).any() || !data.mask().row(i).any()) break;
    }
  }
  return detail::with_mask(data, std::move(m));
}

struct MnarLayout {
  std::vector<int> study;   // 0, 1, 2 per sample; study 2 has no block
  std::vector<int> phase;   // 0 early (full block missing), 1 late (reduced block)
  std::array<std::vector<Eigen::Index>, 2> block;        // early missing features per study
  std::array<std::vector<Eigen::Index>, 2> late_block;   // still missing in the late phase
};

struct MnarResult {
  LabeledDataset data;
  MnarLayout layout;
};

/// Default blocks for the 20-feature synthetic layout: each of the first two
/// studies never measures one informative coordinate in any of its five
/// forms plus one noise column early on; later it starts measuring the
/// x^3, x^5 forms and the noise column.
inline std::array<std::vector<Eigen::Index>, 2> default_mnar_blocks(Eigen::Index dim) {
  if (dim == 20) return {std::vector<Eigen::Index>{0, 3, 6, 9, 12, 15}, std::vector<Eigen::Index>{1, 4, 7, 10, 13, 16}};
  if (dim < 12) throw std::invalid_argument("MNAR blocks need at least 12 features");
  std::vector<Eigen::Index> a, b;
  for (Eigen::Index j = 0; j < 6; ++j) {
    a.push_back(j);
    b.push_back(6 + j);
  }
  return {a, b};
}

/// Samples are split 0.4 / 0.4 / 0.2 into three pseudo-studies (by a random
/// permutation; the position in it is the time index). The first half of
/// study 1 (2) misses its 6-feature block, the second half only the first 3
/// of them; study 3 is complete. Uniform random masking of the remaining
/// observed entries then tops the overall missing rate up to `fraction`.
inline MnarResult inject_mnar(const LabeledDataset& data, double fraction, std::uint64_t seed,
                              std::array<std::vector<Eigen::Index>, 2> blocks = {}) {
  if (!(fraction >= 0.0 && fraction <= 0.6)) throw std::invalid_argument("missing fraction must lie in [0, 0.6]");
  const auto n = data.size();
  const auto dim = data.dim();
  if (blocks[0].empty()) blocks = default_mnar_blocks(dim);
  for (int s = 0; s < 2; ++s) {
    if (blocks[static_cast<size_t>(s)].size() != 6) throw std::invalid_argument("MNAR blocks must hold 6 features");
  }
  for (auto a : blocks[0]) {
    if (std::find(blocks[1].begin(), blocks[1].end(), a) != blocks[1].end()) {
      throw std::invalid_argument("MNAR blocks must be disjoint");
    }
  }
  MnarResult res{data, {}};
  auto& lay = res.layout;
  lay.study.assign(static_cast<size_t>(n), 2);
  lay.phase.assign(static_cast<size_t>(n), 0);
  for (int s = 0; s < 2; ++s) {
    lay.block[static_cast<size_t>(s)] = blocks[static_cast<size_t>(s)];
    lay.late_block[static_cast<size_t>(s)] =
        std::vector<Eigen::Index>(blocks[static_cast<size_t>(s)].begin(), blocks[static_cast<size_t>(s)].begin() + 3);
  }
  if (fraction == 0.0) return res;

  auto rng = detail::stream(seed, 4);
  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n1 = static_cast<Eigen::Index>(std::llround(0.4 * static_cast<double>(n)));
  const auto n2 = static_cast<Eigen::Index>(std::llround(0.4 * static_cast<double>(n)));
  Mask m = data.mask();
  for (int s = 0; s < 2; ++s) {
    const Eigen::Index begin = s == 0 ? 0 : n1;
    const Eigen::Index size = s == 0 ? n1 : n2;
    for (Eigen::Index t = 0; t < size; ++t) {
      const auto i = order[static_cast<size_t>(begin + t)];
      const bool late = t >= size / 2;
      lay.study[static_cast<size_t>(i)] = s;
      lay.phase[static_cast<size_t>(i)] = late ? 1 : 0;
      const auto& blk = late ? lay.late_block[static_cast<size_t>(s)] : lay.block[static_cast<size_t>(s)];
      for (auto j : blk) m(i, j) = false;
    }
  }
  const double total = static_cast<double>(n * dim);
  const auto target = static_cast<Eigen::Index>(std::llround(fraction * total));
  const auto missing = static_cast<Eigen::Index>(total) - m.count();
  if (missing > target) {
    throw std::invalid_argument("missing fraction " + std::to_string(fraction) +
                                " is unreachable: the study blocks alone remove " +
                                std::to_string(static_cast<double>(missing) / total));
  }
  std::vector<Eigen::Index> cells;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      if (m(i, j)) cells.push_back(i * dim + j);
    }
  }
  std::shuffle(cells.begin(), cells.end(), rng);
  Eigen::VectorXi left = m.rowwise().count().cast<int>();
  Eigen::Index need = target - missing;
  for (size_t c = 0; c < cells.size() && need > 0; ++c) {
    const auto i = cells[c] / dim;
    const auto j = cells[c] % dim;
    if (left(i) <= 1) continue;  // keep at least one observed feature
    m(i, j) = false;
    --left(i);
    --need;
  }
  if (need > 0) throw std::invalid_argument("missing fraction is unreachable without emptying samples");
  res.data = detail::with_mask(data, std::move(m));
  return res;
}

/// Stratified subsample of round(fraction * n_c) samples per class (at least
/// one), returned as sorted row indices.
inline std::vector<Eigen::Index> subsample_indices(const LabeledDataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("fraction must lie in (0, 1]");
  std::vector<Eigen::Index> keep;
  if (fraction == 1.0) {
    keep.resize(static_cast<size_t>(data.size()));
    std::iota(keep.begin(), keep.end(), 0);
    return keep;
  }
  auto rng = detail::stream(seed, 5);
  for (int c = 0; c < data.num_classes(); ++c) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      if (data.label(i) == c) idx.push_back(i);
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto take = std::max<size_t>(1, static_cast<size_t>(std::llround(fraction * static_cast<double>(idx.size()))));
    keep.insert(keep.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(std::min(take, idx.size())));
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

inline LabeledDataset subsample_fraction(const LabeledDataset& data, double fraction, std::uint64_t seed) {
  if (fraction == 1.0) return data;
  return data.subset(subsample_indices(data, fraction, seed));
}

inline LabeledDataset inject_missing(const LabeledDataset& data, double fraction, MissingType type,
                                     std::uint64_t seed) {
  return type == MissingType::MCAR ? inject_mcar(data, fraction, seed) : inject_mnar(data, fraction, seed).data;
}

struct SynthBenchmark {
  LabeledDataset train;
  LabeledDataset test;
  std::optional<MnarLayout> train_layout;  // MNAR only, rows aligned with `train`
  std::optional<MnarLayout> test_layout;
};

namespace detail {

inline MnarLayout layout_subset(const MnarLayout& lay, const std::vector<Eigen::Index>& rows) {
  MnarLayout out{{}, {}, lay.block, lay.late_block};
  for (auto i : rows) {
    out.study.push_back(lay.study[static_cast<size_t>(i)]);
    out.phase.push_back(lay.phase[static_cast<size_t>(i)]);
  }
  return out;
}

inline std::pair<LabeledDataset, std::optional<MnarLayout>> masked(const LabeledDataset& data, const SynthConfig& cfg,
                                                                   std::uint64_t seed) {
  if (cfg.missing_type == MissingType::MCAR) return {inject_mcar(data, cfg.missing_fraction, seed), std::nullopt};
  auto r = inject_mnar(data, cfg.missing_fraction, seed);
  return {std::move(r.data), std::move(r.layout)};
}

}  // namespace detail

/// Training set (3 x n_per_class, then subsampled) and independent hold-out
/// set, both augmented to 20 features and masked as configured.
inline SynthBenchmark make_benchmark(const SynthConfig& cfg) {
  cfg.validate();
  const std::uint64_t test_seed = cfg.seed ^ 0x9e3779b97f4a7c15ULL;
  SynthBenchmark b;
  auto [train, train_lay] = detail::masked(augment_nonlinear(generate_arcs(cfg.n_per_class, cfg.seed), cfg.seed), cfg, cfg.seed);
  const auto keep = subsample_indices(train, cfg.train_fraction, cfg.seed);
  b.train = cfg.train_fraction == 1.0 ? std::move(train) : train.subset(keep);
  if (train_lay) b.train_layout = detail::layout_subset(*train_lay, keep);
  const Eigen::Index per = std::max<Eigen::Index>(1, cfg.n_test / 3);
  auto [test, test_lay] = detail::masked(augment_nonlinear(generate_arcs(per, test_seed), test_seed), cfg, test_seed);
  b.test = std::move(test);
  b.test_layout = std::move(test_lay);
  return b;
}

/// GCMS-like ratio data: positive base intensities where a few bases shift
/// between classes, expanded to all pairwise ratios a/b. Only ratios that
/// involve an informative base carry class information.
inline LabeledDataset generate_ratio_data(Eigen::Index n_per_class, int classes, int bases, int informative,
                                          std::uint64_t seed) {
  if (classes < 2 || bases < 2 || informative < 1 || informative > bases) {
    throw std::invalid_argument("invalid ratio data shape");
  }
  auto rng = detail::stream(seed, 6);
  std::normal_distribution<double> g(0.0, 0.25);
  const auto n = n_per_class * classes;
  Matrix v(n, bases);
  std::vector<ClassIndex> y;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = static_cast<int>(i / n_per_class);
    y.push_back(c);
    for (int b = 0; b < bases; ++b) {
      double shift = 0.0;
      if (b < informative) shift = (b % classes == c) ? 1.0 : 0.0;
      v(i, b) = std::exp(shift + g(rng));
    }
  }
  std::vector<std::string> names;
  for (int b = 0; b < bases; ++b) names.push_back("m" + std::to_string(b + 1));
  std::vector<std::string> cls;
  for (int c = 0; c < classes; ++c) cls.push_back(std::to_string(c + 1));
  return pairwise_ratio_expand(
      LabeledDataset(std::move(v), Mask::Constant(n, bases, true), std::move(y), std::move(names), std::move(cls)));
}

}  // namespace geolvq
