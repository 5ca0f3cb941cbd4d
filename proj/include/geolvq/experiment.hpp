#pragma once

// Cross-validation harness: folds x restarts of training, per-model reports,
// majority-vote ensemble, geodesic average model, and a summary table.
//
// With a synthetic configuration the folds only decide the training data;
// every model is scored on the independent hold-out set, as in the
// synthetic benchmark protocol.

#include "geolvq/averaging.hpp"
#include "geolvq/csv.hpp"
#include "geolvq/imbalance.hpp"
#include "geolvq/serialize.hpp"
#include "geolvq/synth.hpp"

#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <thread>

namespace geolvq {

enum class Imbalance { None, Smote, GeodesicSmote, CostWeights };

inline const char* to_string(Imbalance i) {
  switch (i) {
    case Imbalance::None: return "none";
    case Imbalance::Smote: return "smote";
    case Imbalance::GeodesicSmote: return "geodesic-smote";
    case Imbalance::CostWeights: return "cost-weights";
  }
  return "unknown";
}

inline Imbalance imbalance_from_string(const std::string& s) {
  if (s == "none") return Imbalance::None;
  if (s == "smote") return Imbalance::Smote;
  if (s == "geodesic-smote") return Imbalance::GeodesicSmote;
  if (s == "cost-weights") return Imbalance::CostWeights;
  throw std::invalid_argument("unknown imbalance strategy '" + s + "'");
}

struct ExperimentConfig {
  std::string dataset_path;           // CSV input, or
  std::optional<SynthConfig> synth;   // generated benchmark
  CsvOptions csv;
  TrainConfig train;                  // variant, rank, steepness, optimizer settings
  Imbalance imbalance = Imbalance::None;
  std::string cost_weights_path;      // C x C CSV; empty means uniform weights
  int smote_k = 5;
  int folds = 10;                     // 1 is allowed for synthetic data: train on everything
  int restarts = 1;
  bool bootstrap = false;             // stratified bootstrap bag per restart
  std::optional<bool> standardize;    // default: on for files, off for synthetic data
  std::string healthy_class;          // enables sensitivity / specificity
  int average_clusters = 1;           // Ward cut used for the reported average model
  int max_clusters = 5;               // elbow diagnostics
  std::uint64_t seed = 1;
  int jobs = 1;
  std::string output_dir;             // empty: nothing is written

  void validate() const {
    if (dataset_path.empty() == !synth.has_value()) {
      throw std::invalid_argument("give exactly one of a dataset path or a synthetic configuration");
    }
    if (synth) synth->validate();
    if (folds < 1 || (folds == 1 && !synth)) {
      throw std::invalid_argument("need at least two folds (one is allowed only with a hold-out set)");
    }
    if (restarts < 1) throw std::invalid_argument("need at least one restart");
    if (jobs < 1) throw std::invalid_argument("jobs must be at least 1");
    if (smote_k < 1) throw std::invalid_argument("smote k must be at least 1");
    if (average_clusters < 1 || average_clusters > restarts) {
      throw std::invalid_argument("average clusters must lie in 1..restarts");
    }
    if (max_clusters < 1) throw std::invalid_argument("max clusters must be at least 1");
  }
};

struct RestartResult {
  Model model;
  EvaluationReport test;
  int epochs_run = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

struct FoldResult {
  std::vector<RestartResult> restarts;
  EvaluationReport majority;
  std::optional<EvaluationReport> average;
  std::optional<AverageResult> average_detail;
  std::vector<ElbowPoint> elbow;
  std::string average_error;
  std::optional<StandardizationParams> standardization;
};

struct SummaryRow {
  std::string method;
  int n = 0;                          // folds contributing
  std::optional<double> sens_mean, sens_std;
  double macro_mean = 0, macro_std = 0;
  double error_mean = 0, error_std = 0;
  std::vector<double> class_mean, class_std;
};

struct ExperimentResult {
  std::vector<std::string> class_names;
  std::vector<std::string> feature_names;
  std::vector<FoldResult> folds;
  std::vector<SummaryRow> summary;
};

namespace detail {

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint32_t a, std::uint32_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), a, b};
  std::array<std::uint32_t, 2> w{};
  seq.generate(w.begin(), w.end());
  return (static_cast<std::uint64_t>(w[0]) << 32) | w[1];
}

inline LabeledDataset stratified_bootstrap(const LabeledDataset& data, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Eigen::Index> pick;
  for (int c = 0; c < data.num_classes(); ++c) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      if (data.label(i) == c) idx.push_back(i);
    }
    if (idx.empty()) continue;
    std::uniform_int_distribution<size_t> u(0, idx.size() - 1);
    for (size_t k = 0; k < idx.size(); ++k) pick.push_back(idx[u(rng)]);
  }
  return data.subset(pick);
}

inline CostWeightMatrix read_cost_weights(const std::string& path, int classes) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open cost weights '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (csv_detail::trim(line).empty()) continue;
    std::vector<double> row;
    for (const auto& cell : csv_detail::split_line(line)) {
      double v = 0.0;
      if (!csv_detail::parse_double(csv_detail::trim(cell), v)) {
        throw std::invalid_argument("cost weights: non-numeric cell '" + cell + "'");
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (static_cast<int>(rows.size()) != classes) {
    throw std::invalid_argument("cost weights need " + std::to_string(classes) + " rows");
  }
  Matrix g(classes, classes);
  for (int i = 0; i < classes; ++i) {
    if (static_cast<int>(rows[static_cast<size_t>(i)].size()) != classes) {
      throw std::invalid_argument("cost weights need " + std::to_string(classes) + " columns");
    }
    for (int j = 0; j < classes; ++j) g(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
  }
  return CostWeightMatrix::normalized(g);
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Sample standard deviation; 0 for a single value.
inline double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline SummaryRow summarize(const std::string& method, const std::vector<const EvaluationReport*>& reports,
                            int classes) {
  SummaryRow row;
  row.method = method;
  row.n = static_cast<int>(reports.size());
  if (reports.empty()) return row;
  std::vector<double> macro, err, sens;
  for (const auto* r : reports) {
    macro.push_back(r->macro_avg);
    err.push_back(r->error());
    if (r->sensitivity) sens.push_back(*r->sensitivity);
  }
  row.macro_mean = mean_of(macro);
  row.macro_std = std_of(macro);
  row.error_mean = mean_of(err);
  row.error_std = std_of(err);
  if (sens.size() == reports.size()) {
    row.sens_mean = mean_of(sens);
    row.sens_std = std_of(sens);
  }
  for (int c = 0; c < classes; ++c) {
    std::vector<double> acc;
    for (const auto* r : reports) {
      if (std::isfinite(r->class_accuracy(c))) acc.push_back(r->class_accuracy(c));
    }
    row.class_mean.push_back(acc.empty() ? std::numeric_limits<double>::quiet_NaN() : mean_of(acc));
    row.class_std.push_back(acc.empty() ? std::numeric_limits<double>::quiet_NaN() : std_of(acc));
  }
  return row;
}

// Mean over restarts of one fold, as a report carrying only the averaged scalars.
inline EvaluationReport mean_report(const std::vector<RestartResult>& rs) {
  EvaluationReport m = rs.front().test;
  m.warnings.clear();
  m.confusion.setZero();
  const double n = static_cast<double>(rs.size());
  m.accuracy = 0.0;
  m.macro_avg = 0.0;
  m.class_accuracy.setZero();
  std::optional<double> sens, spec;
  for (const auto& r : rs) {
    m.confusion += r.test.confusion;
    m.accuracy += r.test.accuracy / n;
    m.macro_avg += r.test.macro_avg / n;
    m.class_accuracy += r.test.class_accuracy / n;
    if (r.test.sensitivity) sens = sens.value_or(0.0) + *r.test.sensitivity / n;
    if (r.test.specificity) spec = spec.value_or(0.0) + *r.test.specificity / n;
  }
  m.sensitivity = sens;
  m.specificity = spec;
  return m;
}

inline std::string fmt(double x) {
  if (!std::isfinite(x)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  out << s;
}

}  // namespace detail

inline std::string summary_csv(const ExperimentResult& res) {
  std::ostringstream out;
  out << "method,folds,sensitivity_mean,sensitivity_std,macro_avg_mean,macro_avg_std,error_mean,error_std";
  for (const auto& c : res.class_names) out << ',' << csv_detail::quote("acc_" + c + "_mean") << ',' << csv_detail::quote("acc_" + c + "_std");
  out << '\n';
  for (const auto& r : res.summary) {
    out << r.method << ',' << r.n << ',' << (r.sens_mean ? detail::fmt(*r.sens_mean) : "") << ','
        << (r.sens_std ? detail::fmt(*r.sens_std) : "") << ',' << detail::fmt(r.macro_mean) << ','
        << detail::fmt(r.macro_std) << ',' << detail::fmt(r.error_mean) << ',' << detail::fmt(r.error_std);
    for (size_t c = 0; c < r.class_mean.size(); ++c) {
      out << ',' << detail::fmt(r.class_mean[c]) << ',' << detail::fmt(r.class_std[c]);
    }
    out << '\n';
  }
  return out.str();
}

inline nlohmann::json fold_report_json(const FoldResult& f, const std::vector<std::string>& class_names) {
  nlohmann::json j;
  j["individual"] = nlohmann::json::array();
  for (size_t r = 0; r < f.restarts.size(); ++r) {
    auto rj = report_to_json(f.restarts[r].test, class_names);
    rj["restart"] = r + 1;
    rj["epochs_run"] = f.restarts[r].epochs_run;
    rj["converged"] = f.restarts[r].converged;
    rj["training_warnings"] = f.restarts[r].warnings;
    j["individual"].push_back(std::move(rj));
  }
  j["individual_mean"] = report_to_json(detail::mean_report(f.restarts), class_names);
  j["majority_vote"] = report_to_json(f.majority, class_names);
  if (f.average) {
    auto a = report_to_json(*f.average, class_names);
    const auto& d = *f.average_detail;
    a["rank"] = d.rank;
    a["averaging_warnings"] = d.warnings;
    a["clusters"] = nlohmann::json::array();
    for (const auto& cl : d.clusters) {
      nlohmann::json cj;
      auto members = cl.members;
      for (auto& m : members) ++m;
      cj["restarts"] = members;
      cj["train_macro_avg"] = cl.train_macro ? nlohmann::json(*cl.train_macro) : nlohmann::json();
      cj["warnings"] = cl.warnings;
      a["clusters"].push_back(std::move(cj));
    }
    a["distances"] = detail::matrix_to_json(d.distances);
    auto heights = nlohmann::json::array();
    for (double h : d.tree.heights()) heights.push_back(h);
    a["merge_heights"] = heights;
    auto elbow = nlohmann::json::array();
    for (const auto& p : f.elbow) elbow.push_back({{"clusters", p.clusters}, {"train_macro_avg", p.train_macro}, {"sizes", p.sizes}});
    a["elbow"] = elbow;
    j["geodesic_average"] = std::move(a);
  } else {
    j["geodesic_average"] = {{"error", f.average_error}};
  }
  return j;
}

/// Runs the whole protocol. Jobs (fold, restart) are independent and run on
/// up to `jobs` threads; everything after training is sequential in
/// (fold, restart) order, so the output does not depend on `jobs`.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  LabeledDataset data;
  std::optional<LabeledDataset> holdout;
  if (cfg.synth) {
    auto bench = make_benchmark(*cfg.synth);
    data = std::move(bench.train);
    holdout = std::move(bench.test);
  } else {
    data = load_csv(cfg.dataset_path, cfg.csv);
  }
  const int C = data.num_classes();
  std::optional<ClassIndex> healthy;
  if (!cfg.healthy_class.empty()) {
    const auto& names = data.class_names();
    const auto it = std::find(names.begin(), names.end(), cfg.healthy_class);
    if (it == names.end()) throw std::invalid_argument("unknown healthy class '" + cfg.healthy_class + "'");
    healthy = static_cast<ClassIndex>(it - names.begin());
  }
  std::optional<CostWeightMatrix> gamma;
  if (cfg.imbalance == Imbalance::CostWeights) {
    gamma = cfg.cost_weights_path.empty() ? CostWeightMatrix::uniform(C)
                                          : detail::read_cost_weights(cfg.cost_weights_path, C);
  }
  const bool standardize = cfg.standardize.value_or(!cfg.synth.has_value());

  // Per fold: training data (standardized), test data.
  struct FoldData {
    LabeledDataset train, test;
    std::optional<StandardizationParams> params;
  };
  std::vector<FoldData> fd;
  std::optional<FoldAssignment> assignment;
  if (cfg.folds > 1) assignment = stratified_kfold(data, cfg.folds, cfg.seed);
  for (int f = 0; f < cfg.folds; ++f) {
    FoldData d;
    d.train = assignment ? data.subset(assignment->complement(f)) : data;
    d.test = holdout ? *holdout : data.subset(assignment->members(f));
    if (standardize) {
      d.params = standardize_fit(d.train);
      d.train = standardize_apply(d.train, *d.params);
      d.test = standardize_apply(d.test, *d.params);
    }
    fd.push_back(std::move(d));
  }

  ExperimentResult res;
  res.class_names = data.class_names();
  res.feature_names = data.feature_names();
  res.folds.resize(static_cast<size_t>(cfg.folds));
  for (auto& f : res.folds) f.restarts.resize(static_cast<size_t>(cfg.restarts));

  const int total = cfg.folds * cfg.restarts;
  std::vector<std::exception_ptr> errors(static_cast<size_t>(total));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int job = next++; job < total; job = next++) {
      const int f = job / cfg.restarts;
      const int r = job % cfg.restarts;
      try {
        const std::uint64_t js = detail::derive_seed(cfg.seed, static_cast<std::uint32_t>(f), static_cast<std::uint32_t>(r));
        LabeledDataset train = fd[static_cast<size_t>(f)].train;
        if (cfg.bootstrap) train = detail::stratified_bootstrap(train, js ^ 0xb5ad4eceda1ce2a9ULL);
        if (cfg.imbalance == Imbalance::Smote || cfg.imbalance == Imbalance::GeodesicSmote) {
          train = balance_training_set(
              train, cfg.imbalance == Imbalance::Smote ? SmoteMethod::Euclidean : SmoteMethod::Geodesic,
              cfg.smote_k, js ^ 0x2545f4914f6cdd1dULL);
        }
        TrainConfig tc = cfg.train;
        tc.seed = js;
        tc.cost_weights = gamma;
        auto tr = train_model(train, tc);
        auto& out = res.folds[static_cast<size_t>(f)].restarts[static_cast<size_t>(r)];
        out.test = evaluate(tr.model, fd[static_cast<size_t>(f)].test, healthy);
        out.model = std::move(tr.model);
        out.epochs_run = tr.epochs_run;
        out.converged = tr.converged;
        out.warnings = std::move(tr.warnings);
      } catch (...) {
        errors[static_cast<size_t>(job)] = std::current_exception();
      }
    }
  };
  const int nthreads = std::min(cfg.jobs, total);
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (int job = 0; job < total; ++job) {
    if (!errors[static_cast<size_t>(job)]) continue;
    const std::string where =
        "fold " + std::to_string(job / cfg.restarts + 1) + ", restart " + std::to_string(job % cfg.restarts + 1);
    try {
      std::rethrow_exception(errors[static_cast<size_t>(job)]);
    } catch (const std::exception& e) {
      throw std::runtime_error(where + ": " + e.what());
    }
  }

  for (int f = 0; f < cfg.folds; ++f) {
    auto& fr = res.folds[static_cast<size_t>(f)];
    const auto& d = fd[static_cast<size_t>(f)];
    fr.standardization = d.params;
    std::vector<Model> models;
    for (const auto& r : fr.restarts) models.push_back(r.model);
    fr.majority = evaluate_predictions(d.test.labels(), majority_vote(models, d.test), C, healthy);
    try {
      auto avg = average_models(models, cfg.average_clusters, &d.train);
      fr.average = evaluate(avg.best().model, d.test, healthy);
      fr.elbow = cluster_diagnostics(models, std::min(cfg.max_clusters, cfg.restarts), d.train);
      fr.average_detail = std::move(avg);
    } catch (const std::exception& e) {
      fr.average_error = std::string("fold ") + std::to_string(f + 1) + ": " + e.what();
    }
  }

  std::vector<const EvaluationReport*> fold_mean_ptrs, maj, avg;
  std::vector<EvaluationReport> fold_means;
  fold_means.reserve(res.folds.size());
  for (const auto& fr : res.folds) {
    fold_means.push_back(detail::mean_report(fr.restarts));
    maj.push_back(&fr.majority);
    if (fr.average) avg.push_back(&*fr.average);
  }
  for (const auto& m : fold_means) fold_mean_ptrs.push_back(&m);
  res.summary.push_back(detail::summarize("individual", fold_mean_ptrs, C));
  res.summary.push_back(detail::summarize("majority-vote", maj, C));
  res.summary.push_back(detail::summarize("geodesic-average", avg, C));

  if (!cfg.output_dir.empty()) {
    namespace fs = std::filesystem;
    const fs::path root(cfg.output_dir);
    fs::create_directories(root);
    nlohmann::json top;
    top["classes"] = res.class_names;
    top["folds"] = cfg.folds;
    top["restarts"] = cfg.restarts;
    top["variant"] = to_string(cfg.train.variant);
    top["seed"] = cfg.seed;
    top["fold_reports"] = nlohmann::json::array();
    for (int f = 0; f < cfg.folds; ++f) {
      const auto& fr = res.folds[static_cast<size_t>(f)];
      const fs::path fdir = root / ("fold_" + std::to_string(f + 1));
      for (int r = 0; r < cfg.restarts; ++r) {
        const fs::path rdir = fdir / ("restart_" + std::to_string(r + 1));
        fs::create_directories(rdir);
        save_model((rdir / "model.json").string(),
                   {fr.restarts[static_cast<size_t>(r)].model, res.class_names, res.feature_names, fr.standardization});
      }
      if (fr.average_detail) {
        save_model((fdir / "average_model.json").string(),
                   {fr.average_detail->best().model, res.class_names, res.feature_names, fr.standardization});
      }
      const auto fj = fold_report_json(fr, res.class_names);
      detail::write_text(fdir / "report.json", fj.dump(1) + "\n");
      top["fold_reports"].push_back("fold_" + std::to_string(f + 1) + "/report.json");
    }
    auto sj = nlohmann::json::array();
    for (const auto& row : res.summary) {
      sj.push_back({{"method", row.method},
                    {"folds", row.n},
                    {"macro_avg_mean", row.macro_mean},
                    {"error_mean", row.error_mean},
                    {"error_std", row.error_std}});
    }
    top["summary"] = sj;
    detail::write_text(root / "report.json", top.dump(1) + "\n");
    detail::write_text(root / "summary.csv", summary_csv(res));
  }
  return res;
}

}  // namespace geolvq
