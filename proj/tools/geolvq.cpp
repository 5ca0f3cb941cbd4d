// geolvq command-line tool: data generation, training, evaluation, model
// averaging and clustering, analysis exports, sphere projections, and the
// cross-validation experiment harness.
//
// Every subcommand accepts --config FILE.json; its keys are long option
// names without the dashes and take precedence over the command line.

#include "geolvq/geolvq.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

namespace fs = std::filesystem;
using namespace geolvq;
using nlohmann::json;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  int jobs = 1;
  std::string missing_token;
  std::string label_column = "label";
  std::string config;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required");
}

CsvOptions csv_options(const Globals& g) { return {g.missing_token, g.label_column}; }

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  out << text;
}

void emit(const json& j, const std::string& path) {
  if (path.empty()) {
    std::cout << j.dump(1) << '\n';
  } else {
    write_file(path, j.dump(1) + "\n");
  }
}

std::string num(double x) {
  if (!std::isfinite(x)) return "";
  std::ostringstream s;
  s << std::setprecision(17) << x;
  return s.str();
}

std::string csv_row(const std::vector<std::string>& cells) {
  std::string out;
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += csv_detail::quote(cells[i]);
  }
  return out + '\n';
}

// Applies a JSON config object to the parsed options of `sub` (then the
// top-level app). Values replace whatever the command line gave.
void apply_config(CLI::App& app, CLI::App* sub, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config '" + path + "'");
  json cfg;
  try {
    in >> cfg;
  } catch (const json::parse_error& e) {
    throw UsageError("config '" + path + "' is not valid JSON: " + e.what());
  }
  if (!cfg.is_object()) throw UsageError("config must be a JSON object");
  for (const auto& [key, value] : cfg.items()) {
    CLI::Option* opt = sub ? sub->get_option_no_throw("--" + key) : nullptr;
    if (!opt) opt = app.get_option_no_throw("--" + key);
    if (!opt || key == "config") throw UsageError("unknown config key '" + key + "'");
    auto text = [](const json& v) -> std::string {
      if (v.is_string()) return v.get<std::string>();
      if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
      if (v.is_number()) return v.dump();
      throw UsageError("config values must be strings, numbers, booleans or arrays of those");
    };
    opt->clear();
    if (value.is_array()) {
      std::vector<std::string> items;
      for (const auto& v : value) items.push_back(text(v));
      opt->add_result(items);
    } else {
      opt->add_result(text(value));
    }
    opt->run_callback();
  }
}

ModelFile load_checked(const std::string& path) {
  try {
    return load_model(path);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

// ---- gen -------------------------------------------------------------------

struct GenArgs {
  std::string kind = "arcs";
  Eigen::Index n_per_class = 300;
  Eigen::Index n_test = 30072;
  double missing_fraction = 0.0;
  std::string missing_type = "mcar";
  double train_fraction = 1.0;
  int classes = 3, bases = 10, informative = 3;
  std::string out, test_out, layout_out;
};

void write_layout(const fs::path& p, const MnarLayout& lay, const std::vector<std::string>& features) {
  std::string s = csv_row({"sample", "study", "phase", "missing_block"});
  for (size_t i = 0; i < lay.study.size(); ++i) {
    const int st = lay.study[i];
    std::string block;
    if (st < 2) {
      const auto& b = lay.phase[i] == 0 ? lay.block[static_cast<size_t>(st)] : lay.late_block[static_cast<size_t>(st)];
      for (size_t k = 0; k < b.size(); ++k) block += (k ? ";" : "") + features[static_cast<size_t>(b[k])];
    }
    s += csv_row({std::to_string(i + 1), std::to_string(st + 1), lay.phase[i] == 0 ? "early" : "late", block});
  }
  write_file(p, s);
}

double missing_rate(const LabeledDataset& d) {
  return 1.0 - static_cast<double>(d.mask().count()) / static_cast<double>(d.mask().size());
}

void run_gen(const GenArgs& a, const Globals& g) {
  require(a.out, "--out");
  json out;
  if (a.kind == "ratio") {
    const auto d = generate_ratio_data(a.n_per_class, a.classes, a.bases, a.informative, g.seed);
    save_csv(a.out, d, csv_options(g));
    out = {{"train", a.out}, {"samples", d.size()}, {"features", d.dim()}};
  } else if (a.kind == "arcs") {
    SynthConfig cfg;
    cfg.n_per_class = a.n_per_class;
    cfg.n_test = a.n_test;
    cfg.missing_fraction = a.missing_fraction;
    cfg.missing_type = missing_type_from_string(a.missing_type);
    cfg.train_fraction = a.train_fraction;
    cfg.seed = g.seed;
    const auto b = make_benchmark(cfg);
    save_csv(a.out, b.train, csv_options(g));
    out = {{"train", a.out}, {"samples", b.train.size()}, {"features", b.train.dim()},
           {"missing_rate", missing_rate(b.train)}};
    if (!a.test_out.empty()) {
      save_csv(a.test_out, b.test, csv_options(g));
      out["test"] = a.test_out;
      out["test_samples"] = b.test.size();
    }
    if (!a.layout_out.empty()) {
      if (!b.train_layout) throw UsageError("--layout-out needs --missing-type mnar and a nonzero fraction");
      write_layout(a.layout_out, *b.train_layout, b.train.feature_names());
      out["layout"] = a.layout_out;
    }
  } else {
    throw UsageError("--kind must be arcs or ratio");
  }
  std::cout << out.dump(1) << '\n';
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string data, out;
  std::string variant = "angle-global";
  Eigen::Index rank = 0;
  double steepness = 1.0;
  int epochs = 300;
  double rate_w = 0.05, rate_omega = 0.05;
  double label_smoothing = 0.01;
  std::string imbalance = "none";
  std::string cost_weights;
  int smote_k = 5;
  std::string standardize = "on";
};

void run_train(const TrainArgs& a, const Globals& g) {
  require(a.data, "--data");
  require(a.out, "--out");
  auto data = load_csv(a.data, csv_options(g));
  std::optional<StandardizationParams> params;
  if (a.standardize == "on") {
    params = standardize_fit(data);
    data = standardize_apply(data, *params);
  }
  TrainConfig cfg;
  cfg.variant = variant_from_string(a.variant);
  cfg.rank = a.rank;
  cfg.steepness = a.steepness;
  cfg.epochs = a.epochs;
  cfg.learn_rate_w = a.rate_w;
  cfg.learn_rate_omega = a.rate_omega;
  cfg.label_smoothing = a.label_smoothing;
  cfg.seed = g.seed;
  const auto strategy = imbalance_from_string(a.imbalance);
  LabeledDataset train = data;
  if (strategy == Imbalance::Smote || strategy == Imbalance::GeodesicSmote) {
    train = balance_training_set(data, strategy == Imbalance::Smote ? SmoteMethod::Euclidean : SmoteMethod::Geodesic,
                                 a.smote_k, g.seed);
  } else if (strategy == Imbalance::CostWeights) {
    cfg.cost_weights = a.cost_weights.empty() ? CostWeightMatrix::uniform(data.num_classes())
                                              : detail::read_cost_weights(a.cost_weights, data.num_classes());
  }
  const auto res = train_model(train, cfg);
  save_model(a.out, {res.model, data.class_names(), data.feature_names(), params});
  json out;
  out["model"] = a.out;
  out["epochs_run"] = res.epochs_run;
  out["converged"] = res.converged;
  out["initial_cost"] = res.cost_trace.front();
  out["final_cost"] = res.cost_trace.back();
  out["warnings"] = res.warnings;
  out["training_report"] = report_to_json(evaluate(res.model, data), data.class_names());
  std::cout << out.dump(1) << '\n';
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string model, data, healthy, out, predictions;
};

std::optional<ClassIndex> class_index(const std::vector<std::string>& names, const std::string& name) {
  if (name.empty()) return std::nullopt;
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw std::invalid_argument("unknown class '" + name + "'");
  return static_cast<ClassIndex>(it - names.begin());
}

void run_eval(const EvalArgs& a, const Globals& g) {
  require(a.model, "--model");
  require(a.data, "--data");
  const auto mf = load_checked(a.model);
  const auto data = prepare_for_model(mf, load_csv(a.data, csv_options(g)));
  const auto pred = predict(mf.model, data);
  const auto report = evaluate_predictions(data.labels(), pred, data.num_classes(), class_index(data.class_names(), a.healthy));
  if (!a.predictions.empty()) {
    std::string s = csv_row({"sample", "true", "predicted"});
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      s += csv_row({std::to_string(i + 1), data.class_names()[static_cast<size_t>(data.label(i))],
                    data.class_names()[static_cast<size_t>(pred[static_cast<size_t>(i)])]});
    }
    write_file(a.predictions, s);
  }
  emit(report_to_json(report, data.class_names()), a.out);
}

// ---- average / cluster -----------------------------------------------------

struct EnsembleArgs {
  std::vector<std::string> models;
  std::string train_data, out, report;
  int clusters = 1;
  int max_clusters = 5;
};

struct Ensemble {
  std::vector<Model> models;
  ModelFile like;  // names and standardization shared by all members
};

Ensemble load_ensemble(const std::vector<std::string>& paths) {
  if (paths.empty()) throw UsageError("--models is required");
  Ensemble e;
  for (size_t i = 0; i < paths.size(); ++i) {
    auto mf = load_checked(paths[i]);
    if (i == 0) {
      e.like = mf;
    } else {
      const auto& s0 = e.like.standardization;
      const auto& s1 = mf.standardization;
      const bool same_std = s0.has_value() == s1.has_value() &&
                            (!s0 || (s0->means == s1->means && s0->stds == s1->stds));
      if (!same_std || mf.class_names != e.like.class_names || mf.feature_names != e.like.feature_names) {
        throw std::invalid_argument(paths[i] + ": names or standardization differ from " + paths[0]);
      }
    }
    e.models.push_back(std::move(mf.model));
  }
  return e;
}

std::optional<LabeledDataset> load_train(const std::string& path, const ModelFile& like, const Globals& g) {
  if (path.empty()) return std::nullopt;
  return prepare_for_model(like, load_csv(path, csv_options(g)));
}

json members_json(const std::vector<int>& members, const std::vector<std::string>& paths) {
  auto a = json::array();
  for (int m : members) a.push_back(paths[static_cast<size_t>(m)]);
  return a;
}

void run_average(const EnsembleArgs& a, const Globals& g) {
  require(a.out, "--out");
  const auto e = load_ensemble(a.models);
  const auto train = load_train(a.train_data, e.like, g);
  const auto res = average_models(e.models, a.clusters, train ? &*train : nullptr);
  const auto& best = res.best();
  ModelFile out = e.like;
  out.model = best.model;
  save_model(a.out, out);
  json j;
  j["model"] = a.out;
  j["rank"] = res.rank;
  j["warnings"] = res.warnings;
  j["clusters"] = json::array();
  for (const auto& cl : res.clusters) {
    json c;
    c["members"] = members_json(cl.members, a.models);
    c["train_macro_avg"] = cl.train_macro ? json(*cl.train_macro) : json();
    c["warnings"] = cl.warnings;
    c["selected"] = &cl == &best;
    j["clusters"].push_back(std::move(c));
  }
  emit(j, a.report);
}

void run_cluster(const EnsembleArgs& a, const Globals& g) {
  const auto e = load_ensemble(a.models);
  const auto train = load_train(a.train_data, e.like, g);
  if (e.models.size() < 2) throw UsageError("clustering needs at least two models");
  detail::check_compatible(e.models);
  const auto rank = detail::common_rank(e.models);
  const auto d = model_distances(e.models, rank);
  const auto tree = ward_linkage(d, WardVariant::Raw);
  json j;
  j["models"] = a.models;
  j["rank"] = rank;
  j["distances"] = detail::matrix_to_json(d);
  j["merges"] = json::array();
  for (const auto& m : tree.merges()) {
    j["merges"].push_back({{"left", m.left}, {"right", m.right}, {"height", m.height}, {"size", m.size}});
  }
  j["leaf_order"] = tree.leaf_order();
  const int kmax = std::min<int>(a.max_clusters, static_cast<int>(e.models.size()));
  j["cuts"] = json::object();
  for (int n = 1; n <= kmax; ++n) j["cuts"][std::to_string(n)] = tree.cut(n);
  if (train) {
    auto elbow = json::array();
    for (const auto& p : cluster_diagnostics(e.models, kmax, *train)) {
      elbow.push_back({{"clusters", p.clusters}, {"train_macro_avg", p.train_macro}, {"sizes", p.sizes}});
    }
    j["elbow"] = elbow;
  }
  emit(j, a.out);
}

// ---- analyze ---------------------------------------------------------------

struct AnalyzeArgs {
  std::string model, data, out_dir;
  int top_ratios = 20;
};

void run_analyze(const AnalyzeArgs& a, const Globals& g) {
  require(a.model, "--model");
  require(a.out_dir, "--out-dir");
  const auto mf = load_checked(a.model);
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  const auto& m = mf.model;
  std::vector<std::string> features = mf.feature_names;
  if (features.empty()) {
    for (Eigen::Index j = 0; j < m.dim(); ++j) features.push_back("f" + std::to_string(j + 1));
  }
  std::vector<std::string> classes = mf.class_names;
  if (classes.empty()) {
    for (int c = 0; c < m.num_classes(); ++c) classes.push_back(std::to_string(c + 1));
  }
  json summary;
  summary["files"] = json::array();

  const Matrix rel = feature_relevance(m);
  std::vector<std::string> head{"metric"};
  head.insert(head.end(), features.begin(), features.end());
  std::string s = csv_row(head);
  for (Eigen::Index k = 0; k < rel.rows(); ++k) {
    std::vector<std::string> row{m.is_local() ? classes[static_cast<size_t>(k)] : "global"};
    for (Eigen::Index j = 0; j < rel.cols(); ++j) row.push_back(num(rel(k, j)));
    s += csv_row(row);
  }
  write_file(dir / "relevance.csv", s);
  summary["files"].push_back("relevance.csv");

  if (!a.data.empty()) {
    if (!is_angle_variant(m.variant)) throw UsageError("term analysis needs an angle-based model");
    const auto data = prepare_for_model(mf, load_csv(a.data, csv_options(g)));
    const auto agg = class_term_aggregate(m, data);
    const auto ranking = term_feature_ranking(agg);
    std::string rank_csv = csv_row({"class", "rank", "feature", "term_row_sum"});
    for (int c = 0; c < m.num_classes(); ++c) {
      const auto& t = agg.mean_terms[static_cast<size_t>(c)];
      const auto& ro = agg.row_order[static_cast<size_t>(c)];
      const auto& co = agg.col_order[static_cast<size_t>(c)];
      std::vector<std::string> h{"feature"};
      for (int j : co) h.push_back(features[static_cast<size_t>(j)]);
      std::string ts = csv_row(h);
      for (int i : ro) {
        std::vector<std::string> row{features[static_cast<size_t>(i)]};
        for (int j : co) row.push_back(num(t(i, j)));
        ts += csv_row(row);
      }
      const std::string name = "terms_" + std::to_string(c + 1) + ".csv";
      write_file(dir / name, ts);
      summary["files"].push_back(name);
      const Vector rs = t.rowwise().sum();
      const auto& order = ranking[static_cast<size_t>(c)];
      for (size_t r = 0; r < order.size(); ++r) {
        rank_csv += csv_row({classes[static_cast<size_t>(c)], std::to_string(r + 1),
                             features[static_cast<size_t>(order[r])], num(rs(order[r]))});
      }
    }
    write_file(dir / "term_ranking.csv", rank_csv);
    summary["files"].push_back("term_ranking.csv");

    const auto curves = reduced_model_curve(m, data, ranking);
    std::string cs = csv_row({"class", "top_x", "sensitivity", "specificity", "balanced_accuracy"});
    json f98 = json::object();
    for (const auto& cv : curves) {
      for (const auto& p : cv.points) {
        cs += csv_row({classes[static_cast<size_t>(cv.class_label)], std::to_string(p.top_x), num(p.sensitivity),
                       num(p.specificity), num(p.balanced_accuracy)});
      }
      f98[classes[static_cast<size_t>(cv.class_label)]] = cv.features_for_98;
    }
    write_file(dir / "reduced_curve.csv", cs);
    summary["files"].push_back("reduced_curve.csv");
    summary["features_for_98pct_ba"] = f98;

    const bool ratios = std::all_of(features.begin(), features.end(),
                                    [](const std::string& f) { return f.find('/') != std::string::npos; });
    if (ratios) {
      std::string os = csv_row({"class", "base", "numerator", "denominator"});
      for (int c = 0; c < m.num_classes(); ++c) {
        for (const auto& o : ratio_occurrence(features, ranking[static_cast<size_t>(c)], static_cast<size_t>(a.top_ratios))) {
          os += csv_row({classes[static_cast<size_t>(c)], o.name, std::to_string(o.numerator), std::to_string(o.denominator)});
        }
      }
      write_file(dir / "ratio_occurrence.csv", os);
      summary["files"].push_back("ratio_occurrence.csv");
    }
  }
  std::cout << summary.dump(1) << '\n';
}

// ---- project ---------------------------------------------------------------

struct ProjectArgs {
  std::string model, data, out_dir;
  Eigen::Index points = 10000;
  std::vector<double> theta;
};

void run_project(const ProjectArgs& a, const Globals& g) {
  require(a.model, "--model");
  require(a.out_dir, "--out-dir");
  const auto mf = load_checked(a.model);
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  const auto& m = mf.model;
  std::vector<std::string> classes = mf.class_names;
  if (classes.empty()) {
    for (int c = 0; c < m.num_classes(); ++c) classes.push_back(std::to_string(c + 1));
  }
  json summary;
  const auto surf = decision_surface_sample(m, a.points);
  std::vector<std::string> head{"x", "y", "z", "map_x", "map_y", "label"};
  if (surf.posterior.size()) {
    for (const auto& c : classes) head.push_back("p_" + c);
  }
  std::string s = csv_row(head);
  for (Eigen::Index i = 0; i < surf.points.rows(); ++i) {
    std::vector<std::string> row{num(surf.points(i, 0)), num(surf.points(i, 1)), num(surf.points(i, 2)),
                                 num(surf.coords[static_cast<size_t>(i)].x), num(surf.coords[static_cast<size_t>(i)].y),
                                 classes[static_cast<size_t>(surf.label[static_cast<size_t>(i)])]};
    for (Eigen::Index c = 0; c < surf.posterior.cols(); ++c) row.push_back(num(surf.posterior(i, c)));
    s += csv_row(row);
  }
  write_file(dir / "surface.csv", s);
  if (surf.posterior.size()) summary["uncertain_fraction"] = uncertain_fraction(surf);

  const Matrix protos = detail::projected_prototypes(m);
  std::string ps = csv_row({"class", "x", "y", "z", "map_x", "map_y"});
  for (Eigen::Index c = 0; c < protos.rows(); ++c) {
    const auto q = mollweide_project(protos.row(c).transpose());
    ps += csv_row({classes[static_cast<size_t>(c)], num(protos(c, 0)), num(protos(c, 1)), num(protos(c, 2)), num(q.x), num(q.y)});
  }
  write_file(dir / "prototypes.csv", ps);

  if (!a.data.empty()) {
    const auto data = prepare_for_model(mf, load_csv(a.data, csv_options(g)));
    const auto pd = project_samples(m, data);
    std::string ds = csv_row({"label", "x", "y", "z", "map_x", "map_y"});
    for (Eigen::Index i = 0; i < pd.points.rows(); ++i) {
      ds += csv_row({classes[static_cast<size_t>(data.label(i))], num(pd.points(i, 0)), num(pd.points(i, 1)),
                     num(pd.points(i, 2)), num(pd.coords[static_cast<size_t>(i)].x), num(pd.coords[static_cast<size_t>(i)].y)});
    }
    write_file(dir / "samples.csv", ds);
  }

  if (!a.theta.empty()) {
    if (m.variant != Variant::Probabilistic) throw UsageError("--theta needs a probabilistic model");
    std::string cs = csv_row({"theta", "uncertain_fraction"});
    auto arr = json::array();
    for (double t : a.theta) {
      Model mt = m;
      mt.steepness = t;
      mt.validate();
      const double u = uncertain_fraction(decision_surface_sample(mt, a.points));
      cs += csv_row({num(t), num(u)});
      arr.push_back({{"theta", t}, {"uncertain_fraction", u}});
    }
    write_file(dir / "crispness.csv", cs);
    summary["crispness"] = arr;
  }
  std::cout << summary.dump(1) << '\n';
}

// ---- experiment ------------------------------------------------------------

struct ExperimentArgs {
  std::string data, out_dir;
  bool synth = false;
  Eigen::Index n_per_class = 300;
  Eigen::Index n_test = 30072;
  double missing_fraction = 0.0;
  std::string missing_type = "mcar";
  double train_fraction = 1.0;
  TrainArgs train;
  int folds = 10;
  int restarts = 1;
  bool bootstrap = false;
  std::string standardize = "auto";
  std::string healthy;
  int average_clusters = 1;
  int max_clusters = 5;
};

void run_experiment_cmd(const ExperimentArgs& a, const Globals& g) {
  require(a.out_dir, "--out-dir");
  ExperimentConfig cfg;
  if (a.synth) {
    if (!a.data.empty()) throw UsageError("give either --data or --synth");
    SynthConfig s;
    s.n_per_class = a.n_per_class;
    s.n_test = a.n_test;
    s.missing_fraction = a.missing_fraction;
    s.missing_type = missing_type_from_string(a.missing_type);
    s.train_fraction = a.train_fraction;
    s.seed = g.seed;
    cfg.synth = s;
  } else {
    require(a.data, "--data (or --synth)");
    cfg.dataset_path = a.data;
  }
  cfg.csv = csv_options(g);
  cfg.train.variant = variant_from_string(a.train.variant);
  cfg.train.rank = a.train.rank;
  cfg.train.steepness = a.train.steepness;
  cfg.train.epochs = a.train.epochs;
  cfg.train.learn_rate_w = a.train.rate_w;
  cfg.train.learn_rate_omega = a.train.rate_omega;
  cfg.train.label_smoothing = a.train.label_smoothing;
  cfg.imbalance = imbalance_from_string(a.train.imbalance);
  cfg.cost_weights_path = a.train.cost_weights;
  cfg.smote_k = a.train.smote_k;
  cfg.folds = a.folds;
  cfg.restarts = a.restarts;
  cfg.bootstrap = a.bootstrap;
  if (a.standardize != "auto") cfg.standardize = a.standardize == "on";
  cfg.healthy_class = a.healthy;
  cfg.average_clusters = a.average_clusters;
  cfg.max_clusters = a.max_clusters;
  cfg.seed = g.seed;
  cfg.jobs = g.jobs;
  cfg.output_dir = a.out_dir;
  const auto res = run_experiment(cfg);
  json j;
  j["output_dir"] = a.out_dir;
  j["summary"] = json::array();
  for (const auto& r : res.summary) {
    j["summary"].push_back({{"method", r.method}, {"folds", r.n}, {"error_mean", r.error_mean},
                            {"error_std", r.error_std}, {"macro_avg_mean", r.macro_mean}});
  }
  std::cout << j.dump(1) << '\n';
}

void add_train_options(CLI::App* c, TrainArgs& t) {
  c->add_option("--variant", t.variant, "angle-global, angle-local, probabilistic or euclidean-partial")
      ->capture_default_str();
  c->add_option("--rank", t.rank, "rows of the projection matrix (0 = full)")->capture_default_str();
  c->add_option("--steepness", t.steepness, "beta, or Theta for the probabilistic variant")->capture_default_str();
  c->add_option("--epochs", t.epochs)->capture_default_str();
  c->add_option("--learn-rate-w", t.rate_w)->capture_default_str();
  c->add_option("--learn-rate-omega", t.rate_omega)->capture_default_str();
  c->add_option("--label-smoothing", t.label_smoothing)->capture_default_str();
  c->add_option("--imbalance", t.imbalance)
      ->check(CLI::IsMember({"none", "smote", "geodesic-smote", "cost-weights"}))
      ->capture_default_str();
  c->add_option("--cost-weights", t.cost_weights, "C x C CSV of weights (default: uniform)");
  c->add_option("--smote-k", t.smote_k)->capture_default_str();
}

const char* error_type(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e)) return "usage";
  if (dynamic_cast<const FormatError*>(&e)) return "format";
  if (dynamic_cast<const std::domain_error*>(&e)) return "domain";
  if (dynamic_cast<const std::invalid_argument*>(&e)) return "invalid_argument";
  if (dynamic_cast<const std::runtime_error*>(&e)) return "runtime";
  return "error";
}

int fail(const std::string& command, const std::string& type, const std::string& message, int code) {
  json j;
  j["error"] = {{"command", command}, {"type", type}, {"message", message}};
  std::cerr << j.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geodesic prototype-based classification toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "random seed")->capture_default_str();
  app.add_option("--jobs", g.jobs, "parallel training jobs")->capture_default_str();
  app.add_option("--missing-token", g.missing_token, "CSV cell text meaning missing (empty cells always are)");
  app.add_option("--label-column", g.label_column, "CSV label column")->capture_default_str();
  app.add_option("--config", g.config, "JSON file of option values; overrides the command line");

  GenArgs gen;
  auto* c_gen = app.add_subcommand("gen", "generate the synthetic arcs benchmark or ratio data");
  c_gen->add_option("--kind", gen.kind, "arcs or ratio")->capture_default_str();
  c_gen->add_option("--n-per-class", gen.n_per_class)->capture_default_str();
  c_gen->add_option("--n-test", gen.n_test)->capture_default_str();
  c_gen->add_option("--missing-fraction", gen.missing_fraction)->capture_default_str();
  c_gen->add_option("--missing-type", gen.missing_type, "mcar or mnar")->capture_default_str();
  c_gen->add_option("--train-fraction", gen.train_fraction)->capture_default_str();
  c_gen->add_option("--classes", gen.classes, "ratio data only")->capture_default_str();
  c_gen->add_option("--bases", gen.bases, "ratio data only")->capture_default_str();
  c_gen->add_option("--informative", gen.informative, "ratio data only")->capture_default_str();
  c_gen->add_option("--out", gen.out, "training CSV");
  c_gen->add_option("--test-out", gen.test_out, "hold-out CSV");
  c_gen->add_option("--layout-out", gen.layout_out, "MNAR study/phase metadata CSV");

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "train one model");
  c_train->add_option("--data", train.data, "training CSV");
  c_train->add_option("--out", train.out, "model JSON");
  c_train->add_option("--standardize", train.standardize, "on or off")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  add_train_options(c_train, train);

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "evaluate a model on a CSV");
  c_eval->add_option("--model", ev.model);
  c_eval->add_option("--data", ev.data);
  c_eval->add_option("--healthy-class", ev.healthy, "enables sensitivity and specificity");
  c_eval->add_option("--out", ev.out, "report JSON (default: stdout)");
  c_eval->add_option("--predictions", ev.predictions, "per-sample predictions CSV");

  EnsembleArgs avg;
  auto* c_avg = app.add_subcommand("average", "geodesic average of trained models");
  c_avg->add_option("--models", avg.models, "model JSON files");
  c_avg->add_option("--clusters", avg.clusters, "Ward clusters; the best-scoring average is written")
      ->capture_default_str();
  c_avg->add_option("--train-data", avg.train_data, "training CSV for cluster scores");
  c_avg->add_option("--out", avg.out, "averaged model JSON");
  c_avg->add_option("--report", avg.report, "report JSON (default: stdout)");

  EnsembleArgs clu;
  auto* c_clu = app.add_subcommand("cluster", "Grassmann-distance Ward clustering of models");
  c_clu->add_option("--models", clu.models, "model JSON files");
  c_clu->add_option("--max-clusters", clu.max_clusters)->capture_default_str();
  c_clu->add_option("--train-data", clu.train_data, "training CSV for elbow scores");
  c_clu->add_option("--out", clu.out, "JSON (default: stdout)");

  AnalyzeArgs an;
  auto* c_an = app.add_subcommand("analyze", "relevances, classification terms, reduced-model curves");
  c_an->add_option("--model", an.model);
  c_an->add_option("--data", an.data, "CSV for term and reduced-model analysis");
  c_an->add_option("--out-dir", an.out_dir);
  c_an->add_option("--top-ratios", an.top_ratios, "ratio features counted per class")->capture_default_str();

  ProjectArgs pr;
  auto* c_pr = app.add_subcommand("project", "sphere and Mollweide coordinates for rank-3 models");
  c_pr->add_option("--model", pr.model);
  c_pr->add_option("--data", pr.data, "CSV of samples to project");
  c_pr->add_option("--out-dir", pr.out_dir);
  c_pr->add_option("--points", pr.points, "Fibonacci lattice size")->capture_default_str();
  c_pr->add_option("--theta", pr.theta, "steepness values for the crispness table");

  ExperimentArgs ex;
  auto* c_ex = app.add_subcommand("experiment", "cross-validation with restarts, ensembles and averages");
  c_ex->add_option("--data", ex.data, "dataset CSV");
  c_ex->add_flag("--synth", ex.synth, "use the generated arcs benchmark with its hold-out set");
  c_ex->add_option("--n-per-class", ex.n_per_class)->capture_default_str();
  c_ex->add_option("--n-test", ex.n_test)->capture_default_str();
  c_ex->add_option("--missing-fraction", ex.missing_fraction)->capture_default_str();
  c_ex->add_option("--missing-type", ex.missing_type)->capture_default_str();
  c_ex->add_option("--train-fraction", ex.train_fraction)->capture_default_str();
  add_train_options(c_ex, ex.train);
  c_ex->add_option("--folds", ex.folds)->capture_default_str();
  c_ex->add_option("--restarts", ex.restarts)->capture_default_str();
  c_ex->add_flag("--bootstrap", ex.bootstrap, "train each restart on a stratified bootstrap bag");
  c_ex->add_option("--standardize", ex.standardize, "auto, on or off")
      ->check(CLI::IsMember({"auto", "on", "off"}))
      ->capture_default_str();
  c_ex->add_option("--healthy-class", ex.healthy);
  c_ex->add_option("--average-clusters", ex.average_clusters)->capture_default_str();
  c_ex->add_option("--max-clusters", ex.max_clusters)->capture_default_str();
  c_ex->add_option("--out-dir", ex.out_dir);

  std::string command = "geolvq";
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(command, "usage", e.what(), 2);
  }
  CLI::App* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front();
  if (sub) command = sub->get_name();
  try {
    if (!g.config.empty()) apply_config(app, sub, g.config);
    if (g.jobs < 1) throw UsageError("--jobs must be at least 1");
    if (sub == c_gen) run_gen(gen, g);
    else if (sub == c_train) run_train(train, g);
    else if (sub == c_eval) run_eval(ev, g);
    else if (sub == c_avg) run_average(avg, g);
    else if (sub == c_clu) run_cluster(clu, g);
    else if (sub == c_an) run_analyze(an, g);
    else if (sub == c_pr) run_project(pr, g);
    else if (sub == c_ex) run_experiment_cmd(ex, g);
  } catch (const CLI::ParseError& e) {
    return fail(command, "usage", e.what(), 2);
  } catch (const UsageError& e) {
    return fail(command, "usage", e.what(), 2);
  } catch (const std::exception& e) {
    return fail(command, error_type(e), e.what(), 1);
  }
  return 0;
}
