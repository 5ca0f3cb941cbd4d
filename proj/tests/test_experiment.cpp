#include "geolvq/experiment.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace geolvq;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("geolvq_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Imbalanced 3-class toy data with a few missing cells.
fs::path toy_csv(const fs::path& dir) {
  const auto d = inject_mcar(augment_nonlinear(generate_arcs(40, 3), 3), 0.1, 3);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (d.label(i) != 2 || i % 3 == 0) keep.push_back(i);
  }
  const auto p = dir / "toy.csv";
  save_csv(p.string(), d.subset(keep));
  return p;
}

ExperimentConfig toy_config(const fs::path& dir) {
  ExperimentConfig cfg;
  cfg.dataset_path = toy_csv(dir).string();
  cfg.train.rank = 3;
  cfg.train.epochs = 40;
  cfg.folds = 2;
  cfg.restarts = 1;
  cfg.seed = 7;
  cfg.output_dir = (dir / "out").string();
  return cfg;
}

}  // namespace

TEST(Experiment, TwoFoldsOneRestartLayout) {
  const auto dir = scratch("layout");
  const auto cfg = toy_config(dir);
  const auto res = run_experiment(cfg);
  ASSERT_EQ(res.folds.size(), 2u);
  const fs::path out(cfg.output_dir);
  int models = 0, reports = 0;
  for (const auto& e : fs::recursive_directory_iterator(out)) {
    if (e.path().filename() == "model.json") ++models;
    if (e.path().filename() == "report.json") ++reports;
  }
  EXPECT_EQ(models, 2);
  EXPECT_EQ(reports, 3);
  EXPECT_TRUE(fs::exists(out / "fold_1" / "restart_1" / "model.json"));
  EXPECT_TRUE(fs::exists(out / "summary.csv"));
  const auto header = slurp(out / "summary.csv").substr(0, 60);
  EXPECT_EQ(header.rfind("method,folds,sensitivity_mean", 0), 0u);
  const auto rep = nlohmann::json::parse(slurp(out / "fold_1" / "report.json"));
  EXPECT_TRUE(rep.contains("majority_vote"));
  EXPECT_TRUE(rep.contains("geodesic_average"));
  EXPECT_EQ(rep["individual"].size(), 1u);
  // a saved model reproduces its reported test accuracy
  const auto mf = load_model((out / "fold_1" / "restart_1" / "model.json").string());
  EXPECT_TRUE(mf.standardization.has_value());
  EXPECT_EQ(mf.class_names, res.class_names);
}

TEST(Experiment, SingleRestartEnsemblesEqualTheModel) {
  const auto dir = scratch("single");
  auto cfg = toy_config(dir);
  cfg.output_dir.clear();
  const auto res = run_experiment(cfg);
  for (const auto& f : res.folds) {
    EXPECT_EQ(f.majority.confusion, f.restarts[0].test.confusion);
    ASSERT_TRUE(f.average.has_value());
    EXPECT_EQ(f.average->confusion, f.restarts[0].test.confusion);
  }
}

TEST(Experiment, ByteIdenticalForSameSeedAnyJobs) {
  const auto dir = scratch("determinism");
  auto cfg = toy_config(dir);
  cfg.restarts = 3;
  cfg.output_dir = (dir / "a").string();
  run_experiment(cfg);
  cfg.output_dir = (dir / "b").string();
  cfg.jobs = 3;
  run_experiment(cfg);
  EXPECT_EQ(slurp(dir / "a" / "summary.csv"), slurp(dir / "b" / "summary.csv"));
  EXPECT_EQ(slurp(dir / "a" / "fold_2" / "report.json"), slurp(dir / "b" / "fold_2" / "report.json"));
  EXPECT_EQ(slurp(dir / "a" / "fold_1" / "restart_3" / "model.json"),
            slurp(dir / "b" / "fold_1" / "restart_3" / "model.json"));
  cfg.seed = 8;
  cfg.output_dir = (dir / "c").string();
  run_experiment(cfg);
  EXPECT_NE(slurp(dir / "a" / "summary.csv"), slurp(dir / "c" / "summary.csv"));
}

TEST(Experiment, ImbalanceStrategiesRun) {
  const auto dir = scratch("imbalance");
  auto cfg = toy_config(dir);
  cfg.output_dir.clear();
  cfg.healthy_class = "1";
  for (auto s : {Imbalance::Smote, Imbalance::GeodesicSmote, Imbalance::CostWeights}) {
    cfg.imbalance = s;
    const auto res = run_experiment(cfg);
    ASSERT_TRUE(res.summary[0].sens_mean.has_value()) << to_string(s);
    EXPECT_GT(res.summary[0].macro_mean, 0.4) << to_string(s);
  }
  {
    std::ofstream w(dir / "gamma.csv");
    w << "0,1,1\n1,0,1\n5,5,0\n";
  }
  cfg.imbalance = Imbalance::CostWeights;
  cfg.cost_weights_path = (dir / "gamma.csv").string();
  EXPECT_NO_THROW(run_experiment(cfg));
  {
    std::ofstream w(dir / "bad.csv");
    w << "0,1\n1,0\n";
  }
  cfg.cost_weights_path = (dir / "bad.csv").string();
  EXPECT_THROW(run_experiment(cfg), std::invalid_argument);
}

TEST(Experiment, SyntheticHoldOutProtocol) {
  ExperimentConfig cfg;
  SynthConfig s;
  s.n_per_class = 40;
  s.n_test = 300;
  s.seed = 2;
  cfg.synth = s;
  cfg.folds = 1;
  cfg.restarts = 2;
  cfg.bootstrap = true;
  cfg.train.rank = 3;
  cfg.train.epochs = 60;
  const auto res = run_experiment(cfg);
  ASSERT_EQ(res.folds.size(), 1u);
  EXPECT_EQ(res.folds[0].restarts[0].test.confusion.sum(), 300);
  EXPECT_FALSE(res.folds[0].standardization.has_value());
}

TEST(Experiment, ErrorsCarryContext) {
  const auto dir = scratch("errors");
  auto cfg = toy_config(dir);
  cfg.output_dir.clear();
  cfg.healthy_class = "nope";
  EXPECT_THROW(run_experiment(cfg), std::invalid_argument);
  cfg.healthy_class.clear();
  cfg.train.rank = 50;
  try {
    run_experiment(cfg);
    FAIL() << "expected a training error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("fold 1, restart 1"), std::string::npos);
  }
  cfg.train.rank = 3;
  cfg.folds = 1;
  EXPECT_THROW(run_experiment(cfg), std::invalid_argument);
  cfg.folds = 2;
  cfg.average_clusters = 2;
  EXPECT_THROW(run_experiment(cfg), std::invalid_argument);
  EXPECT_EQ(imbalance_from_string("geodesic-smote"), Imbalance::GeodesicSmote);
  EXPECT_THROW(imbalance_from_string("x"), std::invalid_argument);
}
