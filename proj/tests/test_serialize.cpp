#include "geolvq/serialize.hpp"
#include "geolvq/synth.hpp"

#include <gtest/gtest.h>

#include <cstring>

using namespace geolvq;

namespace {

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<size_t>(a.size())) == 0;
}

ModelFile trained(Variant v, Eigen::Index rank) {
  const auto data = augment_nonlinear(generate_arcs(30, 2), 2);
  TrainConfig cfg;
  cfg.variant = v;
  cfg.rank = rank;
  cfg.epochs = 30;
  cfg.steepness = v == Variant::Probabilistic ? 2.0 : 1.0;
  ModelFile f{train_model(data, cfg).model, data.class_names(), data.feature_names(), standardize_fit(data)};
  return f;
}

}  // namespace

TEST(Serialize, RoundTripIsBitwise) {
  for (Variant v : {Variant::AngleGlobal, Variant::AngleLocal, Variant::Probabilistic, Variant::EuclideanPartial}) {
    const auto f = trained(v, 4);
    const auto g = deserialize_model(serialize_model(f));
    EXPECT_EQ(g.model.variant, v);
    EXPECT_EQ(g.model.rank(), 4);
    EXPECT_EQ(g.model.steepness, f.model.steepness);
    EXPECT_TRUE(bitwise_equal(g.model.prototypes, f.model.prototypes)) << to_string(v);
    ASSERT_EQ(g.model.metrics.size(), f.model.metrics.size());
    for (size_t k = 0; k < f.model.metrics.size(); ++k) {
      EXPECT_TRUE(bitwise_equal(g.model.metrics[k].matrix(), f.model.metrics[k].matrix()));
    }
    EXPECT_EQ(g.class_names, f.class_names);
    EXPECT_EQ(g.feature_names, f.feature_names);
    ASSERT_TRUE(g.standardization.has_value());
    EXPECT_TRUE(bitwise_equal(g.standardization->means, f.standardization->means));
    EXPECT_TRUE(bitwise_equal(g.standardization->stds, f.standardization->stds));
    EXPECT_EQ(serialize_model(g), serialize_model(f));
  }
}

TEST(Serialize, AwkwardDoublesSurvive) {
  auto f = trained(Variant::AngleGlobal, 2);
  f.model.prototypes(0, 0) = 4.9406564584124654e-324;
  f.model.prototypes(0, 1) = 0.1 + 0.2;
  f.model.prototypes(1, 0) = -0.0;
  f.standardization.reset();
  const auto g = deserialize_model(serialize_model(f));
  EXPECT_TRUE(bitwise_equal(g.model.prototypes, f.model.prototypes));
  EXPECT_FALSE(g.standardization.has_value());
}

TEST(Serialize, GarbageIsAFormatError) {
  EXPECT_THROW(deserialize_model("not json at all"), FormatError);
  EXPECT_THROW(deserialize_model("{}"), FormatError);
  EXPECT_THROW(deserialize_model("[1,2,3]"), FormatError);
  EXPECT_THROW(deserialize_model(R"({"format":"geolvq-model","version":1})"), FormatError);
}

TEST(Serialize, VersionMismatch) {
  auto j = model_to_json(trained(Variant::AngleGlobal, 2));
  j["version"] = 99;
  try {
    model_from_json(j);
    FAIL() << "expected a version error";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("version 99"), std::string::npos);
  }
}

TEST(Serialize, CorruptPayloads) {
  const auto good = model_to_json(trained(Variant::AngleLocal, 2));
  auto j = good;
  j["omegas"].erase(0);
  EXPECT_THROW(model_from_json(j), FormatError);
  j = good;
  j["prototypes"][0].erase(0);
  EXPECT_THROW(model_from_json(j), FormatError);
  j = good;
  j["prototypes"][0][0] = "x";
  EXPECT_THROW(model_from_json(j), FormatError);
  j = good;
  j["rank"] = 3;
  EXPECT_THROW(model_from_json(j), FormatError);
  j = good;
  j["variant"] = "bogus";
  EXPECT_THROW(model_from_json(j), FormatError);
  j = good;
  j["steepness"] = -1.0;
  EXPECT_THROW(model_from_json(j), FormatError);
  j = good;
  j["class_names"].push_back("extra");
  EXPECT_THROW(model_from_json(j), FormatError);
}

TEST(Serialize, ReportJson) {
  const auto r = evaluate_predictions({0, 0, 1, 1}, {0, 1, 1, 1}, 3, 0);
  const auto j = report_to_json(r, {"healthy", "a", "b"});
  EXPECT_DOUBLE_EQ(j["accuracy"].get<double>(), 0.75);
  EXPECT_DOUBLE_EQ(j["class_accuracy"]["healthy"].get<double>(), 0.5);
  EXPECT_TRUE(j["class_accuracy"]["b"].is_null());
  EXPECT_EQ(j["confusion"][0][1].get<long>(), 1);
  EXPECT_DOUBLE_EQ(j["sensitivity"].get<double>(), 1.0);
}

TEST(Serialize, AlignDatasetByName) {
  Matrix v(3, 3);
  v << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  Mask m = Mask::Constant(3, 3, true);
  m(1, 0) = false;
  const LabeledDataset d(v, m, {0, 1, 0}, {"a", "b", "c"}, {"y", "x"});
  const auto a = align_dataset(d, {"c", "a"}, {"x", "y", "z"});
  EXPECT_EQ(a.feature_names(), (std::vector<std::string>{"c", "a"}));
  EXPECT_EQ(a.labels(), (std::vector<ClassIndex>{1, 0, 1}));
  EXPECT_EQ(a.num_classes(), 3);
  EXPECT_DOUBLE_EQ(a.values()(2, 0), 9.0);
  EXPECT_FALSE(a.mask()(1, 1));
  EXPECT_THROW(align_dataset(d, {"q"}, {"x", "y"}), std::invalid_argument);
  EXPECT_THROW(align_dataset(d, {"a"}, {"x"}), std::invalid_argument);
}
