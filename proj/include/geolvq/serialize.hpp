#pragma once

// Versioned JSON persistence for models and evaluation reports. Doubles are
// written in shortest round-trip form, so a model read back is bitwise equal.

#include "geolvq/analysis.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace geolvq {

inline constexpr const char* kModelFormat = "geolvq-model";
inline constexpr int kModelFormatVersion = 1;

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A model together with what is needed to apply it to raw data.
struct ModelFile {
  Model model;
  std::vector<std::string> class_names;
  std::vector<std::string> feature_names;
  std::optional<StandardizationParams> standardization;
};

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto r = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    throw FormatError(std::string("'") + what + "' must be a nonempty array of rows");
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& r = j[static_cast<size_t>(i)];
    if (!r.is_array() || static_cast<Eigen::Index>(r.size()) != cols) {
      throw FormatError(std::string("'") + what + "' has ragged rows");
    }
    for (Eigen::Index k = 0; k < cols; ++k) {
      if (!r[static_cast<size_t>(k)].is_number()) throw FormatError(std::string("'") + what + "' holds a non-number");
      m(i, k) = r[static_cast<size_t>(k)].get<double>();
    }
  }
  return m;
}

inline nlohmann::json vector_to_json(const Vector& v) {
  auto a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Vector vector_from_json(const nlohmann::json& j, const char* what) {
  if (!j.is_array()) throw FormatError(std::string("'") + what + "' must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw FormatError(std::string("'") + what + "' holds a non-number");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

// NaN and infinities have no JSON form; write them as null.
inline nlohmann::json number_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); }

}  // namespace detail

inline nlohmann::json model_to_json(const ModelFile& f) {
  f.model.validate();
  nlohmann::json j;
  j["format"] = kModelFormat;
  j["version"] = kModelFormatVersion;
  j["variant"] = to_string(f.model.variant);
  j["steepness"] = f.model.steepness;
  j["classes"] = f.model.num_classes();
  j["dim"] = f.model.dim();
  j["rank"] = f.model.rank();
  j["prototypes"] = detail::matrix_to_json(f.model.prototypes);
  j["omegas"] = nlohmann::json::array();
  for (const auto& p : f.model.metrics) j["omegas"].push_back(detail::matrix_to_json(p.matrix()));
  j["class_names"] = f.class_names;
  j["feature_names"] = f.feature_names;
  if (f.standardization) {
    j["standardization"] = {{"means", detail::vector_to_json(f.standardization->means)},
                            {"stds", detail::vector_to_json(f.standardization->stds)}};
  }
  return j;
}

inline ModelFile model_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("format") || j["format"] != kModelFormat) {
    throw FormatError("not a geolvq model file");
  }
  if (!j.contains("version") || !j["version"].is_number_integer()) throw FormatError("model file has no version");
  const int version = j["version"].get<int>();
  if (version != kModelFormatVersion) {
    throw FormatError("model format version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kModelFormatVersion) + ")");
  }
  ModelFile f;
  try {
    f.model.variant = variant_from_string(j.at("variant").get<std::string>());
    f.model.steepness = j.at("steepness").get<double>();
    f.model.prototypes = detail::matrix_from_json(j.at("prototypes"), "prototypes");
    for (const auto& o : j.at("omegas")) f.model.metrics.emplace_back(detail::matrix_from_json(o, "omegas"));
    f.class_names = j.value("class_names", std::vector<std::string>{});
    f.feature_names = j.value("feature_names", std::vector<std::string>{});
    if (j.contains("standardization")) {
      const auto& s = j["standardization"];
      StandardizationParams p;
      p.means = detail::vector_from_json(s.at("means"), "means");
      p.stds = detail::vector_from_json(s.at("stds"), "stds");
      f.standardization = std::move(p);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt model file: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("corrupt model file: ") + e.what());
  }
  try {
    f.model.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid model: ") + e.what());
  }
  if (j.at("classes") != f.model.num_classes() || j.at("dim") != f.model.dim() || j.at("rank") != f.model.rank()) {
    throw FormatError("model header does not match its parameters");
  }
  if (!f.class_names.empty() && static_cast<int>(f.class_names.size()) != f.model.num_classes()) {
    throw FormatError("class name count does not match the model");
  }
  if (!f.feature_names.empty() && static_cast<Eigen::Index>(f.feature_names.size()) != f.model.dim()) {
    throw FormatError("feature name count does not match the model");
  }
  if (f.standardization &&
      (f.standardization->means.size() != f.model.dim() || f.standardization->stds.size() != f.model.dim())) {
    throw FormatError("standardization does not match the model dimension");
  }
  return f;
}

inline std::string serialize_model(const ModelFile& f) { return model_to_json(f).dump(1); }

inline ModelFile deserialize_model(const std::string& bytes) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("model file is not valid JSON: ") + e.what());
  }
  return model_from_json(j);
}

inline void save_model(const std::string& path, const ModelFile& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << serialize_model(f) << '\n';
}

inline ModelFile load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

/// Reorders the columns to `features` and relabels to the `classes` order,
/// matching by name. Every listed feature must be present; classes in the
/// data must all be known. Extra columns are dropped.
inline LabeledDataset align_dataset(const LabeledDataset& data, const std::vector<std::string>& features,
                                   const std::vector<std::string>& classes) {
  std::vector<Eigen::Index> cols;
  for (const auto& f : features) {
    const auto& names = data.feature_names();
    const auto it = std::find(names.begin(), names.end(), f);
    if (it == names.end()) throw std::invalid_argument("data lacks feature '" + f + "'");
    cols.push_back(static_cast<Eigen::Index>(it - names.begin()));
  }
  std::vector<ClassIndex> map;
  for (const auto& c : data.class_names()) {
    const auto it = std::find(classes.begin(), classes.end(), c);
    if (it == classes.end()) throw std::invalid_argument("class '" + c + "' is unknown to the model");
    map.push_back(static_cast<ClassIndex>(it - classes.begin()));
  }
  Matrix v(data.size(), static_cast<Eigen::Index>(cols.size()));
  Mask m(data.size(), static_cast<Eigen::Index>(cols.size()));
  std::vector<ClassIndex> y;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (size_t k = 0; k < cols.size(); ++k) {
      v(i, static_cast<Eigen::Index>(k)) = data.values()(i, cols[k]);
      m(i, static_cast<Eigen::Index>(k)) = data.mask()(i, cols[k]);
    }
    if (!m.row(i).any()) throw std::invalid_argument("sample " + std::to_string(i + 1) + " has none of the model's features");
    y.push_back(map[static_cast<size_t>(data.label(i))]);
  }
  return LabeledDataset(std::move(v), std::move(m), std::move(y), features, classes);
}

/// Aligned to the model's names (when it has them) and standardized with its parameters.
inline LabeledDataset prepare_for_model(const ModelFile& f, const LabeledDataset& data) {
  LabeledDataset out = data;
  if (!f.feature_names.empty() || !f.class_names.empty()) {
    out = align_dataset(data, f.feature_names.empty() ? data.feature_names() : f.feature_names,
                        f.class_names.empty() ? data.class_names() : f.class_names);
  }
  if (out.dim() != f.model.dim()) throw std::invalid_argument("data and model dimensions differ");
  if (out.num_classes() != f.model.num_classes()) throw std::invalid_argument("data and model class counts differ");
  if (f.standardization) out = standardize_apply(out, *f.standardization);
  return out;
}

inline nlohmann::json report_to_json(const EvaluationReport& r, const std::vector<std::string>& class_names = {}) {
  nlohmann::json j;
  j["accuracy"] = r.accuracy;
  j["error"] = r.error();
  j["macro_avg"] = r.macro_avg;
  auto acc = nlohmann::json::object();
  for (Eigen::Index c = 0; c < r.class_accuracy.size(); ++c) {
    const auto name = static_cast<size_t>(c) < class_names.size() ? class_names[static_cast<size_t>(c)]
                                                                  : std::to_string(c + 1);
    acc[name] = detail::number_or_null(r.class_accuracy(c));
  }
  j["class_accuracy"] = acc;
  auto conf = nlohmann::json::array();
  for (Eigen::Index i = 0; i < r.confusion.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index k = 0; k < r.confusion.cols(); ++k) row.push_back(r.confusion(i, k));
    conf.push_back(std::move(row));
  }
  j["confusion"] = conf;
  if (r.sensitivity) j["sensitivity"] = detail::number_or_null(*r.sensitivity);
  if (r.specificity) j["specificity"] = detail::number_or_null(*r.specificity);
  j["warnings"] = r.warnings;
  return j;
}

}  // namespace geolvq
