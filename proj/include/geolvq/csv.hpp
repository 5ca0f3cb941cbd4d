#pragma once

// CSV ingestion and emission for LabeledDataset.
//
// Header row required. Cells that are empty, equal to the missing token, or
// parse to NaN become unobserved. Class labels are mapped to indices in order
// of first appearance and the original strings are kept as class names.

#include "geolvq/core.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace geolvq {

struct CsvOptions {
  std::string missing_token;  // empty cells are always missing
  std::string label_column = "label";
};

namespace csv_detail {

inline std::string trim(std::string_view s) {
  size_t b = 0;
  size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

/// Splits one line on commas; double quotes group and "" escapes a quote.
inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  cells.push_back(trim(cur));
  return cells;
}

inline bool parse_double(const std::string& s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

inline std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

}  // namespace csv_detail

inline LabeledDataset read_csv(std::istream& in, const CsvOptions& opt = {}) {
  using csv_detail::split_line;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("csv: missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_line(line);
  size_t label_col = header.size();
  for (size_t c = 0; c < header.size(); ++c) {
    if (header[c] == opt.label_column) label_col = c;
  }
  if (label_col == header.size()) {
    throw std::runtime_error("csv: unknown label column '" + opt.label_column + "'");
  }
  if (header.size() < 2) throw std::runtime_error("csv: no feature columns");

  std::vector<std::string> features;
  for (size_t c = 0; c < header.size(); ++c) {
    if (c != label_col) features.push_back(header[c]);
  }
  const auto dim = static_cast<Eigen::Index>(features.size());

  std::vector<std::vector<double>> rows;
  std::vector<std::vector<bool>> masks;
  std::vector<ClassIndex> labels;
  std::vector<std::string> classes;
  std::map<std::string, ClassIndex> class_of;

  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv_detail::trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error("csv: line " + std::to_string(line_no) + " has " +
                               std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(header.size()));
    }
    std::vector<double> row;
    std::vector<bool> mrow;
    row.reserve(features.size());
    mrow.reserve(features.size());
    for (size_t c = 0; c < cells.size(); ++c) {
      if (c == label_col) continue;
      const std::string& cell = cells[c];
      double v = 0.0;
      if (cell.empty() || cell == opt.missing_token) {
        row.push_back(0.0);
        mrow.push_back(false);
      } else if (csv_detail::parse_double(cell, v)) {
        const bool observed = !std::isnan(v);
        row.push_back(observed ? v : 0.0);
        mrow.push_back(observed);
      } else {
        throw std::runtime_error("csv: line " + std::to_string(line_no) +
                                 ": non-numeric value '" + cell + "' in column '" + header[c] +
                                 "'");
      }
    }
    bool any = false;
    for (bool b : mrow) any = any || b;
    if (!any) {
      throw std::runtime_error("csv: line " + std::to_string(line_no) +
                               ": sample fully unobserved");
    }
    const std::string& lab = cells[label_col];
    auto it = class_of.find(lab);
    if (it == class_of.end()) {
      it = class_of.emplace(lab, static_cast<ClassIndex>(classes.size())).first;
      classes.push_back(lab);
    }
    labels.push_back(it->second);
    rows.push_back(std::move(row));
    masks.push_back(std::move(mrow));
  }
  if (rows.empty()) throw std::runtime_error("csv: no data rows");

  Matrix values(static_cast<Eigen::Index>(rows.size()), dim);
  Mask mask(static_cast<Eigen::Index>(rows.size()), dim);
  for (size_t i = 0; i < rows.size(); ++i) {
    for (Eigen::Index d = 0; d < dim; ++d) {
      values(static_cast<Eigen::Index>(i), d) = rows[i][static_cast<size_t>(d)];
      mask(static_cast<Eigen::Index>(i), d) = masks[i][static_cast<size_t>(d)];
    }
  }
  return LabeledDataset(std::move(values), std::move(mask), std::move(labels),
                        std::move(features), std::move(classes));
}

inline LabeledDataset load_csv(const std::string& path, const CsvOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv: cannot open '" + path + "'");
  return read_csv(in, opt);
}

/// Writes features then the label column; missing entries as `missing_token`.
inline void write_csv(std::ostream& out, const LabeledDataset& data,
                      const CsvOptions& opt = {}) {
  using csv_detail::quote;
  for (const auto& f : data.feature_names()) out << quote(f) << ',';
  out << quote(opt.label_column) << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index d = 0; d < data.dim(); ++d) {
      if (data.mask()(i, d)) {
        out << data.values()(i, d);
      } else {
        out << opt.missing_token;
      }
      out << ',';
    }
    out << quote(data.class_names()[static_cast<size_t>(data.label(i))]) << '\n';
  }
}

inline void save_csv(const std::string& path, const LabeledDataset& data,
                     const CsvOptions& opt = {}) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("csv: cannot write '" + path + "'");
  write_csv(out, data, opt);
}

}  // namespace geolvq
