#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "spemix/error.hpp"
#include "spemix/matrix.hpp"
#include "spemix/rng.hpp"

namespace spemix {

// A rectangular numeric table with optional class labels. Labels follow the
// file convention (1..K); fitting code converts to zero-based indices at the
// boundary via labels_zero_based().
struct Dataset {
  std::string name;
  std::vector<std::string> column_names;
  MatrixXd x;
  std::vector<int> labels;  // empty when the file carries no truth column
  bool standardized = false;

  int rows() const { return static_cast<int>(x.rows()); }
  int cols() const { return static_cast<int>(x.cols()); }
  bool has_labels() const { return !labels.empty(); }

  std::vector<int> labels_zero_based() const {
    std::vector<int> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = labels[i] - 1;
    return out;
  }

  void validate() const {
    if (x.cols() < 1) throw DataError("Dataset: needs at least one column");
    if (x.rows() < 1) throw DataError("Dataset: needs at least one row");
    if (!x.allFinite())
      throw DataError("Dataset: non-finite entries are not allowed");
    if (column_names.size() != static_cast<std::size_t>(x.cols()))
      throw DataError("Dataset: column name count mismatch");
    if (!labels.empty()) {
      if (labels.size() != static_cast<std::size_t>(x.rows()))
        throw DataError("Dataset: label count differs from row count");
      for (int lab : labels)
        if (lab < 1) throw DataError("Dataset: labels must be in 1..K");
    }
  }
};

// Shortest decimal representation that parses back to the same double.
// Keeps CSV and report output byte-stable across runs.
inline std::string format_double(double value) {
  char buffer[64];
  auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

namespace dataset_detail {

inline std::string trim(const std::string& s) {
  std::size_t begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  std::size_t end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return fields;
}

inline double parse_cell(const std::string& cell, int row, int col,
                         const std::string& col_name) {
  const char* begin = cell.c_str();
  const char* end = begin + cell.size();
  double value = 0.0;
  auto result = std::from_chars(begin, end, value);
  std::ostringstream where;
  where << "row " << row << ", column " << (col + 1) << " ('" << col_name
        << "')";
  if (result.ec != std::errc() || result.ptr != end)
    throw DataError("load_csv: " + where.str() + ": '" + cell +
                    "' is not numeric");
  if (!std::isfinite(value))
    throw DataError("load_csv: " + where.str() +
                    ": non-finite value '" + cell + "'");
  return value;
}

inline int parse_label_cell(const std::string& cell, int row, int col,
                            const std::string& col_name) {
  double value = parse_cell(cell, row, col, col_name);
  double rounded = std::floor(value);
  std::ostringstream where;
  where << "row " << row << ", column " << (col + 1) << " ('" << col_name
        << "')";
  if (rounded != value || value < 1.0 || value > 1e6)
    throw DataError("load_csv: " + where.str() + ": label '" + cell +
                    "' must be an integer in 1..K");
  return static_cast<int>(rounded);
}

}  // namespace dataset_detail

// Strict CSV reader: comma separated, decimal point, one observation per
// row. When label_column names a column (by header, or by the synthesized
// names x1..xp for headerless files), that column is split off as the truth
// labels and excluded from p.
inline Dataset load_csv(const std::string& path, bool has_header = true,
                        const std::string& label_column = "") {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_csv: cannot open '" + path + "'");

  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (dataset_detail::trim(line).empty()) continue;
    lines.push_back(line);
  }
  if (lines.empty()) throw DataError("load_csv: '" + path + "' is empty");

  std::vector<std::string> names;
  std::size_t first_data = 0;
  if (has_header) {
    names = dataset_detail::split_fields(lines[0]);
    first_data = 1;
    if (lines.size() == 1)
      throw DataError("load_csv: '" + path + "' has a header but no rows");
  } else {
    const std::size_t width = dataset_detail::split_fields(lines[0]).size();
    for (std::size_t j = 0; j < width; ++j)
      names.push_back("x" + std::to_string(j + 1));
  }
  const int total_cols = static_cast<int>(names.size());

  int label_index = -1;
  if (!label_column.empty()) {
    for (int j = 0; j < total_cols; ++j)
      if (names[j] == label_column) label_index = j;
    if (label_index < 0)
      throw DataError("load_csv: no column named '" + label_column + "' in '" +
                      path + "'");
    if (total_cols < 2)
      throw DataError("load_csv: '" + path +
                      "' has only the label column; no features remain");
  }

  const int n = static_cast<int>(lines.size() - first_data);
  const int p = total_cols - (label_index >= 0 ? 1 : 0);
  Dataset ds;
  ds.name = path;
  ds.x.resize(n, p);
  if (label_index >= 0) ds.labels.resize(n);
  for (int j = 0; j < total_cols; ++j)
    if (j != label_index) ds.column_names.push_back(names[j]);

  for (int i = 0; i < n; ++i) {
    const int file_row = static_cast<int>(first_data) + i + 1;
    std::vector<std::string> fields =
        dataset_detail::split_fields(lines[first_data + i]);
    if (static_cast<int>(fields.size()) != total_cols) {
      std::ostringstream msg;
      msg << "load_csv: row " << file_row << " has " << fields.size()
          << " fields, expected " << total_cols;
      throw DataError(msg.str());
    }
    int out_col = 0;
    for (int j = 0; j < total_cols; ++j) {
      if (j == label_index) {
        ds.labels[i] =
            dataset_detail::parse_label_cell(fields[j], file_row, j, names[j]);
      } else {
        ds.x(i, out_col++) =
            dataset_detail::parse_cell(fields[j], file_row, j, names[j]);
      }
    }
  }
  ds.validate();
  return ds;
}

// Writer matched to load_csv: header row, shortest round-trip decimals, a
// trailing 1-based label column when the dataset carries labels.
inline void save_csv(const std::string& path, const Dataset& ds) {
  ds.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("save_csv: cannot open '" + path + "' for write");
  for (int j = 0; j < ds.cols(); ++j) {
    if (j) out << ',';
    out << ds.column_names[j];
  }
  if (ds.has_labels()) out << ",label";
  out << '\n';
  for (int i = 0; i < ds.rows(); ++i) {
    for (int j = 0; j < ds.cols(); ++j) {
      if (j) out << ',';
      out << format_double(ds.x(i, j));
    }
    if (ds.has_labels()) out << ',' << ds.labels[i];
    out << '\n';
  }
  if (!out) throw DataError("save_csv: write to '" + path + "' failed");
}

// Column-wise location/scale normalization: mean 0, sample standard
// deviation 1 (n-1 divisor). Constant columns cannot be scaled.
inline Dataset standardize(const Dataset& ds) {
  ds.validate();
  if (ds.rows() < 2)
    throw DataError("standardize: needs at least two rows");
  Dataset out = ds;
  for (int j = 0; j < ds.cols(); ++j) {
    const double lo = ds.x.col(j).minCoeff();
    const double hi = ds.x.col(j).maxCoeff();
    if (lo == hi)
      throw DataError("standardize: column '" + ds.column_names[j] +
                      "' is constant");
    const double mean = ds.x.col(j).mean();
    const double sd = std::sqrt(
        (ds.x.col(j).array() - mean).square().sum() / (ds.rows() - 1));
    out.x.col(j) = (ds.x.col(j).array() - mean) / sd;
  }
  out.standardized = true;
  return out;
}

// A deterministic stratified supervision mask over a labeled dataset.
struct LabeledSplit {
  std::vector<std::uint8_t> mask;  // 1 = label revealed to the fit
  double fraction = 0.0;
  std::uint64_t seed = 0;

  int labeled_count() const {
    int count = 0;
    for (std::uint8_t m : mask) count += m;
    return count;
  }
};

// Largest-remainder apportionment keeps the per-class counts proportional
// while the total hits round(fraction * N) exactly.
inline LabeledSplit make_split(const Dataset& ds, double fraction,
                               std::uint64_t seed) {
  ds.validate();
  if (!ds.has_labels())
    throw DataError("make_split: dataset has no truth labels");
  if (!(fraction >= 0.0) || fraction > 1.0)
    throw ValidationError("make_split: fraction must lie in [0, 1]");

  std::map<int, std::vector<int>> by_class;
  for (int i = 0; i < ds.rows(); ++i) by_class[ds.labels[i]].push_back(i);
  for (const auto& [label, members] : by_class)
    if (members.size() < 2) {
      std::ostringstream msg;
      msg << "make_split: class " << label << " has " << members.size()
          << " member(s); stratification is best effort";
      warn(msg.str());
    }

  const int target =
      static_cast<int>(std::lround(fraction * ds.rows()));
  std::vector<int> class_ids;
  std::vector<int> quota;
  std::vector<double> remainder;
  int assigned = 0;
  for (const auto& [label, members] : by_class) {
    const double share = fraction * static_cast<double>(members.size());
    const int base = std::min(static_cast<int>(std::floor(share)),
                              static_cast<int>(members.size()));
    class_ids.push_back(label);
    quota.push_back(base);
    remainder.push_back(share - base);
    assigned += base;
  }
  std::vector<std::size_t> order(class_ids.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (remainder[a] != remainder[b])
                       return remainder[a] > remainder[b];
                     return class_ids[a] < class_ids[b];
                   });
  for (std::size_t k = 0; k < order.size() && assigned < target; ++k) {
    const std::size_t c = order[k];
    if (quota[c] <
        static_cast<int>(by_class[class_ids[c]].size())) {
      ++quota[c];
      ++assigned;
    }
  }

  LabeledSplit split;
  split.mask.assign(ds.rows(), 0);
  split.fraction = fraction;
  split.seed = seed;
  Rng rng(seed);
  for (std::size_t c = 0; c < class_ids.size(); ++c) {
    const std::vector<int>& members = by_class[class_ids[c]];
    std::vector<int> chosen =
        rng.sample_indices(static_cast<int>(members.size()), quota[c]);
    for (int idx : chosen) split.mask[members[idx]] = 1;
  }
  return split;
}

// Zero-based labels with -1 on the rows the split keeps hidden; this is the
// exact shape the semi-supervised fitting entry point consumes.
inline std::vector<int> masked_labels(const Dataset& ds,
                                      const LabeledSplit& split) {
  if (split.mask.size() != static_cast<std::size_t>(ds.rows()))
    throw ValidationError("masked_labels: mask length mismatch");
  std::vector<int> out(ds.rows(), -1);
  for (int i = 0; i < ds.rows(); ++i)
    if (split.mask[i]) out[i] = ds.labels[i] - 1;
  return out;
}

}  // namespace spemix
