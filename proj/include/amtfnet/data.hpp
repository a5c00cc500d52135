/*
 * Copyright 2026 The AMTFNet Toolkit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/**
 * \file data.hpp
 * \brief CSV ingestion, fault-free z-score statistics, sliding windows and
 * the stratified train/validation/test split.
 *
 * CSV schema: UTF-8, comma separated, header row first. Every column other
 * than `label` and the optional `mode` is a process variable, in file order.
 * One row per time step; one simulation run per file.
 */
#pragma once

#include "amtfnet/json_util.hpp"
#include "amtfnet/random.hpp"
#include "amtfnet/tensor.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace amtfnet {

/// Input data that violates the documented schema or preconditions.
class DataError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// One run: N rows of v variables, a class label per row and optional mode tags.
struct RawSeries {
  std::vector<std::string> names;
  std::vector<double> values;  // row-major N x v
  std::vector<std::size_t> labels;
  std::vector<std::size_t> modes;  // empty when the file has no mode column
  std::string source;

  std::size_t rows() const { return labels.size(); }
  std::size_t vars() const { return names.size(); }
  bool has_modes() const { return !modes.empty(); }
  double at(std::size_t r, std::size_t c) const { return values[r * vars() + c]; }

  void validate(std::size_t num_classes = 0) const {
    if (rows() == 0) throw DataError(source + ": series has no rows");
    if (vars() == 0) throw DataError(source + ": series has no variable columns");
    if (values.size() != rows() * vars())
      throw DataError(source + ": value matrix is not " + std::to_string(rows()) + "x" +
                      std::to_string(vars()));
    if (has_modes() && modes.size() != rows())
      throw DataError(source + ": mode column length differs from row count");
    if (num_classes)
      for (std::size_t r = 0; r < rows(); ++r)
        if (labels[r] >= num_classes)
          throw DataError(source + ": row " + std::to_string(r + 2) + ", column label: label " +
                          std::to_string(labels[r]) + " outside [0, " +
                          std::to_string(num_classes) + ")");
  }
};

struct CsvSchema {
  std::size_t num_classes = 0;  // 0 disables the range check
  std::string label_column = "label";
  std::string mode_column = "mode";
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline bool parse_double(const std::string& s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

inline bool parse_index(const std::string& s, std::size_t& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

inline std::string format_double(double x) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

}  // namespace detail

inline RawSeries parse_csv(std::istream& in, const CsvSchema& schema = {},
                           const std::string& source = "<stream>") {
  std::string line;
  if (!std::getline(in, line)) throw DataError(source + ": empty file (no header row)");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  auto header = detail::split_csv_line(line);
  for (auto& h : header) h = detail::trim(h);

  RawSeries s;
  s.source = source;
  long label_col = -1, mode_col = -1;
  std::vector<std::size_t> var_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == schema.label_column) {
      label_col = static_cast<long>(c);
    } else if (header[c] == schema.mode_column) {
      mode_col = static_cast<long>(c);
    } else {
      var_cols.push_back(c);
      s.names.push_back(header[c]);
    }
  }
  if (label_col < 0) throw DataError(source + ": missing column \"" + schema.label_column + "\"");
  if (var_cols.empty()) throw DataError(source + ": no variable columns");

  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw DataError(source + ": row " + std::to_string(row) + " has " +
                      std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(header.size()));
    for (std::size_t k = 0; k < var_cols.size(); ++k) {
      double x;
      const std::string cell = detail::trim(cells[var_cols[k]]);
      if (!detail::parse_double(cell, x))
        throw DataError(source + ": row " + std::to_string(row) + ", column " +
                        header[var_cols[k]] + ": non-numeric value \"" + cell + "\"");
      s.values.push_back(x);
    }
    std::size_t label;
    const std::string lc = detail::trim(cells[static_cast<std::size_t>(label_col)]);
    if (!detail::parse_index(lc, label))
      throw DataError(source + ": row " + std::to_string(row) + ", column " +
                      schema.label_column + ": invalid label \"" + lc + "\"");
    if (schema.num_classes && label >= schema.num_classes)
      throw DataError(source + ": row " + std::to_string(row) + ", column " +
                      schema.label_column + ": label " + lc + " outside [0, " +
                      std::to_string(schema.num_classes) + ")");
    s.labels.push_back(label);
    if (mode_col >= 0) {
      std::size_t mode;
      const std::string mc = detail::trim(cells[static_cast<std::size_t>(mode_col)]);
      if (!detail::parse_index(mc, mode))
        throw DataError(source + ": row " + std::to_string(row) + ", column " +
                        schema.mode_column + ": invalid mode \"" + mc + "\"");
      s.modes.push_back(mode);
    }
  }
  if (s.rows() == 0) throw DataError(source + ": no data rows (N = 0)");
  return s;
}

inline RawSeries load_csv(const std::string& path, const CsvSchema& schema = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return parse_csv(in, schema, path);
}

/// Shortest round-trip formatting, so reloading reproduces every value exactly.
inline void write_csv(std::ostream& out, const RawSeries& s) {
  for (const auto& n : s.names) out << n << ',';
  out << "label";
  if (s.has_modes()) out << ",mode";
  out << '\n';
  for (std::size_t r = 0; r < s.rows(); ++r) {
    for (std::size_t c = 0; c < s.vars(); ++c) out << detail::format_double(s.at(r, c)) << ',';
    out << s.labels[r];
    if (s.has_modes()) out << ',' << s.modes[r];
    out << '\n';
  }
}

inline void write_csv(const std::string& path, const RawSeries& s) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_csv(out, s);
  if (!out) throw std::runtime_error("write failed for " + path);
}

/// Per-variable mean and population std of the fault-free rows.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<std::size_t> floored;  // variables whose std hit the floor
  std::size_t normal_rows = 0;
  std::string source;

  Json to_json() const {
    return Json{{"mean", mean}, {"std", std}, {"floored", floored},
                {"normal_rows", normal_rows}, {"source", source}};
  }
  static NormStats from_json(const Json& j) {
    NormStats s;
    json_util::reject_unknown(j, {"mean", "std", "floored", "normal_rows", "source"}, "norm_stats");
    json_util::read_required(j, "mean", s.mean, "norm_stats");
    json_util::read_required(j, "std", s.std, "norm_stats");
    json_util::read(j, "floored", s.floored, "norm_stats");
    json_util::read(j, "normal_rows", s.normal_rows, "norm_stats");
    json_util::read(j, "source", s.source, "norm_stats");
    if (s.mean.size() != s.std.size()) throw ConfigError("norm_stats: mean/std length differ");
    return s;
  }
};

inline constexpr double kStdFloor = 1e-8;

/// Pools the rows labelled `normal_label` across every series (all modes).
inline NormStats compute_norm_stats(const std::vector<RawSeries>& series,
                                    std::size_t normal_label = 0) {
  if (series.empty()) throw DataError("compute_norm_stats: no series");
  const std::size_t v = series.front().vars();
  NormStats st;
  st.mean.assign(v, 0.0);
  st.std.assign(v, 0.0);
  for (const auto& s : series) {
    if (s.vars() != v)
      throw DataError(s.source + ": has " + std::to_string(s.vars()) + " variables, expected " +
                      std::to_string(v));
    for (std::size_t r = 0; r < s.rows(); ++r) {
      if (s.labels[r] != normal_label) continue;
      ++st.normal_rows;
      for (std::size_t c = 0; c < v; ++c) st.mean[c] += s.at(r, c);
    }
  }
  if (st.normal_rows < 2)
    throw DataError("compute_norm_stats: need at least 2 rows with label " +
                    std::to_string(normal_label) + ", found " + std::to_string(st.normal_rows));
  const double n = static_cast<double>(st.normal_rows);
  for (auto& m : st.mean) m /= n;
  for (const auto& s : series)
    for (std::size_t r = 0; r < s.rows(); ++r) {
      if (s.labels[r] != normal_label) continue;
      for (std::size_t c = 0; c < v; ++c) {
        const double d = s.at(r, c) - st.mean[c];
        st.std[c] += d * d;
      }
    }
  for (std::size_t c = 0; c < v; ++c) {
    st.std[c] = std::sqrt(st.std[c] / n);
    if (st.std[c] < kStdFloor) {
      st.std[c] = kStdFloor;
      st.floored.push_back(c);
    }
  }
  st.source = "label " + std::to_string(normal_label) + " rows pooled over " +
              std::to_string(series.size()) + " series (" + std::to_string(st.normal_rows) +
              " rows)";
  if (!st.floored.empty()) st.source += ", " + std::to_string(st.floored.size()) + " constant variable(s) floored";
  return st;
}

inline NormStats compute_norm_stats(const RawSeries& series, std::size_t normal_label = 0) {
  return compute_norm_stats(std::vector<RawSeries>{series}, normal_label);
}

inline RawSeries apply_zscore(const RawSeries& s, const NormStats& st) {
  if (st.mean.size() != s.vars())
    throw DataError(s.source + ": has " + std::to_string(s.vars()) +
                    " variables, normalisation statistics cover " + std::to_string(st.mean.size()));
  RawSeries out = s;
  for (std::size_t r = 0; r < s.rows(); ++r)
    for (std::size_t c = 0; c < s.vars(); ++c)
      out.values[r * s.vars() + c] = (s.at(r, c) - st.mean[c]) / st.std[c];
  return out;
}

/// Windows over one or more runs. A window is identified by its run and the
/// row of its last time step; values are materialised on demand as [v x w].
class WindowedDataset {
 public:
  struct Ref {
    std::size_t run;
    std::size_t end;  // inclusive last row
  };

  WindowedDataset() = default;
  WindowedDataset(std::shared_ptr<const std::vector<RawSeries>> runs, std::size_t w,
                  std::vector<Ref> refs, NormStats stats)
      : runs_(std::move(runs)), w_(w), refs_(std::move(refs)), stats_(std::move(stats)) {}

  std::size_t size() const { return refs_.size(); }
  bool empty() const { return refs_.empty(); }
  std::size_t window_length() const { return w_; }
  std::size_t vars() const { return runs_ && !runs_->empty() ? runs_->front().vars() : 0; }
  const NormStats& stats() const { return stats_; }
  void set_stats(NormStats s) { stats_ = std::move(s); }
  const Ref& ref(std::size_t i) const { return refs_.at(i); }
  const std::vector<RawSeries>& runs() const { return *runs_; }

  std::size_t label(std::size_t i) const {
    const auto& r = refs_.at(i);
    return (*runs_)[r.run].labels[r.end];
  }
  bool has_modes() const { return runs_ && !runs_->empty() && runs_->front().has_modes(); }
  /// Mode tag of the last time step; metadata only, never part of window().
  std::size_t mode(std::size_t i) const {
    const auto& r = refs_.at(i);
    const auto& s = (*runs_)[r.run];
    return s.has_modes() ? s.modes[r.end] : 0;
  }

  std::size_t num_classes() const {
    std::size_t m = 0;
    for (std::size_t i = 0; i < size(); ++i) m = std::max(m, label(i) + 1);
    return m;
  }

  /// Window i as [v x w]: column t is time step end - w + 1 + t.
  Tensor window(std::size_t i) const {
    std::vector<double> buf(vars() * w_);
    fill(i, buf.data());
    return Tensor({vars(), w_}, std::move(buf));
  }

  /// Windows `idx` stacked as [B x v x w].
  Tensor batch(const std::vector<std::size_t>& idx) const {
    if (idx.empty()) throw DataError("batch: no indices");
    const std::size_t per = vars() * w_;
    std::vector<double> buf(idx.size() * per);
    for (std::size_t k = 0; k < idx.size(); ++k) fill(idx[k], buf.data() + k * per);
    return Tensor({idx.size(), vars(), w_}, std::move(buf));
  }

  std::vector<std::size_t> labels(const std::vector<std::size_t>& idx) const {
    std::vector<std::size_t> out(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) out[k] = label(idx[k]);
    return out;
  }

  WindowedDataset subset(const std::vector<std::size_t>& idx) const {
    std::vector<Ref> refs(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) refs[k] = refs_.at(idx[k]);
    return WindowedDataset(runs_, w_, std::move(refs), stats_);
  }

 private:
  void fill(std::size_t i, double* dst) const {
    const auto& r = refs_.at(i);
    const auto& s = (*runs_)[r.run];
    const std::size_t v = s.vars(), start = r.end + 1 - w_;
    for (std::size_t c = 0; c < v; ++c)
      for (std::size_t t = 0; t < w_; ++t) dst[c * w_ + t] = s.values[(start + t) * v + c];
  }

  std::shared_ptr<const std::vector<RawSeries>> runs_;
  std::size_t w_ = 0;
  std::vector<Ref> refs_;
  NormStats stats_;
};

/// Stride-1 windows of length w inside each run; the first w-1 rows of a
/// run start no window and windows never cross runs.
inline WindowedDataset slide_windows(std::vector<RawSeries> runs, std::size_t w,
                                     NormStats stats = {}) {
  if (w == 0) throw DataError("slide_windows: w must be >= 1");
  if (runs.empty()) throw DataError("slide_windows: no series");
  std::vector<WindowedDataset::Ref> refs;
  const std::size_t v = runs.front().vars();
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const auto& s = runs[k];
    if (s.vars() != v)
      throw DataError(s.source + ": has " + std::to_string(s.vars()) + " variables, expected " +
                      std::to_string(v));
    if (s.rows() < w)
      throw DataError(s.source + ": " + std::to_string(s.rows()) +
                      " rows is shorter than the window length " + std::to_string(w));
    if (s.has_modes() != runs.front().has_modes())
      throw DataError(s.source + ": mode column present in some files only");
    for (std::size_t end = w - 1; end < s.rows(); ++end) refs.push_back({k, end});
  }
  auto shared = std::make_shared<const std::vector<RawSeries>>(std::move(runs));
  return WindowedDataset(std::move(shared), w, std::move(refs), std::move(stats));
}

inline WindowedDataset slide_windows(RawSeries series, std::size_t w, NormStats stats = {}) {
  return slide_windows(std::vector<RawSeries>{std::move(series)}, w, std::move(stats));
}

struct SplitSpec {
  double train_frac = 0.8;
  double val_frac = 0.1;
  double test_frac = 0.1;
  std::uint64_t seed = 0;
  std::size_t num_classes = 0;  // when set, every class must appear in every mode

  void validate() const {
    if (train_frac < 0 || val_frac < 0 || test_frac < 0)
      throw ConfigError("split fractions must be non-negative");
    if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
      throw ConfigError("split fractions must sum to 1");
  }
};

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

struct DatasetSplit {
  WindowedDataset train, val, test;
};

/// Per (class, mode) stratum, or per class without mode tags: shuffle, give
/// floor(train_frac * n) to train, and divide the remainder between
/// validation and test in proportion, rounding in favour of validation.
inline SplitIndices stratified_split_indices(const WindowedDataset& ds, const SplitSpec& spec) {
  spec.validate();
  if (ds.empty()) throw DataError("stratified_split: dataset is empty");
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> strata;
  std::map<std::size_t, bool> modes;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::size_t mode = ds.has_modes() ? ds.mode(i) : 0;
    strata[{ds.label(i), mode}].push_back(i);
    modes[mode] = true;
  }
  for (std::size_t c = 0; c < spec.num_classes; ++c)
    for (const auto& [mode, unused] : modes)
      if (!strata.count({c, mode}))
        throw DataError("stratified_split: empty stratum (class " + std::to_string(c) +
                        (ds.has_modes() ? ", mode " + std::to_string(mode) : std::string()) + ")");

  SplitIndices out;
  for (auto& [key, idx] : strata) {
    Rng rng(derive_seed(spec.seed, "split/" + std::to_string(key.first) + "/" +
                                       std::to_string(key.second)));
    rng.shuffle(idx.begin(), idx.end());
    const std::size_t n = idx.size();
    const auto n_train = static_cast<std::size_t>(std::floor(spec.train_frac * n + 1e-9));
    const std::size_t rest = n - n_train;
    const double rest_frac = spec.val_frac + spec.test_frac;
    const std::size_t n_val =
        rest_frac > 0 ? static_cast<std::size_t>(std::ceil(rest * spec.val_frac / rest_frac - 1e-9))
                      : 0;
    out.train.insert(out.train.end(), idx.begin(), idx.begin() + n_train);
    out.val.insert(out.val.end(), idx.begin() + n_train, idx.begin() + n_train + n_val);
    out.test.insert(out.test.end(), idx.begin() + n_train + n_val, idx.end());
  }
  return out;
}

inline DatasetSplit stratified_split(const WindowedDataset& ds, const SplitSpec& spec) {
  auto idx = stratified_split_indices(ds, spec);
  return {ds.subset(idx.train), ds.subset(idx.val), ds.subset(idx.test)};
}

}  // namespace amtfnet
