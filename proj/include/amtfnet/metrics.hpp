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
 * \file metrics.hpp
 * \brief Confusion matrix and the diagnosis metrics derived from it:
 * per-class FDR (recall), FPR and F1, plus Micro-F1 and Macro-F1.
 *
 * A ratio whose denominator is zero is reported as 0. Such a class still
 * counts in the Macro-F1 average.
 */
#pragma once

#include "amtfnet/json_util.hpp"

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace amtfnet {

/// counts(r, c): samples of real class r predicted as class c.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t num_classes)
      : L_(num_classes), counts_(num_classes * num_classes, 0) {
    if (num_classes < 2) throw std::invalid_argument("confusion matrix needs >= 2 classes");
  }

  std::size_t num_classes() const { return L_; }
  std::uint64_t at(std::size_t real, std::size_t pred) const { return counts_.at(real * L_ + pred); }

  void add(std::size_t real, std::size_t pred, std::uint64_t n = 1) {
    if (real >= L_ || pred >= L_)
      throw std::out_of_range("confusion matrix: class index outside [0, " + std::to_string(L_) + ")");
    counts_[real * L_ + pred] += n;
  }

  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (auto c : counts_) s += c;
    return s;
  }
  std::uint64_t tp(std::size_t l) const { return at(l, l); }
  std::uint64_t fn(std::size_t l) const { return row_sum(l) - tp(l); }
  std::uint64_t fp(std::size_t l) const { return col_sum(l) - tp(l); }
  std::uint64_t tn(std::size_t l) const { return total() - tp(l) - fn(l) - fp(l); }

  Json to_json() const {
    Json rows = Json::array();
    for (std::size_t r = 0; r < L_; ++r) {
      Json row = Json::array();
      for (std::size_t c = 0; c < L_; ++c) row.push_back(at(r, c));
      rows.push_back(row);
    }
    return rows;
  }

  static ConfusionMatrix from_json(const Json& j) {
    if (!j.is_array()) throw ConfigError("confusion matrix must be an array of rows");
    ConfusionMatrix cm(j.size());
    for (std::size_t r = 0; r < j.size(); ++r) {
      if (!j[r].is_array() || j[r].size() != j.size())
        throw ConfigError("confusion matrix must be square");
      for (std::size_t c = 0; c < j.size(); ++c) cm.add(r, c, j[r][c].get<std::uint64_t>());
    }
    return cm;
  }

 private:
  std::uint64_t row_sum(std::size_t r) const {
    std::uint64_t s = 0;
    for (std::size_t c = 0; c < L_; ++c) s += at(r, c);
    return s;
  }
  std::uint64_t col_sum(std::size_t c) const {
    std::uint64_t s = 0;
    for (std::size_t r = 0; r < L_; ++r) s += at(r, c);
    return s;
  }

  std::size_t L_ = 0;
  std::vector<std::uint64_t> counts_;
};

inline double safe_ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

inline double f1_score(double precision, double recall) {
  return safe_ratio(2.0 * precision * recall, precision + recall);
}

struct ClassMetrics {
  double fdr = 0.0;  // TP / (TP + FN)
  double fpr = 0.0;  // FP / (FP + TN)
  double precision = 0.0;
  double f1 = 0.0;
};

struct EvalReport {
  ConfusionMatrix confusion;
  std::vector<ClassMetrics> per_class;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  double mean_fdr = 0.0;
  double mean_fpr = 0.0;

  Json to_json() const {
    Json classes = Json::array();
    for (std::size_t l = 0; l < per_class.size(); ++l) {
      const auto& m = per_class[l];
      classes.push_back({{"class", l},
                         {"fdr", m.fdr},
                         {"fpr", m.fpr},
                         {"precision", m.precision},
                         {"f1", m.f1}});
    }
    return Json{{"samples", confusion.total()},
                {"micro_f1", micro_f1},
                {"macro_f1", macro_f1},
                {"mean_fdr", mean_fdr},
                {"mean_fpr", mean_fpr},
                {"per_class", classes},
                {"confusion_matrix", confusion.to_json()}};
  }
};

inline EvalReport compute_metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw std::invalid_argument("metrics: empty confusion matrix");
  EvalReport rep;
  rep.confusion = cm;
  const std::size_t L = cm.num_classes();
  double tp_sum = 0, fp_sum = 0, fn_sum = 0;
  for (std::size_t l = 0; l < L; ++l) {
    const double tp = static_cast<double>(cm.tp(l)), fp = static_cast<double>(cm.fp(l));
    const double fn = static_cast<double>(cm.fn(l)), tn = static_cast<double>(cm.tn(l));
    ClassMetrics m;
    m.fdr = safe_ratio(tp, tp + fn);
    m.fpr = safe_ratio(fp, fp + tn);
    m.precision = safe_ratio(tp, tp + fp);
    m.f1 = f1_score(m.precision, m.fdr);
    rep.per_class.push_back(m);
    tp_sum += tp;
    fp_sum += fp;
    fn_sum += fn;
    rep.macro_f1 += m.f1;
    rep.mean_fdr += m.fdr;
    rep.mean_fpr += m.fpr;
  }
  rep.macro_f1 /= static_cast<double>(L);
  rep.mean_fdr /= static_cast<double>(L);
  rep.mean_fpr /= static_cast<double>(L);
  rep.micro_f1 = f1_score(safe_ratio(tp_sum, tp_sum + fp_sum), safe_ratio(tp_sum, tp_sum + fn_sum));
  return rep;
}

/// Per-class table: class,FDR,FPR,F1 with one row per class.
inline void write_class_csv(std::ostream& out, const EvalReport& rep) {
  out << "class,FDR,FPR,F1\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t l = 0; l < rep.per_class.size(); ++l) {
    const auto& m = rep.per_class[l];
    out << l << ',' << m.fdr << ',' << m.fpr << ',' << m.f1 << '\n';
  }
}

inline void write_class_csv(const std::string& path, const EvalReport& rep) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_class_csv(out, rep);
}

}  // namespace amtfnet
