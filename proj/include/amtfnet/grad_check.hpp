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
 * \file grad_check.hpp
 * \brief Analytic vs central-difference gradient comparison.
 */
#pragma once

#include "amtfnet/tensor.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace amtfnet {

using ScalarFn = std::function<Tensor(const std::vector<Tensor>&)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  double tolerance = 0.0;
  bool passed = true;
};

/// Coordinates whose analytic gradient is below `abs_floor` in magnitude are
/// compared by absolute difference; all others by relative difference.
inline GradCheckReport grad_check(const ScalarFn& f, const std::vector<Tensor>& inputs,
                                  double eps = 1e-5, double tol = 1e-4,
                                  double abs_floor = 1e-8) {
  GradCheckReport rep;
  rep.tolerance = tol;

  std::vector<std::vector<double>> analytic;
  {
    for (auto t : inputs) {
      t.set_requires_grad(true);
      t.zero_grad();
    }
    GradTape tape;
    Tensor y = f(inputs);
    tape.backward(y);
    for (const auto& t : inputs) {
      if (t.has_grad())
        analytic.emplace_back(t.grad().begin(), t.grad().end());
      else
        analytic.emplace_back(t.size(), 0.0);
    }
  }

  NoGradGuard no_grad;
  auto eval = [&] { return f(inputs).item(); };
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor t = inputs[k];
    auto x = t.mutable_data();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double orig = x[i];
      x[i] = orig + eps;
      const double up = eval();
      x[i] = orig - eps;
      const double down = eval();
      x[i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[k][i];
      const double diff = std::abs(a - numeric);
      const double err =
          std::abs(a) < abs_floor ? diff : diff / std::max(std::abs(a), std::abs(numeric));
      ++rep.coordinates;
      if (err > rep.max_rel_error || std::isnan(err)) {
        rep.max_rel_error = std::isnan(err) ? INFINITY : err;
        rep.worst_input = k;
        rep.worst_index = i;
        rep.worst_analytic = a;
        rep.worst_numeric = numeric;
      }
    }
  }
  rep.passed = rep.max_rel_error < tol;
  return rep;
}

}  // namespace amtfnet
