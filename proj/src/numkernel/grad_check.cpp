// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#include "otr/numkernel/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace otr::nk {

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.rel_error);
  return worst;
}

GradCheckReport compare_gradients(const std::vector<NamedTensor>& params, const NumericFn& numeric,
                                  const GradCheckOptions& options) {
  std::mt19937_64 rng(options.seed);
  GradCheckReport report;
  report.tolerance = options.tolerance;
  for (std::size_t ti = 0; ti < params.size(); ++ti) {
    const Tensor& t = params[ti].tensor;
    const std::size_t n = t.size();
    std::vector<float> analytic(n, 0.0f);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (options.max_entries_per_tensor > 0 && n > options.max_entries_per_tensor) {
      const auto largest = std::max_element(analytic.begin(), analytic.end(),
                                            [](float a, float b) { return std::fabs(a) < std::fabs(b); }) -
                           analytic.begin();
      std::swap(idx[0], idx[static_cast<std::size_t>(largest)]);
      for (std::size_t i = 1; i < options.max_entries_per_tensor; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
      }
      idx.resize(options.max_entries_per_tensor);
    }
    GradCheckEntry entry;
    entry.name = params[ti].name;
    double scale = options.abs_floor;
    for (std::size_t i : idx) {
      const double num = numeric(ti, i);
      const double diff = std::fabs(num - static_cast<double>(analytic[i]));
      scale = std::max({scale, std::fabs(num), std::fabs(static_cast<double>(analytic[i]))});
      entry.max_abs_error = std::max(entry.max_abs_error, diff);
      ++entry.checked;
    }
    entry.rel_error = entry.max_abs_error / scale;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

GradCheckReport grad_check(const ScalarFn& f, const std::vector<NamedTensor>& params,
                           const GradCheckOptions& options) {
  for (const auto& p : params) p.tensor.zero_grad();
  {
    Tape tape;
    Tensor loss = f(tape);
    tape.backward(loss);
  }
  return compare_gradients(
      params,
      [&](std::size_t ti, std::size_t i) {
        Tensor t = params[ti].tensor;
        auto values = t.mutable_data();
        const float saved = values[i];
        const float plus = saved + options.step;
        const float minus = saved - options.step;
        values[i] = plus;
        Tape tp;
        const double up = f(tp).item();
        values[i] = minus;
        Tape tm;
        const double down = f(tm).item();
        values[i] = saved;
        // Divide by the perturbation actually applied after rounding to float.
        return (up - down) / (static_cast<double>(plus) - static_cast<double>(minus));
      },
      options);
}

}  // namespace otr::nk
