// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "otr/numkernel/tape.hpp"
#include "otr/numkernel/tensor.hpp"

namespace otr::nk {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct GradCheckOptions {
  float step = 1e-3f;
  double tolerance = 1e-2;
  // 0 checks every entry; otherwise this many entries per tensor, always
  // including the largest-magnitude autodiff gradient.
  std::size_t max_entries_per_tensor = 0;
  // Denominator floor for the relative error of an all-but-zero gradient.
  double abs_floor = 1e-6;
  std::uint64_t seed = 0;
};

struct GradCheckEntry {
  std::string name;
  std::size_t checked = 0;
  double max_abs_error = 0.0;
  // max |autodiff - fd| / max(max |fd|, max |autodiff|, abs_floor) over checked entries.
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;

  double max_rel_error() const;
  bool passed() const { return max_rel_error() < tolerance; }
};

// Numeric derivative of the loss with respect to entry `index` of params[tensor].
using NumericFn = std::function<double(std::size_t tensor, std::size_t index)>;

// Compares the grad buffers of `params` against `numeric`, entry by entry,
// sampling entries as described in GradCheckOptions.
GradCheckReport compare_gradients(const std::vector<NamedTensor>& params, const NumericFn& numeric,
                                  const GradCheckOptions& options);

// Builds a fresh tape per evaluation and returns the scalar loss.
using ScalarFn = std::function<Tensor(Tape&)>;

// Compares reverse-mode gradients of `f` against central differences with
// step `options.step`. Parameter values are restored afterwards; their grad
// buffers are left holding the autodiff gradient.
GradCheckReport grad_check(const ScalarFn& f, const std::vector<NamedTensor>& params,
                           const GradCheckOptions& options = {});

}  // namespace otr::nk
