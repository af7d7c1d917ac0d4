// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "otr/losses.hpp"
#include "otr/ssm/model.hpp"

// Straight-line double-precision evaluation of the model and the training loss.
// Used as the finite-difference side of the gradient audit and as a check on
// the float forward pass.
namespace otr::ssm {

// One vector per tensor, in ModelParams::named() order.
using ReferenceParams = std::vector<std::vector<double>>;

ReferenceParams to_reference(const ModelParams& params);

// Logits [T x C], row-major. `features` is [T x feature_dim].
std::vector<double> forward_reference(const ModelConfig& config, const ReferenceParams& params,
                                      std::span<const float> features, std::size_t frames);

// softmax over rows of [T x 3] logits, then the configured loss.
double loss_reference(std::span<const double> logits, const losses::FrameTargets& targets,
                      const losses::LossConfig& config);

}  // namespace otr::ssm
