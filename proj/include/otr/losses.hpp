// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "otr/numkernel/tape.hpp"
#include "otr/numkernel/tensor.hpp"
#include "otr/types.hpp"

// Training objective: frame-averaged focal loss plus lambda * R, where R is
// one of the duplicate-suppression regularizers below. All log terms inside
// these losses are floored at kLogFloor.
namespace otr::losses {

using nk::Tape;
using nk::Tensor;

inline constexpr float kLogFloor = 1e-12f;

enum class RegKind { None, Entropy, SlidingWindow, FixedWindow };

std::string_view to_string(RegKind kind);
RegKind parse_reg_kind(std::string_view s);  // throws ConfigError

struct LossConfig {
  float gamma = 2.0f;
  std::vector<float> alpha{1.0f, 1.0f, 0.25f};  // take, release, background
  float lambda = 0.01f;
  RegKind reg_kind = RegKind::FixedWindow;
  std::size_t window = 4;

  void validate() const;  // throws ConfigError
  bool operator==(const LossConfig&) const = default;
};

// Per-frame class labels for one clip; only the frame nearest each action end is foreground.
struct FrameTargets {
  std::vector<std::size_t> labels;     // class index per frame
  std::vector<std::size_t> positives;  // frames holding a foreground label, ascending, unique
};

// Labels frames [start_frame, start_frame + num_frames) of a video sampled at `fps`.
// Actions whose end frame falls outside the range are ignored.
FrameTargets make_targets(std::size_t num_frames, double fps, std::span<const GroundTruthAction> actions,
                          std::size_t start_frame = 0);

// mean_t  -alpha[y_t] * (1 - p_t)^gamma * log(p_t),  p_t = probs[t, y_t].
Tensor focal_loss(Tape& tape, const Tensor& probs, const FrameTargets& targets, float gamma,
                  std::span<const float> alpha);

// -sum_{t,c} p log p over all frames.
Tensor entropy_reg(Tape& tape, const Tensor& probs);

// probs [T x C] -> [T] total foreground probability 1 - p(background).
Tensor foreground_prob(Tape& tape, const Tensor& probs);

// sum over frames f of the sum of p_fg over [f - w/2, f + w/2], truncated at the clip edges.
Tensor sliding_window_reg(Tape& tape, const Tensor& p_fg, std::size_t window);

// Same window sum, centred only on the ground-truth frames. Throws ContractError for a frame outside [0, T).
Tensor fixed_window_reg(Tape& tape, const Tensor& p_fg, std::span<const std::size_t> gt_frames,
                        std::size_t window);

// focal + lambda * R(reg_kind); R = 0 for RegKind::None.
Tensor total_loss(Tape& tape, const Tensor& probs, const FrameTargets& targets, const LossConfig& config);

}  // namespace otr::losses
