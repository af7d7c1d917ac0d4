// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "otr/numkernel/tensor.hpp"
#include "otr/types.hpp"

namespace otr::detection {

// Per-frame class probabilities for one video; rows sum to 1.
struct FrameProbs {
  std::string video_id;
  double fps = 4.0;
  nk::Tensor probs;  // [T x 3]
};

struct ExtractOptions {
  double theta = 0.0;
  // Keep only frames that are local maxima of their class probability within
  // +-radius frames; on equal values the earlier frame wins.
  std::optional<std::size_t> nms_radius;
};

// Emits (class, frame / fps, p) for every frame and foreground class with
// p >= theta, sorted by time. Throws ConfigError for theta outside [0, 1] or fps <= 0.
std::vector<Detection> extract_detections(const FrameProbs& fp, const ExtractOptions& options = {});

}  // namespace otr::detection
