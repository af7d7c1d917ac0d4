// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "otr/data/formats.hpp"
#include "otr/losses.hpp"

namespace otr::data {

// A fixed-length training window cut from one video.
struct Clip {
  std::string video_id;
  std::size_t start_frame = 0;
  nk::Tensor features;            // [T_clip x D]
  losses::FrameTargets targets;   // clip-local; targets.positives are the ground-truth end frames
};

// Clips start at 0, stride, 2*stride, ... while a full clip fits, so a video of T frames
// yields floor((T - clip_len) / stride) + 1 clips (none if T < clip_len).
// `actions` may include other videos; only those matching fs.video_id are used.
// Throws ConfigError unless 1 <= stride <= clip_len.
std::vector<Clip> chunk_video(const FeatureSequence& fs, std::span<const GroundTruthAction> actions,
                              std::size_t clip_len, std::size_t stride);

std::vector<Clip> chunk_dataset(const Dataset& ds, std::size_t clip_len, std::size_t stride);

}  // namespace otr::data
