// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#include "otr/data/clips.hpp"

#include <algorithm>

#include "otr/error.hpp"

namespace otr::data {

std::vector<Clip> chunk_video(const FeatureSequence& fs, std::span<const GroundTruthAction> actions,
                              std::size_t clip_len, std::size_t stride) {
  if (clip_len < 1) throw ConfigError("chunk_video: clip length must be >= 1");
  if (stride < 1 || stride > clip_len) throw ConfigError("chunk_video: stride must be in [1, clip length]");
  std::vector<GroundTruthAction> mine;
  for (const auto& a : actions) {
    if (a.video_id == fs.video_id) mine.push_back(a);
  }
  const std::size_t T = fs.num_frames(), D = fs.feature_dim();
  std::vector<Clip> out;
  if (T < clip_len) return out;
  const auto src = fs.features.data();
  for (std::size_t start = 0; start + clip_len <= T; start += stride) {
    Clip c;
    c.video_id = fs.video_id;
    c.start_frame = start;
    std::vector<float> buf(src.begin() + static_cast<std::ptrdiff_t>(start * D),
                           src.begin() + static_cast<std::ptrdiff_t>((start + clip_len) * D));
    c.features = nk::Tensor({clip_len, D}, std::move(buf));
    c.targets = losses::make_targets(clip_len, fs.fps, mine, start);
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<Clip> chunk_dataset(const Dataset& ds, std::size_t clip_len, std::size_t stride) {
  std::vector<Clip> out;
  for (const auto& v : ds.videos) {
    auto clips = chunk_video(v, ds.actions, clip_len, stride);
    std::move(clips.begin(), clips.end(), std::back_inserter(out));
  }
  return out;
}

}  // namespace otr::data
