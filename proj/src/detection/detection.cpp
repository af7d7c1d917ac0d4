// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#include "otr/detection.hpp"

#include <algorithm>

#include "otr/error.hpp"

namespace otr::detection {
namespace {

bool is_local_max(const float* p, std::size_t T, std::size_t t, std::size_t radius) {
  const std::size_t lo = t >= radius ? t - radius : 0;
  const std::size_t hi = std::min(T - 1, t + radius);
  const float v = p[t * kNumClasses];
  for (std::size_t s = lo; s <= hi; ++s) {
    const float w = p[s * kNumClasses];
    if (s < t && w >= v) return false;
    if (s > t && w > v) return false;
  }
  return true;
}

}  // namespace

std::vector<Detection> extract_detections(const FrameProbs& fp, const ExtractOptions& options) {
  if (!(options.theta >= 0.0 && options.theta <= 1.0)) throw ConfigError("extract_detections: theta must be in [0, 1]");
  if (!(fp.fps > 0.0)) throw ConfigError("extract_detections: fps must be > 0");
  if (fp.probs.rank() != 2 || fp.probs.dim(1) != kNumClasses) {
    throw DimensionError("extract_detections: expected probabilities [T x 3], got " + nk::shape_str(fp.probs.shape()));
  }
  const std::size_t T = fp.probs.dim(0);
  const float* p = fp.probs.data().data();
  std::vector<Detection> out;
  for (std::size_t t = 0; t < T; ++t) {
    for (ActionClass cls : kForegroundClasses) {
      const std::size_t c = index_of(cls);
      const float score = p[t * kNumClasses + c];
      if (static_cast<double>(score) < options.theta) continue;
      if (options.nms_radius && !is_local_max(p + c, T, t, *options.nms_radius)) continue;
      out.push_back(Detection{fp.video_id, cls, frame_to_time(t, fp.fps), static_cast<double>(score)});
    }
  }
  return out;
}

}  // namespace otr::detection
