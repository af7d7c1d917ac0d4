// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "otr/data/formats.hpp"
#include "otr/detection.hpp"
#include "otr/ssm/model.hpp"

namespace otr::inference {

struct InferenceMode {
  enum class Kind { Streaming, SlidingWindow };
  Kind kind = Kind::Streaming;
  std::size_t window = 20;  // sliding only
  std::size_t stride = 20;  // sliding only

  static InferenceMode streaming() { return {}; }
  static InferenceMode sliding(std::size_t window, std::size_t stride) {
    return {Kind::SlidingWindow, window, stride};
  }
  // Throws ConfigError for a zero window or stride.
  void validate() const;
  std::string name() const;  // "streaming" or "sliding"
};

// Throws ConfigError.
InferenceMode::Kind parse_mode(std::string_view s);

struct InferenceStats {
  std::size_t steps = 0;  // forward_step invocations
  std::size_t peak_state_bytes = 0;
};

// One frame at a time through a single carried state. Throws DimensionError if
// the feature width does not match the model.
detection::FrameProbs infer_streaming(const ssm::ModelParams& params, const data::FeatureSequence& fs,
                                      InferenceStats* stats = nullptr);

// Windows start at 0, stride, 2*stride, ... until one reaches the end of the video;
// the last may be shorter. The state is reset at every window start. A frame
// covered by several windows takes its probabilities from the window in which it
// sits furthest from the start (the earliest such window).
detection::FrameProbs infer_sliding(const ssm::ModelParams& params, const data::FeatureSequence& fs,
                                    std::size_t window, std::size_t stride, InferenceStats* stats = nullptr);

detection::FrameProbs infer(const ssm::ModelParams& params, const data::FeatureSequence& fs,
                            const InferenceMode& mode, InferenceStats* stats = nullptr);

// Row-wise softmax of streaming logits, shared by both regimes.
void softmax_row(std::span<const float> logits, std::span<float> probs);

struct LatencyReport {
  std::string mode;
  std::size_t frames = 0;
  std::size_t repeats = 0;
  std::size_t steps_per_video = 0;
  double video_seconds_median = 0.0;
  double video_seconds_mean = 0.0;
  double frame_us_mean = 0.0;
  double frame_us_median = 0.0;
  double step_us_p99 = 0.0;
  std::size_t peak_state_bytes = 0;
  // Per-step wall time in microseconds from the median repeat.
  std::vector<double> step_us;
};

// One warm-up pass, then `repeats` timed passes. Throws ConfigError if repeats < 3.
LatencyReport benchmark(const ssm::ModelParams& params, const data::FeatureSequence& fs, const InferenceMode& mode,
                        std::size_t repeats);

// The step timings are left out of the JSON; see write_step_times.
nlohmann::ordered_json to_json(const LatencyReport& report);
void write_step_times(const std::filesystem::path& path, const LatencyReport& report);

}  // namespace otr::inference
