// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "otr/data/formats.hpp"
#include "otr/types.hpp"

namespace otr::data {

// Event-stream generator. Actions arrive as a renewal process (exponential idle
// gap, uniform duration in [d/2, 3d/2]) and never overlap one another. Each action
// adds a ramp on its class's feature dims that climbs to `amplitude` on the end
// frame and drops back to zero right after it.
struct SynthSpec {
  std::size_t num_videos = 10;
  std::size_t frames_per_video = 2400;
  std::size_t feature_dim = 32;
  double fps = 4.0;
  double actions_per_minute = 4.0;
  double mean_duration = 8.0;  // frames
  float amplitude = 1.0f;
  float noise_sigma = 0.5f;
  // Decoy ramps per minute: they rise like an action but stop short of the peak
  // and fade out instead of dropping.
  double distractors_per_minute = 2.0;
  std::uint64_t seed = 0;
  std::string id_prefix = "vid";

  // Throws ConfigError.
  void validate() const;
  // Inclusive duration bounds in frames.
  std::size_t min_duration() const;
  std::size_t max_duration() const;
  // Expected action arrival rate per frame.
  double rate_per_frame() const;

  bool operator==(const SynthSpec&) const = default;
};

// Feature dims [0, dims_per_class) carry take ramps, the next block release ramps.
std::size_t dims_per_class(std::size_t feature_dim);

// Video ids are `<prefix><index>` zero-padded to 4 digits.
Dataset generate_synthetic(const SynthSpec& spec);

}  // namespace otr::data
