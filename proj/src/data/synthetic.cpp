// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#include "otr/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "otr/error.hpp"

namespace otr::data {

std::size_t SynthSpec::min_duration() const {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(mean_duration / 2.0)));
}

std::size_t SynthSpec::max_duration() const {
  return std::max(min_duration(), static_cast<std::size_t>(std::floor(1.5 * mean_duration)));
}

double SynthSpec::rate_per_frame() const { return actions_per_minute / (60.0 * fps); }

void SynthSpec::validate() const {
  if (num_videos < 1) throw ConfigError("synthetic: num_videos must be >= 1");
  if (feature_dim < 2) throw ConfigError("synthetic: feature_dim must be >= 2");
  if (!(fps > 0.0) || !std::isfinite(fps)) throw ConfigError("synthetic: fps must be > 0");
  if (!(actions_per_minute > 0.0)) throw ConfigError("synthetic: action rate must be > 0");
  if (!(mean_duration >= 1.0)) throw ConfigError("synthetic: mean duration must be >= 1 frame");
  if (!(noise_sigma >= 0.0f) || !std::isfinite(amplitude)) throw ConfigError("synthetic: bad noise or amplitude");
  if (!(distractors_per_minute >= 0.0)) throw ConfigError("synthetic: distractor rate must be >= 0");
  if (frames_per_video < max_duration()) {
    throw ConfigError("synthetic: frames_per_video " + std::to_string(frames_per_video) +
                      " cannot hold an action of up to " + std::to_string(max_duration()) + " frames");
  }
  if (1.0 / rate_per_frame() <= mean_duration) {
    throw ConfigError("synthetic: action rate leaves no idle time between actions of mean duration " +
                      std::to_string(mean_duration));
  }
}

std::size_t dims_per_class(std::size_t feature_dim) { return std::max<std::size_t>(1, feature_dim / 4); }

Dataset generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const std::size_t T = spec.frames_per_video, D = spec.feature_dim, K = dims_per_class(D);
  const double mean_gap = 1.0 / spec.rate_per_frame() - spec.mean_duration;
  std::exponential_distribution<double> gap_dist(1.0 / mean_gap);
  std::uniform_int_distribution<std::size_t> dur_dist(spec.min_duration(), spec.max_duration());
  std::uniform_int_distribution<int> class_dist(0, 1);
  std::normal_distribution<float> noise(0.0f, 1.0f);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double distractor_rate = spec.distractors_per_minute / (60.0 * spec.fps);

  Dataset ds;
  for (std::size_t v = 0; v < spec.num_videos; ++v) {
    char id[32];
    std::snprintf(id, sizeof id, "%04zu", v);
    FeatureSequence seq;
    seq.video_id = spec.id_prefix + id;
    seq.fps = spec.fps;
    std::vector<float> x(T * D, 0.0f);
    auto add_on_class = [&](int cls, std::size_t t, float value) {
      for (std::size_t k = 0; k < K; ++k) x[t * D + static_cast<std::size_t>(cls) * K + k] += value;
    };

    double cursor = gap_dist(rng);
    while (true) {
      const std::size_t start = static_cast<std::size_t>(std::floor(cursor));
      const std::size_t dur = dur_dist(rng);
      const int cls = class_dist(rng);
      if (start + dur > T) break;
      const std::size_t end = start + dur - 1;
      for (std::size_t j = 0; j < dur; ++j) {
        add_on_class(cls, start + j, spec.amplitude * static_cast<float>(j + 1) / static_cast<float>(dur));
      }
      ds.actions.push_back(
          GroundTruthAction{seq.video_id, kForegroundClasses[static_cast<std::size_t>(cls)], frame_to_time(end, spec.fps)});
      cursor = static_cast<double>(end + 1) + gap_dist(rng);
    }

    if (distractor_rate > 0.0) {
      std::exponential_distribution<double> decoy_gap(distractor_rate);
      for (double c = decoy_gap(rng); c < static_cast<double>(T); c += decoy_gap(rng)) {
        const std::size_t start = static_cast<std::size_t>(c);
        const std::size_t dur = dur_dist(rng);
        const int cls = class_dist(rng);
        const float peak = spec.amplitude * static_cast<float>(0.4 + 0.4 * unit(rng));
        for (std::size_t j = 0; j < 2 * dur && start + j < T; ++j) {
          const float ramp = j < dur ? static_cast<float>(j + 1) / static_cast<float>(dur)
                                     : static_cast<float>(2 * dur - j) / static_cast<float>(dur + 1);
          add_on_class(cls, start + j, peak * ramp);
        }
      }
    }

    if (spec.noise_sigma > 0.0f) {
      for (auto& val : x) val += spec.noise_sigma * noise(rng);
    }
    seq.features = nk::Tensor({T, D}, std::move(x));
    ds.videos.push_back(std::move(seq));
  }
  return ds;
}

}  // namespace otr::data
