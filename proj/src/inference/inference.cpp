// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#include "otr/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "otr/error.hpp"

namespace otr::inference {
namespace {

using Clock = std::chrono::steady_clock;

void require_width(const ssm::ModelParams& params, const data::FeatureSequence& fs) {
  if (fs.features.rank() != 2 || fs.feature_dim() != params.config.feature_dim) {
    throw DimensionError("inference: video '" + fs.video_id + "' has features " + nk::shape_str(fs.features.shape()) +
                         ", model expects width " + std::to_string(params.config.feature_dim));
  }
}

// Runs frames [begin, end) from a fresh state; rows of `probs` in [write_from, end) are written.
void run_window(const ssm::ModelParams& params, const data::FeatureSequence& fs, std::size_t begin, std::size_t end,
                std::size_t write_from, std::vector<float>& probs, InferenceStats* stats,
                std::vector<double>* step_us) {
  const std::size_t D = fs.feature_dim(), C = params.config.num_classes;
  const auto x = fs.features.data();
  ssm::StreamState state = ssm::reset_state(params.config);
  for (std::size_t t = begin; t < end; ++t) {
    const auto t0 = step_us ? Clock::now() : Clock::time_point{};
    const std::vector<float> logits = ssm::forward_step(params, state, x.subspan(t * D, D));
    if (step_us) step_us->push_back(std::chrono::duration<double, std::micro>(Clock::now() - t0).count());
    if (t >= write_from) softmax_row(logits, std::span<float>(probs).subspan(t * C, C));
  }
  if (stats) {
    stats->steps += end - begin;
    stats->peak_state_bytes = std::max(stats->peak_state_bytes, state.bytes());
  }
}

detection::FrameProbs wrap(const data::FeatureSequence& fs, std::size_t C, std::vector<float> probs) {
  detection::FrameProbs out;
  out.video_id = fs.video_id;
  out.fps = fs.fps;
  out.probs = nk::Tensor({fs.num_frames(), C}, std::move(probs));
  return out;
}

detection::FrameProbs run_sliding(const ssm::ModelParams& params, const data::FeatureSequence& fs,
                                  std::size_t window, std::size_t stride, InferenceStats* stats,
                                  std::vector<double>* step_us) {
  require_width(params, fs);
  const std::size_t T = fs.num_frames(), C = params.config.num_classes;
  std::vector<float> probs(T * C, 0.0f);
  std::size_t written = 0;
  for (std::size_t start = 0;; start += stride) {
    const std::size_t end = std::min(T, start + window);
    run_window(params, fs, start, end, written, probs, stats, step_us);
    written = std::max(written, end);
    if (end == T) break;
  }
  return wrap(fs, C, std::move(probs));
}

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const std::size_t i = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()))) - 1;
  return v[std::min(i, v.size() - 1)];
}

}  // namespace

void InferenceMode::validate() const {
  if (kind == Kind::SlidingWindow && (window < 1 || stride < 1)) {
    throw ConfigError("sliding window needs window >= 1 and stride >= 1");
  }
}

std::string InferenceMode::name() const { return kind == Kind::Streaming ? "streaming" : "sliding"; }

InferenceMode::Kind parse_mode(std::string_view s) {
  if (s == "streaming") return InferenceMode::Kind::Streaming;
  if (s == "sliding") return InferenceMode::Kind::SlidingWindow;
  throw ConfigError("unknown inference mode '" + std::string(s) + "' (expected streaming or sliding)");
}

void softmax_row(std::span<const float> logits, std::span<float> probs) {
  const float m = *std::max_element(logits.begin(), logits.end());
  float z = 0.0f;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    probs[c] = std::exp(logits[c] - m);
    z += probs[c];
  }
  for (std::size_t c = 0; c < logits.size(); ++c) probs[c] /= z;
}

detection::FrameProbs infer_streaming(const ssm::ModelParams& params, const data::FeatureSequence& fs,
                                      InferenceStats* stats) {
  require_width(params, fs);
  const std::size_t T = fs.num_frames(), C = params.config.num_classes;
  std::vector<float> probs(T * C, 0.0f);
  run_window(params, fs, 0, T, 0, probs, stats, nullptr);
  return wrap(fs, C, std::move(probs));
}

detection::FrameProbs infer_sliding(const ssm::ModelParams& params, const data::FeatureSequence& fs,
                                    std::size_t window, std::size_t stride, InferenceStats* stats) {
  InferenceMode::sliding(window, stride).validate();
  return run_sliding(params, fs, window, stride, stats, nullptr);
}

detection::FrameProbs infer(const ssm::ModelParams& params, const data::FeatureSequence& fs,
                            const InferenceMode& mode, InferenceStats* stats) {
  mode.validate();
  if (mode.kind == InferenceMode::Kind::Streaming) return infer_streaming(params, fs, stats);
  return infer_sliding(params, fs, mode.window, mode.stride, stats);
}

LatencyReport benchmark(const ssm::ModelParams& params, const data::FeatureSequence& fs, const InferenceMode& mode,
                        std::size_t repeats) {
  if (repeats < 3) throw ConfigError("benchmark: repeats must be >= 3");
  mode.validate();
  require_width(params, fs);
  const std::size_t T = fs.num_frames();
  const std::size_t window = mode.kind == InferenceMode::Kind::Streaming ? T : mode.window;
  const std::size_t stride = mode.kind == InferenceMode::Kind::Streaming ? T : mode.stride;

  LatencyReport r;
  r.mode = mode.name();
  r.frames = T;
  r.repeats = repeats;
  {
    InferenceStats warm;
    run_sliding(params, fs, window, stride, &warm, nullptr);
    r.steps_per_video = warm.steps;
    r.peak_state_bytes = warm.peak_state_bytes;
  }
  std::vector<double> video_s;
  std::vector<std::vector<double>> steps(repeats);
  for (std::size_t i = 0; i < repeats; ++i) {
    steps[i].reserve(r.steps_per_video);
    InferenceStats st;
    const auto t0 = Clock::now();
    run_sliding(params, fs, window, stride, &st, &steps[i]);
    video_s.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
    r.peak_state_bytes = std::max(r.peak_state_bytes, st.peak_state_bytes);
  }
  r.video_seconds_mean = std::accumulate(video_s.begin(), video_s.end(), 0.0) / static_cast<double>(repeats);
  r.video_seconds_median = percentile(video_s, 0.5);

  std::vector<std::size_t> order(repeats);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return video_s[a] < video_s[b]; });
  r.step_us = std::move(steps[order[(repeats - 1) / 2]]);

  // Per-frame time is video time over frames, so re-processed frames count against sliding.
  std::vector<double> per_frame;
  for (double s : video_s) per_frame.push_back(1e6 * s / static_cast<double>(T));
  r.frame_us_mean = std::accumulate(per_frame.begin(), per_frame.end(), 0.0) / static_cast<double>(repeats);
  r.frame_us_median = percentile(per_frame, 0.5);
  r.step_us_p99 = percentile(r.step_us, 0.99);
  return r;
}

nlohmann::ordered_json to_json(const LatencyReport& r) {
  nlohmann::ordered_json j;
  j["mode"] = r.mode;
  j["frames"] = r.frames;
  j["repeats"] = r.repeats;
  j["steps_per_video"] = r.steps_per_video;
  j["video_seconds_median"] = r.video_seconds_median;
  j["video_seconds_mean"] = r.video_seconds_mean;
  j["frame_us_mean"] = r.frame_us_mean;
  j["frame_us_median"] = r.frame_us_median;
  j["step_us_p99"] = r.step_us_p99;
  j["peak_state_bytes"] = r.peak_state_bytes;
  return j;
}

void write_step_times(const std::filesystem::path& path, const LatencyReport& report) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << "step,us\n";
  for (std::size_t i = 0; i < report.step_us.size(); ++i) f << i << ',' << report.step_us[i] << '\n';
}

}  // namespace otr::inference
