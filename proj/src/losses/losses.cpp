// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#include "otr/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "otr/error.hpp"
#include "otr/numkernel/ops.hpp"

namespace otr::losses {
namespace {

float floored_log(float p) { return std::log(std::max(p, kLogFloor)); }

void require_probs(std::string_view op, const Tensor& probs) {
  if (probs.rank() != 2 || probs.dim(1) != kNumClasses) {
    throw DimensionError(std::string(op) + ": expected probabilities [T x 3], got " + nk::shape_str(probs.shape()));
  }
}

// Number of windows [f - half, f + half] (f over `centers`) covering each frame.
std::vector<float> coverage(std::size_t T, std::span<const std::size_t> centers, std::size_t window) {
  const std::size_t half = window / 2;
  std::vector<float> count(T, 0.0f);
  for (std::size_t f : centers) {
    const std::size_t lo = f >= half ? f - half : 0;
    const std::size_t hi = std::min(T - 1, f + half);
    for (std::size_t i = lo; i <= hi; ++i) count[i] += 1.0f;
  }
  return count;
}

// Weighted sum  sum_i w_i * p_i  as a taped scalar.
Tensor weighted_sum(Tape& tape, std::string op, const Tensor& p, std::vector<float> weights) {
  float acc = 0.0f;
  const auto ps = p.data();
  for (std::size_t i = 0; i < ps.size(); ++i) acc += weights[i] * ps[i];
  Tensor out({}, {acc}, p.requires_grad());
  nk::check_finite(op, out);
  if (out.requires_grad()) {
    tape.record(std::move(op), {p}, out, [weights = std::move(weights)](const Tape::Node& node) {
      const float g = node.output.grad()[0];
      auto gp = node.inputs[0].grad_mut();
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g * weights[i];
    });
  }
  return out;
}

}  // namespace

std::string_view to_string(RegKind kind) {
  switch (kind) {
    case RegKind::None: return "none";
    case RegKind::Entropy: return "entropy";
    case RegKind::SlidingWindow: return "sliding_window";
    case RegKind::FixedWindow: return "fixed_window";
  }
  return "?";
}

RegKind parse_reg_kind(std::string_view s) {
  for (RegKind k : {RegKind::None, RegKind::Entropy, RegKind::SlidingWindow, RegKind::FixedWindow}) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError("unknown regularizer '" + std::string(s) +
                    "' (expected none, entropy, sliding_window or fixed_window)");
}

void LossConfig::validate() const {
  if (!(gamma >= 0.0f)) throw ConfigError("loss config: gamma must be >= 0");
  if (alpha.size() != kNumClasses) throw ConfigError("loss config: alpha must have 3 entries");
  for (float a : alpha) {
    if (!(a > 0.0f)) throw ConfigError("loss config: alpha entries must be > 0");
  }
  if (!(lambda >= 0.0f)) throw ConfigError("loss config: lambda must be >= 0");
  if (window < 1) throw ConfigError("loss config: window must be >= 1");
}

FrameTargets make_targets(std::size_t num_frames, double fps, std::span<const GroundTruthAction> actions,
                          std::size_t start_frame) {
  FrameTargets t;
  t.labels.assign(num_frames, kBackgroundIndex);
  for (const auto& a : actions) {
    const std::int64_t f = time_to_frame(a.end_time, fps) - static_cast<std::int64_t>(start_frame);
    if (f < 0 || f >= static_cast<std::int64_t>(num_frames)) continue;
    t.labels[static_cast<std::size_t>(f)] = index_of(a.cls);
  }
  for (std::size_t i = 0; i < num_frames; ++i) {
    if (t.labels[i] != kBackgroundIndex) t.positives.push_back(i);
  }
  return t;
}

Tensor focal_loss(Tape& tape, const Tensor& probs, const FrameTargets& targets, float gamma,
                  std::span<const float> alpha) {
  require_probs("focal_loss", probs);
  if (gamma < 0.0f) throw ConfigError("focal_loss: gamma must be >= 0");
  if (alpha.size() != kNumClasses) throw ConfigError("focal_loss: alpha must have 3 entries");
  const std::size_t T = probs.dim(0);
  if (targets.labels.size() != T) {
    throw DimensionError("focal_loss: " + std::to_string(targets.labels.size()) + " targets for " +
                         std::to_string(T) + " frames");
  }
  const auto ps = probs.data();
  const float inv_t = 1.0f / static_cast<float>(T);
  float acc = 0.0f;
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t y = targets.labels[t];
    const float p = ps[t * kNumClasses + y];
    acc += -alpha[y] * std::pow(1.0f - p, gamma) * floored_log(p);
  }
  Tensor out({}, {acc * inv_t}, probs.requires_grad());
  nk::check_finite("focal_loss", out);
  if (out.requires_grad()) {
    std::vector<float> a(alpha.begin(), alpha.end());
    tape.record("focal_loss", {probs}, out,
                [labels = targets.labels, gamma, a = std::move(a), inv_t](const Tape::Node& node) {
                  const float g = node.output.grad()[0] * inv_t;
                  const auto ps = node.inputs[0].data();
                  auto gp = node.inputs[0].grad_mut();
                  for (std::size_t t = 0; t < labels.size(); ++t) {
                    const std::size_t y = labels[t];
                    const float p = ps[t * kNumClasses + y];
                    const float q = 1.0f - p;
                    // d/dp of (1-p)^gamma * log p
                    float d = p > kLogFloor ? std::pow(q, gamma) / p : 0.0f;
                    if (gamma > 0.0f && q > 0.0f) d -= gamma * std::pow(q, gamma - 1.0f) * floored_log(p);
                    gp[t * kNumClasses + y] += -a[y] * d * g;
                  }
                });
  }
  return out;
}

Tensor entropy_reg(Tape& tape, const Tensor& probs) {
  require_probs("entropy_reg", probs);
  float acc = 0.0f;
  for (float p : probs.data()) acc -= p * floored_log(p);
  Tensor out({}, {acc}, probs.requires_grad());
  nk::check_finite("entropy_reg", out);
  if (out.requires_grad()) {
    tape.record("entropy_reg", {probs}, out, [](const Tape::Node& node) {
      const float g = node.output.grad()[0];
      const auto ps = node.inputs[0].data();
      auto gp = node.inputs[0].grad_mut();
      for (std::size_t i = 0; i < ps.size(); ++i) {
        const float d = ps[i] > kLogFloor ? std::log(ps[i]) + 1.0f : std::log(kLogFloor);
        gp[i] -= g * d;
      }
    });
  }
  return out;
}

Tensor foreground_prob(Tape& tape, const Tensor& probs) {
  require_probs("foreground_prob", probs);
  const std::size_t T = probs.dim(0);
  std::vector<float> fg(T);
  for (std::size_t t = 0; t < T; ++t) fg[t] = 1.0f - probs.data()[t * kNumClasses + kBackgroundIndex];
  Tensor out({T}, std::move(fg), probs.requires_grad());
  if (out.requires_grad()) {
    tape.record("foreground_prob", {probs}, out, [T](const Tape::Node& node) {
      const auto g = node.output.grad();
      auto gp = node.inputs[0].grad_mut();
      for (std::size_t t = 0; t < T; ++t) gp[t * kNumClasses + kBackgroundIndex] -= g[t];
    });
  }
  return out;
}

Tensor sliding_window_reg(Tape& tape, const Tensor& p_fg, std::size_t window) {
  if (p_fg.rank() != 1) throw DimensionError("sliding_window_reg: expected [T], got " + nk::shape_str(p_fg.shape()));
  if (window < 1) throw ConfigError("sliding_window_reg: window must be >= 1");
  const std::size_t T = p_fg.dim(0);
  std::vector<std::size_t> all(T);
  for (std::size_t i = 0; i < T; ++i) all[i] = i;
  return weighted_sum(tape, "sliding_window_reg", p_fg, coverage(T, all, window));
}

Tensor fixed_window_reg(Tape& tape, const Tensor& p_fg, std::span<const std::size_t> gt_frames,
                        std::size_t window) {
  if (p_fg.rank() != 1) throw DimensionError("fixed_window_reg: expected [T], got " + nk::shape_str(p_fg.shape()));
  if (window < 1) throw ConfigError("fixed_window_reg: window must be >= 1");
  const std::size_t T = p_fg.dim(0);
  for (std::size_t g : gt_frames) {
    if (g >= T) {
      throw ContractError("fixed_window_reg: ground-truth frame " + std::to_string(g) + " outside [0, " +
                          std::to_string(T) + ")");
    }
  }
  return weighted_sum(tape, "fixed_window_reg", p_fg, coverage(T, gt_frames, window));
}

Tensor total_loss(Tape& tape, const Tensor& probs, const FrameTargets& targets, const LossConfig& config) {
  Tensor focal = focal_loss(tape, probs, targets, config.gamma, config.alpha);
  if (config.reg_kind == RegKind::None || config.lambda == 0.0f) return focal;
  Tensor reg;
  switch (config.reg_kind) {
    case RegKind::Entropy: reg = entropy_reg(tape, probs); break;
    case RegKind::SlidingWindow: reg = sliding_window_reg(tape, foreground_prob(tape, probs), config.window); break;
    case RegKind::FixedWindow:
      reg = fixed_window_reg(tape, foreground_prob(tape, probs), targets.positives, config.window);
      break;
    case RegKind::None: break;
  }
  return nk::add(tape, focal, nk::scale(tape, reg, config.lambda));
}

}  // namespace otr::losses
