// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#include "otr/ssm/reference.hpp"

#include <algorithm>
#include <cmath>

#include "otr/error.hpp"

namespace otr::ssm {
namespace {

using Vec = std::vector<double>;

// [rows x k] * [k x n]
Vec matmul(const Vec& a, const Vec& b, std::size_t rows, std::size_t k, std::size_t n) {
  Vec out(rows * n, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < n; ++j) out[r * n + j] += a[r * k + i] * b[i * n + j];
  return out;
}

void add_rows(Vec& x, const Vec& bias) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += bias[i % bias.size()];
}

Vec layer_norm(const Vec& x, const Vec& g, const Vec& b, std::size_t rows, std::size_t cols) {
  Vec y(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * cols;
    double mean = 0.0, var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mean += xr[c];
    mean /= static_cast<double>(cols);
    for (std::size_t c = 0; c < cols; ++c) var += (xr[c] - mean) * (xr[c] - mean);
    var /= static_cast<double>(cols);
    const double inv = 1.0 / std::sqrt(var + 1e-5);
    for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] = (xr[c] - mean) * inv * g[c] + b[c];
  }
  return y;
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }
double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

}  // namespace

ReferenceParams to_reference(const ModelParams& params) {
  ReferenceParams out;
  for (const auto& nt : params.named()) out.emplace_back(nt.tensor.data().begin(), nt.tensor.data().end());
  return out;
}

std::vector<double> forward_reference(const ModelConfig& cfg, const ReferenceParams& p,
                                      std::span<const float> features, std::size_t T) {
  const std::size_t Din = cfg.feature_dim, D = cfg.model_dim, E = cfg.inner_dim(), N = cfg.state_dim;
  const std::size_t K = cfg.conv_kernel, R = cfg.dt_rank(), C = cfg.num_classes;
  if (features.size() != T * Din) throw DimensionError("forward_reference: feature size mismatch");
  if (p.size() != 2 + 14 * cfg.num_layers + 4) throw DimensionError("forward_reference: wrong tensor count");

  std::size_t at = 0;
  auto next = [&]() -> const Vec& { return p[at++]; };
  const Vec x(features.begin(), features.end());
  const Vec& w_in = next();
  Vec h = matmul(x, w_in, T, Din, D);
  add_rows(h, next());

  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    const Vec& g = next();
    const Vec& b = next();
    const Vec u = layer_norm(h, g, b, T, D);
    const Vec signal = matmul(u, next(), T, D, E);
    const Vec gate = matmul(u, next(), T, D, E);
    const Vec& kernel = next();
    const Vec& conv_bias = next();
    Vec xa(T * E);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t e = 0; e < E; ++e) {
        double s = conv_bias[e];
        for (std::size_t k = 0; k < K; ++k) {
          if (t + k + 1 < K) continue;
          s += kernel[k * E + e] * signal[(t + k + 1 - K) * E + e];
        }
        xa[t * E + e] = silu(s);
      }
    }
    const Vec dt_low = matmul(xa, next(), T, E, R);
    Vec dt = matmul(dt_low, next(), T, R, E);
    add_rows(dt, next());
    for (double& v : dt) v = softplus(v);
    const Vec bsel = matmul(xa, next(), T, E, N);
    const Vec csel = matmul(xa, next(), T, E, N);
    const Vec& a_log = next();
    const Vec& d_skip = next();
    Vec state(E * N, 0.0), gated(T * E);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t e = 0; e < E; ++e) {
        double y = d_skip[e] * xa[t * E + e];
        for (std::size_t n = 0; n < N; ++n) {
          double& s = state[e * N + n];
          s = std::exp(-std::exp(a_log[e * N + n]) * dt[t * E + e]) * s + dt[t * E + e] * bsel[t * N + n] * xa[t * E + e];
          y += csel[t * N + n] * s;
        }
        gated[t * E + e] = y * silu(gate[t * E + e]);
      }
    }
    const Vec delta = matmul(gated, next(), T, E, D);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += delta[i];
  }
  const Vec& fg = next();
  const Vec& fb = next();
  const Vec hf = layer_norm(h, fg, fb, T, D);
  Vec logits = matmul(hf, next(), T, D, C);
  add_rows(logits, next());
  return logits;
}

double loss_reference(std::span<const double> logits, const losses::FrameTargets& targets,
                      const losses::LossConfig& config) {
  const std::size_t T = targets.labels.size();
  if (logits.size() != T * kNumClasses) throw DimensionError("loss_reference: logits size mismatch");
  std::vector<double> probs(logits.size());
  for (std::size_t t = 0; t < T; ++t) {
    const double* z = logits.data() + t * kNumClasses;
    const double m = *std::max_element(z, z + kNumClasses);
    double sum = 0.0;
    for (std::size_t c = 0; c < kNumClasses; ++c) sum += probs[t * kNumClasses + c] = std::exp(z[c] - m);
    for (std::size_t c = 0; c < kNumClasses; ++c) probs[t * kNumClasses + c] /= sum;
  }
  double focal = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t y = targets.labels[t];
    const double pt = probs[t * kNumClasses + y];
    focal -= config.alpha[y] * std::pow(1.0 - pt, static_cast<double>(config.gamma)) *
             std::log(std::max(pt, static_cast<double>(losses::kLogFloor)));
  }
  focal /= static_cast<double>(T);
  if (config.reg_kind == losses::RegKind::None || config.lambda == 0.0f) return focal;

  double reg = 0.0;
  auto fg = [&](std::size_t i) { return 1.0 - probs[i * kNumClasses + kBackgroundIndex]; };
  auto window_sum = [&](std::size_t f) {
    const std::size_t half = config.window / 2;
    double s = 0.0;
    for (std::size_t i = f >= half ? f - half : 0; i <= std::min(T - 1, f + half); ++i) s += fg(i);
    return s;
  };
  switch (config.reg_kind) {
    case losses::RegKind::Entropy:
      for (double q : probs) reg -= q * std::log(std::max(q, static_cast<double>(losses::kLogFloor)));
      break;
    case losses::RegKind::SlidingWindow:
      for (std::size_t f = 0; f < T; ++f) reg += window_sum(f);
      break;
    case losses::RegKind::FixedWindow:
      for (std::size_t f : targets.positives) reg += window_sum(f);
      break;
    case losses::RegKind::None: break;
  }
  return focal + static_cast<double>(config.lambda) * reg;
}

}  // namespace otr::ssm
