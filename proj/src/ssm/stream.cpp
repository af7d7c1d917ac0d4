// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "otr/error.hpp"
#include "otr/numkernel/scalar.hpp"
#include "otr/ssm/model.hpp"

namespace otr::ssm {
namespace {

// y[j] = sum_i x[i] * w[i, j]  (+ bias[j] if given); w is [in x out] row-major.
void vec_mat(std::span<const float> x, const Tensor& w, std::span<float> y, const Tensor* bias = nullptr) {
  const std::size_t in = w.dim(0), out = w.dim(1);
  const float* __restrict pw = w.data().data();
  float* __restrict py = y.data();
  std::fill(y.begin(), y.end(), 0.0f);
  for (std::size_t i = 0; i < in; ++i) {
    const float xi = x[i];
    const float* __restrict wi = pw + i * out;
    for (std::size_t j = 0; j < out; ++j) py[j] += xi * wi[j];
  }
  if (bias) {
    const auto b = bias->data();
    for (std::size_t j = 0; j < out; ++j) y[j] += b[j];
  }
}

void layer_norm_vec(std::span<const float> x, const Tensor& gamma, const Tensor& beta, std::span<float> y) {
  const std::size_t n = x.size();
  float mean = 0.0f;
  for (float v : x) mean += v;
  mean /= static_cast<float>(n);
  float var = 0.0f;
  for (float v : x) var += (v - mean) * (v - mean);
  var /= static_cast<float>(n);
  const float inv_std = 1.0f / std::sqrt(var + 1e-5f);
  const auto g = gamma.data();
  const auto b = beta.data();
  for (std::size_t i = 0; i < n; ++i) y[i] = (x[i] - mean) * inv_std * g[i] + b[i];
}

struct FactorRange {
  float lo = std::numeric_limits<float>::infinity();
  float hi = -std::numeric_limits<float>::infinity();
};

std::vector<float> step_impl(const ModelParams& params, StreamState& state, std::span<const float> frame,
                             FactorRange* factors) {
  const auto& cfg = params.config;
  if (!(state.config == cfg) || state.ssm.size() != cfg.num_layers) {
    throw ContractError("forward_step: stream state was created for a different model configuration");
  }
  if (frame.size() != cfg.feature_dim) {
    throw DimensionError("forward_step: frame has " + std::to_string(frame.size()) + " features, model expects " +
                         std::to_string(cfg.feature_dim));
  }
  const std::size_t D = cfg.model_dim, E = cfg.inner_dim(), N = cfg.state_dim, K = cfg.conv_kernel;
  const std::size_t R = cfg.dt_rank();

  std::vector<float> h(D), u(D), signal(E), gate(E), xa(E), dt_low(R), dt(E), bsel(N), csel(N), y(E), out(D);
  std::vector<float> decay(E * N);
  vec_mat(frame, params.w_in, h, &params.b_in);

  // Ring slot holding the input from (K-1) frames ago.
  const std::size_t ring = K > 1 ? K - 1 : 1;
  const std::size_t oldest = static_cast<std::size_t>(state.frames_seen % ring);

  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const LayerParams& layer = params.layers[l];
    layer_norm_vec(h, layer.norm_gamma, layer.norm_beta, u);
    vec_mat(u, layer.w_signal, signal);
    vec_mat(u, layer.w_gate, gate);

    auto& conv_state = state.conv[l];
    const float* kernel = layer.conv_kernel.data().data();
    const float* conv_bias = layer.conv_bias.data().data();
    for (std::size_t e = 0; e < E; ++e) {
      float acc = 0.0f;
      for (std::size_t k = 0; k + 1 < K; ++k) {
        acc += kernel[k * E + e] * conv_state[((oldest + k) % ring) * E + e];
      }
      acc += kernel[(K - 1) * E + e] * signal[e];
      xa[e] = nk::scalar::silu(acc + conv_bias[e]);
    }
    if (K > 1) std::copy(signal.begin(), signal.end(), conv_state.begin() + static_cast<std::ptrdiff_t>(oldest * E));

    vec_mat(xa, layer.w_dt_down, dt_low);
    vec_mat(dt_low, layer.w_dt_up, dt, &layer.dt_bias);
    for (float& v : dt) v = nk::scalar::softplus(v);
    vec_mat(xa, layer.w_b, bsel);
    vec_mat(xa, layer.w_c, csel);

    auto& hstate = state.ssm[l];
    const float* a_log = layer.a_log.data().data();
    const float* d_skip = layer.d_skip.data().data();
    for (std::size_t i = 0; i < E * N; ++i) decay[i] = -std::exp(a_log[i]);
    for (std::size_t e = 0; e < E; ++e) {
      float* de = decay.data() + e * N;
#pragma omp simd
      for (std::size_t n = 0; n < N; ++n) de[n] = nk::scalar::exp_nonpos(dt[e] * de[n]);
    }
    if (factors) {
      const auto [lo, hi] = std::minmax_element(decay.begin(), decay.end());
      factors->lo = std::min(factors->lo, *lo);
      factors->hi = std::max(factors->hi, *hi);
    }
    for (std::size_t e = 0; e < E; ++e) {
      float acc = 0.0f;
      for (std::size_t n = 0; n < N; ++n) {
        const std::size_t i = e * N + n;
        hstate[i] = decay[i] * hstate[i] + dt[e] * bsel[n] * xa[e];
        acc += csel[n] * hstate[i];
      }
      y[e] = (acc + d_skip[e] * xa[e]) * nk::scalar::silu(gate[e]);
    }
    vec_mat(y, layer.w_out, out);
    for (std::size_t d = 0; d < D; ++d) h[d] += out[d];
  }
  layer_norm_vec(h, params.final_gamma, params.final_beta, u);
  std::vector<float> logits(cfg.num_classes);
  vec_mat(u, params.w_head, logits, &params.b_head);
  ++state.frames_seen;
  return logits;
}

}  // namespace

std::size_t StreamState::bytes() const {
  std::size_t n = sizeof(frames_seen);
  for (const auto& v : ssm) n += v.size() * sizeof(float);
  for (const auto& v : conv) n += v.size() * sizeof(float);
  return n;
}

StreamState reset_state(const ModelConfig& config) {
  StreamState s;
  s.config = config;
  const std::size_t E = config.inner_dim();
  const std::size_t ring = config.conv_kernel > 1 ? config.conv_kernel - 1 : 0;
  s.ssm.assign(config.num_layers, std::vector<float>(E * config.state_dim, 0.0f));
  s.conv.assign(config.num_layers, std::vector<float>(ring * E, 0.0f));
  return s;
}

std::vector<float> forward_step(const ModelParams& params, StreamState& state, std::span<const float> frame) {
  return step_impl(params, state, frame, nullptr);
}

std::pair<float, float> transition_factor_range(const ModelParams& params, const Tensor& features) {
  StreamState state = reset_state(params.config);
  FactorRange range;
  const std::size_t T = features.dim(0), F = features.dim(1);
  for (std::size_t t = 0; t < T; ++t) step_impl(params, state, features.data().subspan(t * F, F), &range);
  return {range.lo, range.hi};
}

}  // namespace otr::ssm
