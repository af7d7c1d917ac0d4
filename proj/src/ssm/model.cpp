// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#include "otr/ssm/model.hpp"

#include <cmath>
#include <random>
#include <string>

#include "otr/error.hpp"
#include "otr/numkernel/ops.hpp"

namespace otr::ssm {

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v < 1) throw ConfigError(std::string("model config: ") + name + " must be >= 1");
  };
  positive(feature_dim, "feature_dim");
  positive(model_dim, "model_dim");
  positive(state_dim, "state_dim");
  positive(conv_kernel, "conv_kernel");
  positive(num_layers, "num_layers");
  positive(expand, "expand");
  if (num_classes != 3) throw ConfigError("model config: num_classes must be 3 (take, release, background)");
}

std::vector<nk::NamedTensor> ModelParams::named() const {
  std::vector<nk::NamedTensor> out{{"input.weight", w_in}, {"input.bias", b_in}};
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& p = layers[l];
    const std::string pre = "layers." + std::to_string(l) + ".";
    out.push_back({pre + "norm.gamma", p.norm_gamma});
    out.push_back({pre + "norm.beta", p.norm_beta});
    out.push_back({pre + "signal.weight", p.w_signal});
    out.push_back({pre + "gate.weight", p.w_gate});
    out.push_back({pre + "conv.kernel", p.conv_kernel});
    out.push_back({pre + "conv.bias", p.conv_bias});
    out.push_back({pre + "dt_down.weight", p.w_dt_down});
    out.push_back({pre + "dt_up.weight", p.w_dt_up});
    out.push_back({pre + "dt_up.bias", p.dt_bias});
    out.push_back({pre + "b_proj.weight", p.w_b});
    out.push_back({pre + "c_proj.weight", p.w_c});
    out.push_back({pre + "a_log", p.a_log});
    out.push_back({pre + "d_skip", p.d_skip});
    out.push_back({pre + "out.weight", p.w_out});
  }
  out.push_back({"final_norm.gamma", final_gamma});
  out.push_back({"final_norm.beta", final_beta});
  out.push_back({"head.weight", w_head});
  out.push_back({"head.bias", b_head});
  return out;
}

ModelParams ModelParams::clone() const {
  ModelParams c;
  c.config = config;
  c.w_in = w_in.clone(w_in.requires_grad());
  c.b_in = b_in.clone(b_in.requires_grad());
  for (const auto& p : layers) {
    LayerParams q;
    auto cp = [](const Tensor& t) { return t.clone(t.requires_grad()); };
    q.norm_gamma = cp(p.norm_gamma);
    q.norm_beta = cp(p.norm_beta);
    q.w_signal = cp(p.w_signal);
    q.w_gate = cp(p.w_gate);
    q.conv_kernel = cp(p.conv_kernel);
    q.conv_bias = cp(p.conv_bias);
    q.w_dt_down = cp(p.w_dt_down);
    q.w_dt_up = cp(p.w_dt_up);
    q.dt_bias = cp(p.dt_bias);
    q.w_b = cp(p.w_b);
    q.w_c = cp(p.w_c);
    q.a_log = cp(p.a_log);
    q.d_skip = cp(p.d_skip);
    q.w_out = cp(p.w_out);
    c.layers.push_back(std::move(q));
  }
  c.final_gamma = final_gamma.clone(final_gamma.requires_grad());
  c.final_beta = final_beta.clone(final_beta.requires_grad());
  c.w_head = w_head.clone(w_head.requires_grad());
  c.b_head = b_head.clone(b_head.requires_grad());
  return c;
}

void ModelParams::set_requires_grad(bool value) const {
  for (auto& nt : named()) nt.tensor.set_requires_grad(value);
}

void ModelParams::zero_grad() const {
  for (const auto& nt : named()) nt.tensor.zero_grad();
}

namespace {

class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  // Uniform in +-1/sqrt(fan_in), fan_in = rows.
  Tensor linear(std::size_t rows, std::size_t cols) {
    return uniform({rows, cols}, 1.0f / std::sqrt(static_cast<float>(rows)));
  }

  Tensor uniform(nk::Shape shape, float bound) {
    std::uniform_real_distribution<float> dist(-bound, bound);
    std::vector<float> v(nk::numel(shape));
    for (float& x : v) x = dist(rng_);
    return Tensor(std::move(shape), std::move(v));
  }

  float log_uniform(float lo, float hi) {
    std::uniform_real_distribution<float> dist(std::log(lo), std::log(hi));
    return std::exp(dist(rng_));
  }

 private:
  std::mt19937_64 rng_;
};

constexpr float kDtMin = 1e-3f;
constexpr float kDtMax = 1e-1f;
constexpr float kFactorLo = 0.5f;
constexpr float kFactorHi = 0.9f;

}  // namespace

ModelParams init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  const std::size_t D = config.model_dim, E = config.inner_dim(), N = config.state_dim;
  const std::size_t K = config.conv_kernel, R = config.dt_rank(), C = config.num_classes;
  Initializer init(seed);

  ModelParams p;
  p.config = config;
  p.w_in = init.linear(config.feature_dim, D);
  p.b_in = Tensor::zeros({D});
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    LayerParams q;
    q.norm_gamma = Tensor::filled({D}, 1.0f);
    q.norm_beta = Tensor::zeros({D});
    q.w_signal = init.linear(D, E);
    q.w_gate = init.linear(D, E);
    q.conv_kernel = init.uniform({K, E}, 1.0f / std::sqrt(static_cast<float>(K)));
    q.conv_bias = Tensor::zeros({E});
    q.w_dt_down = init.linear(E, R);
    q.w_dt_up = init.uniform({R, E}, 1.0f / std::sqrt(static_cast<float>(R)));

    // Per-channel base step dt0 (log-uniform); A is chosen so that
    // exp(dt0 * A) spans [kFactorLo, kFactorHi] across the state dimension.
    std::vector<float> dt_bias(E), a_log(E * N);
    for (std::size_t e = 0; e < E; ++e) {
      const float dt0 = init.log_uniform(kDtMin, kDtMax);
      dt_bias[e] = dt0 + std::log(-std::expm1(-dt0));  // softplus^-1(dt0)
      for (std::size_t n = 0; n < N; ++n) {
        const float frac = N > 1 ? static_cast<float>(n) / static_cast<float>(N - 1) : 0.5f;
        const float factor = kFactorLo + (kFactorHi - kFactorLo) * frac;
        a_log[e * N + n] = std::log(-std::log(factor) / dt0);
      }
    }
    q.dt_bias = Tensor({E}, std::move(dt_bias));
    q.a_log = Tensor({E, N}, std::move(a_log));
    q.w_b = init.linear(E, N);
    q.w_c = init.linear(E, N);
    q.d_skip = Tensor::filled({E}, 1.0f);
    q.w_out = init.linear(E, D);
    p.layers.push_back(std::move(q));
  }
  p.final_gamma = Tensor::filled({D}, 1.0f);
  p.final_beta = Tensor::zeros({D});
  p.w_head = init.linear(D, C);
  p.b_head = Tensor::zeros({C});
  return p;
}

std::size_t count_params(const ModelParams& params) {
  std::size_t n = 0;
  for (const auto& nt : params.named()) n += nt.tensor.size();
  return n;
}

Tensor forward_sequence(Tape& tape, const ModelParams& params, const Tensor& features) {
  const auto& cfg = params.config;
  if (features.rank() != 2 || features.dim(1) != cfg.feature_dim) {
    throw DimensionError("forward_sequence: expected features [T x " + std::to_string(cfg.feature_dim) +
                         "], got " + nk::shape_str(features.shape()));
  }
  if (features.dim(0) < 1) throw DimensionError("forward_sequence: empty sequence");

  Tensor h = nk::add_bias(tape, nk::matmul(tape, features, params.w_in), params.b_in);
  for (const auto& layer : params.layers) {
    Tensor u = nk::layer_norm(tape, h, layer.norm_gamma, layer.norm_beta);
    Tensor signal = nk::matmul(tape, u, layer.w_signal);
    Tensor gate = nk::matmul(tape, u, layer.w_gate);
    Tensor conv = nk::add_bias(tape, nk::causal_depthwise_conv1d(tape, signal, layer.conv_kernel), layer.conv_bias);
    Tensor xa = nk::silu(tape, conv);
    Tensor dt_low = nk::matmul(tape, xa, layer.w_dt_down);
    Tensor dt = nk::softplus(tape, nk::add_bias(tape, nk::matmul(tape, dt_low, layer.w_dt_up), layer.dt_bias));
    Tensor bsel = nk::matmul(tape, xa, layer.w_b);
    Tensor csel = nk::matmul(tape, xa, layer.w_c);
    Tensor y = selective_scan(tape, xa, dt, layer.a_log, bsel, csel, layer.d_skip);
    Tensor gated = nk::mul(tape, y, nk::silu(tape, gate));
    h = nk::add(tape, h, nk::matmul(tape, gated, layer.w_out));
  }
  Tensor hf = nk::layer_norm(tape, h, params.final_gamma, params.final_beta);
  return nk::add_bias(tape, nk::matmul(tape, hf, params.w_head), params.b_head);
}

Tensor forward_sequence(const ModelParams& params, const Tensor& features) {
  Tape tape;
  Tensor logits = forward_sequence(tape, params, features);
  return logits.clone();
}

}  // namespace otr::ssm
