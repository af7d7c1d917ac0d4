// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "otr/numkernel/grad_check.hpp"
#include "otr/numkernel/tape.hpp"
#include "otr/numkernel/tensor.hpp"

namespace otr::ssm {

using nk::Tape;
using nk::Tensor;

struct ModelConfig {
  std::size_t feature_dim = 32;
  std::size_t model_dim = 64;
  std::size_t state_dim = 16;
  std::size_t conv_kernel = 4;
  std::size_t num_layers = 3;
  std::size_t num_classes = 3;
  // Width of the signal path relative to model_dim.
  std::size_t expand = 2;

  std::size_t inner_dim() const { return expand * model_dim; }
  std::size_t dt_rank() const { return (model_dim + 15) / 16; }

  // Throws ConfigError.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

// One selective state-space block: pre-norm, signal/gate projections, causal
// depthwise conv + SiLU on the signal path, selective scan, SiLU gate, output
// projection, residual add.
struct LayerParams {
  Tensor norm_gamma, norm_beta;  // [D]
  Tensor w_signal, w_gate;       // [D x E]
  Tensor conv_kernel, conv_bias; // [K x E], [E]
  Tensor w_dt_down;              // [E x R]
  Tensor w_dt_up, dt_bias;       // [R x E], [E]
  Tensor w_b, w_c;               // [E x N]
  Tensor a_log;                  // [E x N]; continuous-time A = -exp(a_log)
  Tensor d_skip;                 // [E]
  Tensor w_out;                  // [E x D]
};

struct ModelParams {
  ModelConfig config;
  Tensor w_in, b_in;  // [D_in x D], [D]
  std::vector<LayerParams> layers;
  Tensor final_gamma, final_beta;  // [D]
  Tensor w_head, b_head;           // [D x C], [C]

  // Every parameter tensor with a stable dotted name, in a fixed order.
  std::vector<nk::NamedTensor> named() const;
  ModelParams clone() const;
  void set_requires_grad(bool value) const;
  void zero_grad() const;
};

ModelParams init_model(const ModelConfig& config, std::uint64_t seed);

std::size_t count_params(const ModelParams& params);

// Per-frame logits [T x C] for features [T x D_in], recording on `tape`.
Tensor forward_sequence(Tape& tape, const ModelParams& params, const Tensor& features);

// Same as above without keeping a tape alive.
Tensor forward_sequence(const ModelParams& params, const Tensor& features);

// Selective scan over a [T x E] sequence starting from a zero state:
//   h_t = exp(dt_t * A) * h_{t-1} + dt_t * B_t * x_t,   y_t = C_t . h_t + d_skip * x_t
// x, dt: [T x E]; a_log: [E x N]; b, c: [T x N]; d_skip: [E]  ->  [T x E]
Tensor selective_scan(Tape& tape, const Tensor& x, const Tensor& dt, const Tensor& a_log, const Tensor& b,
                      const Tensor& c, const Tensor& d_skip);

// Recurrent state carried between frames in streaming mode. Its size depends
// only on the model configuration.
struct StreamState {
  ModelConfig config;
  std::vector<std::vector<float>> ssm;   // per layer, [E x N]
  std::vector<std::vector<float>> conv;  // per layer, last K-1 signal inputs, [(K-1) x E] ring
  std::uint64_t frames_seen = 0;

  std::size_t bytes() const;
  bool operator==(const StreamState&) const = default;
};

StreamState reset_state(const ModelConfig& config);

// Advances `state` by one frame and returns the frame's logits [C].
// Throws ContractError if the state belongs to a different configuration.
std::vector<float> forward_step(const ModelParams& params, StreamState& state, std::span<const float> frame);

// Smallest and largest discrete transition factor exp(dt * A) seen while
// streaming `features` through the model from a fresh state.
std::pair<float, float> transition_factor_range(const ModelParams& params, const Tensor& features);

}  // namespace otr::ssm
