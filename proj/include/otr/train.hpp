// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "otr/data/clips.hpp"
#include "otr/data/formats.hpp"
#include "otr/losses.hpp"
#include "otr/ssm/model.hpp"

namespace otr::train {

struct AdamConfig {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;

  bool operator==(const AdamConfig&) const = default;
};

// First and second moments per parameter tensor, plus the step counter used for bias correction.
struct AdamState {
  std::vector<std::vector<float>> m, v;
  std::uint64_t step = 0;

  bool operator==(const AdamState&) const = default;
};

AdamState init_adam(std::span<const nk::NamedTensor> params);

// One bias-corrected Adam update, in place. grads[i] matches params[i] element for element.
// Throws DimensionError on a size mismatch.
void adam_step(std::span<const nk::NamedTensor> params, std::span<const std::vector<float>> grads, AdamState& state,
               const AdamConfig& config);

struct TrainConfig {
  ssm::ModelConfig model;
  losses::LossConfig loss;
  AdamConfig adam;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  std::size_t clip_len = 20;
  std::size_t stride = 20;
  std::optional<float> grad_clip;  // max global L2 norm
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void validate() const;  // throws ConfigError
  bool operator==(const TrainConfig&) const = default;
};

// Everything needed to continue training from an epoch boundary.
struct TrainState {
  ssm::ModelParams params;
  AdamState adam;
  std::mt19937_64 rng;
  std::size_t epoch = 0;  // completed epochs

  TrainState clone() const;
};

TrainState init_train_state(const TrainConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;  // mean over batches of the clip-averaged loss
  std::optional<double> val_mp_map;  // fraction in [0, 1]
};

// Shuffles the clips with state.rng, then steps over them in batches. Throws
// TrainingError naming the first non-finite tensor if a loss or gradient blows up.
double train_epoch(TrainState& state, std::span<const data::Clip> clips, const TrainConfig& config);

// Mean loss over clips without updating anything.
double evaluate_loss(const ssm::ModelParams& params, std::span<const data::Clip> clips,
                     const losses::LossConfig& loss);

// Streaming inference over every video, all frames as detections, then mp-mAP.
double validation_mp_map(const ssm::ModelParams& params, const data::Dataset& val);

struct TrainResult {
  TrainState best;  // state after the epoch with the highest validation mp-mAP (the last epoch without validation)
  TrainState last;
  std::size_t best_epoch = 0;
  std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&, const TrainState&)>;

// Trains until config.epochs epochs are complete, starting from `resume` if given.
TrainResult train(const data::Dataset& train_set, const data::Dataset& val_set, const TrainConfig& config,
                  std::optional<TrainState> resume = std::nullopt, const EpochCallback& on_epoch = {});

// Gradient audit of the full model on random features of `frames` rows with a
// take and a release target and the configured training loss. Autodiff
// gradients of the float model are compared with central differences (step
// options.step) of the double-precision reference.
nk::GradCheckReport audit_gradients(const ssm::ModelConfig& model, const losses::LossConfig& loss, std::size_t frames,
                                    std::uint64_t seed, const nk::GradCheckOptions& options);

// Moves the last `count` videos (by id order) and their actions out of `ds`.
data::Dataset split_validation(data::Dataset& ds, std::size_t count);

}  // namespace otr::train
