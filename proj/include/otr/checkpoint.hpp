// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>

#include "otr/train.hpp"

namespace otr::train {

// Checkpoint file, little-endian:
//   "OTRC" | u32 version | u32 tensor count
//   per tensor: u32 name length | name | u32 rank | u32 dims... | f32 data
//     (model parameters, then "adam.m.<name>" and "adam.v.<name>")
//   u32 length | JSON {"train": TrainConfig, "epoch", "adam_step"}
//   u32 length | mt19937_64 state as text
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  TrainConfig config;
  TrainState state;
};

void save_checkpoint(const std::filesystem::path& path, const TrainState& state, const TrainConfig& config);

// Throws FormatError for a damaged file or a version mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// As above, and throws ConfigError unless the stored model configuration equals `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ssm::ModelConfig& expected);

}  // namespace otr::train
