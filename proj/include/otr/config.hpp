// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "otr/data/synthetic.hpp"
#include "otr/inference.hpp"
#include "otr/train.hpp"

// JSON (de)serialization of every configuration struct. Readers start from the
// defaults, override the keys present and throw ConfigError on unknown keys or
// wrongly typed values.
namespace otr::config {

using Json = nlohmann::ordered_json;

struct InferenceOptions {
  inference::InferenceMode mode;
  double theta = 0.0;
  std::optional<std::size_t> nms_radius;

  bool operator==(const InferenceOptions& o) const {
    return mode.kind == o.mode.kind && mode.window == o.mode.window && mode.stride == o.mode.stride &&
           theta == o.theta && nms_radius == o.nms_radius;
  }
};

struct RunConfig {
  data::SynthSpec synth;
  std::size_t train_videos = 40;
  std::size_t test_videos = 10;
  train::TrainConfig train;
  std::size_t val_videos = 4;  // carved from the end of the training set
  InferenceOptions inference;

  void validate() const;
};

Json to_json(const ssm::ModelConfig& c);
Json to_json(const losses::LossConfig& c);
Json to_json(const train::AdamConfig& c);
Json to_json(const train::TrainConfig& c);
Json to_json(const data::SynthSpec& c);
Json to_json(const InferenceOptions& c);
Json to_json(const RunConfig& c);

// `where` prefixes error messages, e.g. "model".
ssm::ModelConfig model_from_json(const Json& j, const std::string& where = "model");
losses::LossConfig loss_from_json(const Json& j, const std::string& where = "loss");
train::AdamConfig adam_from_json(const Json& j, const std::string& where = "adam");
train::TrainConfig train_from_json(const Json& j, const std::string& where = "train");
data::SynthSpec synth_from_json(const Json& j, const std::string& where = "synth");
InferenceOptions inference_from_json(const Json& j, const std::string& where = "inference");
RunConfig run_from_json(const Json& j);

// Throws ConfigError for unreadable or malformed files.
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace otr::config
