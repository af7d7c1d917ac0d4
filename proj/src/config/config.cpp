// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#include "otr/config.hpp"

#include <charconv>
#include <concepts>
#include <fstream>
#include <set>

#include "otr/error.hpp"

namespace otr::config {
namespace {

// Shortest decimal that reads back as the same float, so 0.01f prints as 0.01.
double tidy(float f) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, f);
  double d = 0.0;
  std::from_chars(buf, end, d);
  return d;
}

class Fields {
 public:
  Fields(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    read(*it, key, out);
  }

  const Json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void done() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
    }
  }

 private:
  [[noreturn]] void bad(const char* key, const char* expected) const {
    throw ConfigError(where_ + "." + key + ": expected " + expected);
  }

  template <std::unsigned_integral T>
  void read(const Json& v, const char* key, T& out) const {
    if (!v.is_number_unsigned()) bad(key, "a non-negative integer");
    out = v.get<T>();
  }
  void read(const Json& v, const char* key, double& out) const {
    if (!v.is_number()) bad(key, "a number");
    out = v.get<double>();
  }
  void read(const Json& v, const char* key, float& out) const {
    if (!v.is_number()) bad(key, "a number");
    out = static_cast<float>(v.get<double>());
  }
  void read(const Json& v, const char* key, std::string& out) const {
    if (!v.is_string()) bad(key, "a string");
    out = v.get<std::string>();
  }
  void read(const Json& v, const char* key, std::vector<float>& out) const {
    if (!v.is_array()) bad(key, "an array of numbers");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number()) bad(key, "an array of numbers");
      out.push_back(static_cast<float>(e.get<double>()));
    }
  }
  template <typename T>
  void read(const Json& v, const char* key, std::optional<T>& out) const {
    if (v.is_null()) {
      out.reset();
      return;
    }
    T inner{};
    read(v, key, inner);
    out = inner;
  }

  const Json& j_;
  std::string where_;
  std::set<std::string, std::less<>> seen_;
};

template <typename T>
Json opt(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

}  // namespace

void RunConfig::validate() const {
  synth.validate();
  train.validate();
  inference.mode.validate();
  if (train_videos < 1) throw ConfigError("train_videos must be >= 1");
  if (val_videos >= train_videos) throw ConfigError("val_videos must be smaller than train_videos");
  if (!(inference.theta >= 0.0 && inference.theta <= 1.0)) throw ConfigError("inference.theta must be in [0, 1]");
  if (synth.feature_dim != train.model.feature_dim) {
    throw ConfigError("synth.feature_dim (" + std::to_string(synth.feature_dim) + ") differs from model.feature_dim (" +
                      std::to_string(train.model.feature_dim) + ")");
  }
}

Json to_json(const ssm::ModelConfig& c) {
  Json j;
  j["feature_dim"] = c.feature_dim;
  j["model_dim"] = c.model_dim;
  j["state_dim"] = c.state_dim;
  j["conv_kernel"] = c.conv_kernel;
  j["num_layers"] = c.num_layers;
  j["num_classes"] = c.num_classes;
  j["expand"] = c.expand;
  return j;
}

Json to_json(const losses::LossConfig& c) {
  Json j;
  j["gamma"] = tidy(c.gamma);
  Json alpha = Json::array();
  for (float a : c.alpha) alpha.push_back(tidy(a));
  j["alpha"] = alpha;
  j["lambda"] = tidy(c.lambda);
  j["reg"] = std::string(losses::to_string(c.reg_kind));
  j["window"] = c.window;
  return j;
}

Json to_json(const train::AdamConfig& c) {
  Json j;
  j["lr"] = tidy(c.lr);
  j["beta1"] = tidy(c.beta1);
  j["beta2"] = tidy(c.beta2);
  j["eps"] = tidy(c.eps);
  return j;
}

Json to_json(const train::TrainConfig& c) {
  Json j;
  j["model"] = to_json(c.model);
  j["loss"] = to_json(c.loss);
  j["adam"] = to_json(c.adam);
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["clip_len"] = c.clip_len;
  j["stride"] = c.stride;
  j["grad_clip"] = c.grad_clip ? Json(tidy(*c.grad_clip)) : Json(nullptr);
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  return j;
}

Json to_json(const data::SynthSpec& c) {
  Json j;
  j["frames_per_video"] = c.frames_per_video;
  j["feature_dim"] = c.feature_dim;
  j["fps"] = c.fps;
  j["actions_per_minute"] = c.actions_per_minute;
  j["mean_duration"] = c.mean_duration;
  j["amplitude"] = tidy(c.amplitude);
  j["noise_sigma"] = tidy(c.noise_sigma);
  j["distractors_per_minute"] = c.distractors_per_minute;
  j["seed"] = c.seed;
  return j;
}

Json to_json(const InferenceOptions& c) {
  Json j;
  j["mode"] = c.mode.name();
  j["window"] = c.mode.window;
  j["stride"] = c.mode.stride;
  j["theta"] = c.theta;
  j["nms_radius"] = opt(c.nms_radius);
  return j;
}

Json to_json(const RunConfig& c) {
  Json j;
  j["synth"] = to_json(c.synth);
  j["train_videos"] = c.train_videos;
  j["test_videos"] = c.test_videos;
  j["val_videos"] = c.val_videos;
  j["train"] = to_json(c.train);
  j["inference"] = to_json(c.inference);
  return j;
}

ssm::ModelConfig model_from_json(const Json& j, const std::string& where) {
  ssm::ModelConfig c;
  Fields f(j, where);
  f.get("feature_dim", c.feature_dim);
  f.get("model_dim", c.model_dim);
  f.get("state_dim", c.state_dim);
  f.get("conv_kernel", c.conv_kernel);
  f.get("num_layers", c.num_layers);
  f.get("num_classes", c.num_classes);
  f.get("expand", c.expand);
  f.done();
  return c;
}

losses::LossConfig loss_from_json(const Json& j, const std::string& where) {
  losses::LossConfig c;
  Fields f(j, where);
  f.get("gamma", c.gamma);
  f.get("alpha", c.alpha);
  f.get("lambda", c.lambda);
  std::string reg(losses::to_string(c.reg_kind));
  f.get("reg", reg);
  c.reg_kind = losses::parse_reg_kind(reg);
  f.get("window", c.window);
  f.done();
  return c;
}

train::AdamConfig adam_from_json(const Json& j, const std::string& where) {
  train::AdamConfig c;
  Fields f(j, where);
  f.get("lr", c.lr);
  f.get("beta1", c.beta1);
  f.get("beta2", c.beta2);
  f.get("eps", c.eps);
  f.done();
  return c;
}

train::TrainConfig train_from_json(const Json& j, const std::string& where) {
  train::TrainConfig c;
  Fields f(j, where);
  if (const Json* m = f.child("model")) c.model = model_from_json(*m, where + ".model");
  if (const Json* l = f.child("loss")) c.loss = loss_from_json(*l, where + ".loss");
  if (const Json* a = f.child("adam")) c.adam = adam_from_json(*a, where + ".adam");
  f.get("epochs", c.epochs);
  f.get("batch_size", c.batch_size);
  f.get("clip_len", c.clip_len);
  f.get("stride", c.stride);
  f.get("grad_clip", c.grad_clip);
  f.get("seed", c.seed);
  f.get("threads", c.threads);
  f.done();
  return c;
}

data::SynthSpec synth_from_json(const Json& j, const std::string& where) {
  data::SynthSpec c;
  Fields f(j, where);
  f.get("frames_per_video", c.frames_per_video);
  f.get("feature_dim", c.feature_dim);
  f.get("fps", c.fps);
  f.get("actions_per_minute", c.actions_per_minute);
  f.get("mean_duration", c.mean_duration);
  f.get("amplitude", c.amplitude);
  f.get("noise_sigma", c.noise_sigma);
  f.get("distractors_per_minute", c.distractors_per_minute);
  f.get("seed", c.seed);
  f.done();
  return c;
}

InferenceOptions inference_from_json(const Json& j, const std::string& where) {
  InferenceOptions c;
  Fields f(j, where);
  std::string mode = c.mode.name();
  f.get("mode", mode);
  c.mode.kind = inference::parse_mode(mode);
  f.get("window", c.mode.window);
  f.get("stride", c.mode.stride);
  f.get("theta", c.theta);
  f.get("nms_radius", c.nms_radius);
  f.done();
  return c;
}

RunConfig run_from_json(const Json& j) {
  RunConfig c;
  Fields f(j, "config");
  if (const Json* s = f.child("synth")) c.synth = synth_from_json(*s);
  f.get("train_videos", c.train_videos);
  f.get("test_videos", c.test_videos);
  f.get("val_videos", c.val_videos);
  if (const Json* t = f.child("train")) c.train = train_from_json(*t);
  if (const Json* i = f.child("inference")) c.inference = inference_from_json(*i);
  f.done();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return run_from_json(j);
}

}  // namespace otr::config
