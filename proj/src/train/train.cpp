// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#include "otr/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "otr/detection.hpp"
#include "otr/error.hpp"
#include "otr/inference.hpp"
#include "otr/metrics.hpp"
#include "otr/numkernel/ops.hpp"
#include "otr/ssm/reference.hpp"

namespace otr::train {
namespace {

// Loss and flattened gradient (in named() order) for one clip.
struct ClipGrad {
  float loss = 0.0f;
  std::vector<float> grad;
};

std::string describe(const data::Clip& c) {
  return "clip " + c.video_id + "@" + std::to_string(c.start_frame);
}

nk::Tensor clip_loss(nk::Tape& tape, const ssm::ModelParams& params, const data::Clip& clip,
                     const losses::LossConfig& loss) {
  const nk::Tensor logits = ssm::forward_sequence(tape, params, clip.features);
  const nk::Tensor probs = nk::softmax(tape, logits);
  return losses::total_loss(tape, probs, clip.targets, loss);
}

void compute_clip(const ssm::ModelParams& replica, const data::Clip& clip, const losses::LossConfig& loss,
                  ClipGrad& out) {
  replica.zero_grad();
  nk::Tape tape;
  nk::Tensor l;
  try {
    l = clip_loss(tape, replica, clip, loss);
    nk::backward(l, tape);
  } catch (const NonFiniteError& e) {
    throw TrainingError(describe(clip) + ": non-finite value in " + e.op());
  }
  out.loss = l.item();
  out.grad.clear();
  for (const auto& nt : replica.named()) {
    const auto g = nt.tensor.grad_mut();
    out.grad.insert(out.grad.end(), g.begin(), g.end());
  }
}

void copy_values(const ssm::ModelParams& from, ssm::ModelParams& to) {
  const auto src = from.named();
  auto dst = to.named();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const auto s = src[i].tensor.data();
    auto d = dst[i].tensor.mutable_data();
    std::copy(s.begin(), s.end(), d.begin());
  }
}

}  // namespace

AdamState init_adam(std::span<const nk::NamedTensor> params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.emplace_back(p.tensor.size(), 0.0f);
    s.v.emplace_back(p.tensor.size(), 0.0f);
  }
  return s;
}

void adam_step(std::span<const nk::NamedTensor> params, std::span<const std::vector<float>> grads, AdamState& state,
               const AdamConfig& config) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) + " parameters, " +
                         std::to_string(grads.size()) + " gradients, " + std::to_string(state.m.size()) + " moments");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const float bc1 = static_cast<float>(1.0 - std::pow(static_cast<double>(config.beta1), t));
  const float bc2 = static_cast<float>(1.0 - std::pow(static_cast<double>(config.beta2), t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    nk::Tensor p = params[i].tensor;
    auto w = p.mutable_data();
    const auto& g = grads[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (g.size() != w.size() || m.size() != w.size() || v.size() != w.size()) {
      throw DimensionError("adam_step: size mismatch for " + params[i].name);
    }
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = config.beta1 * m[j] + (1.0f - config.beta1) * g[j];
      v[j] = config.beta2 * v[j] + (1.0f - config.beta2) * g[j] * g[j];
      const float mhat = m[j] / bc1;
      const float vhat = v[j] / bc2;
      w[j] -= config.lr * mhat / (std::sqrt(vhat) + config.eps);
    }
  }
}

void TrainConfig::validate() const {
  model.validate();
  loss.validate();
  if (!(adam.lr > 0.0f) || !std::isfinite(adam.lr)) throw ConfigError("train: learning rate must be > 0");
  if (!(adam.beta1 >= 0.0f && adam.beta1 < 1.0f) || !(adam.beta2 >= 0.0f && adam.beta2 < 1.0f)) {
    throw ConfigError("train: Adam betas must be in [0, 1)");
  }
  if (!(adam.eps > 0.0f)) throw ConfigError("train: Adam eps must be > 0");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (clip_len < 1) throw ConfigError("train: clip_len must be >= 1");
  if (stride < 1 || stride > clip_len) throw ConfigError("train: stride must be in [1, clip_len]");
  if (grad_clip && !(*grad_clip > 0.0f)) throw ConfigError("train: grad_clip must be > 0");
  if (threads < 1) throw ConfigError("train: threads must be >= 1");
}

TrainState TrainState::clone() const { return TrainState{params.clone(), adam, rng, epoch}; }

TrainState init_train_state(const TrainConfig& config) {
  config.validate();
  TrainState s;
  s.params = ssm::init_model(config.model, config.seed);
  s.adam = init_adam(s.params.named());
  // Shuffle stream, distinct from the initializer's.
  s.rng.seed(config.seed ^ 0x9E3779B97F4A7C15ull);
  return s;
}

double train_epoch(TrainState& state, std::span<const data::Clip> clips, const TrainConfig& config) {
  if (clips.empty()) throw TrainingError("no training clips (videos shorter than clip_len?)");
  std::vector<std::size_t> order(clips.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), state.rng);

  const auto named = state.params.named();
  std::vector<std::size_t> sizes;
  std::size_t total = 0;
  for (const auto& nt : named) {
    sizes.push_back(nt.tensor.size());
    total += nt.tensor.size();
  }

  const std::size_t workers = std::min(config.threads, config.batch_size);
  std::vector<ssm::ModelParams> replicas;
  for (std::size_t w = 0; w < workers; ++w) {
    replicas.push_back(state.params.clone());
    replicas.back().set_requires_grad(true);
  }

  std::vector<ClipGrad> results(config.batch_size);
  std::vector<std::vector<float>> grads(named.size());
  double loss_sum = 0.0;
  std::size_t batches = 0;
  for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
    const std::size_t count = std::min(config.batch_size, order.size() - begin);
    for (auto& r : replicas) copy_values(state.params, r);

    auto work = [&](std::size_t w) {
      for (std::size_t i = w; i < count; i += workers) {
        compute_clip(replicas[w], clips[order[begin + i]], config.loss, results[i]);
      }
    };
    if (workers == 1) {
      work(0);
    } else {
      std::vector<std::exception_ptr> errors(workers);
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            work(w);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
      for (auto& t : pool) t.join();
      for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
    }

    // Fixed reduction order: clip 0, 1, ... of the batch.
    std::vector<float> sum(total, 0.0f);
    float batch_loss = 0.0f;
    for (std::size_t i = 0; i < count; ++i) {
      batch_loss += results[i].loss;
      const auto& g = results[i].grad;
      for (std::size_t j = 0; j < total; ++j) sum[j] += g[j];
    }
    const float inv = 1.0f / static_cast<float>(count);
    batch_loss *= inv;
    if (!std::isfinite(batch_loss)) throw TrainingError("epoch " + std::to_string(state.epoch + 1) + ": loss is non-finite");

    std::size_t off = 0;
    double sq = 0.0;
    for (std::size_t k = 0; k < named.size(); ++k) {
      grads[k].assign(sum.begin() + static_cast<std::ptrdiff_t>(off),
                      sum.begin() + static_cast<std::ptrdiff_t>(off + sizes[k]));
      for (float& v : grads[k]) {
        v *= inv;
        sq += static_cast<double>(v) * v;
      }
      if (!nk::all_finite(grads[k])) {
        throw TrainingError("epoch " + std::to_string(state.epoch + 1) + ": non-finite gradient in " + named[k].name);
      }
      off += sizes[k];
    }
    if (config.grad_clip) {
      const double norm = std::sqrt(sq);
      if (norm > *config.grad_clip) {
        const float scale = static_cast<float>(*config.grad_clip / norm);
        for (auto& g : grads) {
          for (float& v : g) v *= scale;
        }
      }
    }
    adam_step(named, grads, state.adam, config.adam);
    for (const auto& nt : named) {
      if (!nk::all_finite(nt.tensor.data())) {
        throw TrainingError("epoch " + std::to_string(state.epoch + 1) + ": parameter " + nt.name +
                            " became non-finite");
      }
    }
    loss_sum += batch_loss;
    ++batches;
  }
  ++state.epoch;
  return loss_sum / static_cast<double>(batches);
}

double evaluate_loss(const ssm::ModelParams& params, std::span<const data::Clip> clips,
                     const losses::LossConfig& loss) {
  if (clips.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& c : clips) {
    nk::Tape tape;
    sum += clip_loss(tape, params, c, loss).item();
  }
  return sum / static_cast<double>(clips.size());
}

double validation_mp_map(const ssm::ModelParams& params, const data::Dataset& val) {
  std::vector<Detection> dets;
  for (const auto& v : val.videos) {
    auto d = detection::extract_detections(inference::infer_streaming(params, v));
    std::move(d.begin(), d.end(), std::back_inserter(dets));
  }
  return metrics::mp_map(dets, val.actions).mp_map;
}

TrainResult train(const data::Dataset& train_set, const data::Dataset& val_set, const TrainConfig& config,
                  std::optional<TrainState> resume, const EpochCallback& on_epoch) {
  config.validate();
  const auto clips = data::chunk_dataset(train_set, config.clip_len, config.stride);
  TrainState state = resume ? std::move(*resume) : init_train_state(config);
  if (!(state.params.config == config.model)) throw ConfigError("train: resume state has a different model config");

  TrainResult result;
  std::optional<double> best_val;
  while (state.epoch < config.epochs) {
    EpochRecord rec;
    rec.train_loss = train_epoch(state, clips, config);
    rec.epoch = state.epoch;
    if (!val_set.videos.empty()) rec.val_mp_map = validation_mp_map(state.params, val_set);
    const bool better = !rec.val_mp_map || !best_val || *rec.val_mp_map > *best_val;
    if (better) {
      best_val = rec.val_mp_map;
      result.best = state.clone();
      result.best_epoch = rec.epoch;
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec, state);
  }
  if (result.history.empty()) {
    result.best = state.clone();
    result.best_epoch = state.epoch;
  }
  result.last = std::move(state);
  return result;
}

nk::GradCheckReport audit_gradients(const ssm::ModelConfig& model, const losses::LossConfig& loss, std::size_t frames,
                                    std::uint64_t seed, const nk::GradCheckOptions& options) {
  if (frames < 1) throw ConfigError("gradient audit needs at least one frame");
  loss.validate();
  const ssm::ModelParams params = ssm::init_model(model, seed);
  params.set_requires_grad(true);
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::vector<float> x(frames * model.feature_dim);
  for (float& v : x) v = normal(rng);
  data::Clip clip;
  clip.features = nk::Tensor({frames, model.feature_dim}, std::move(x));
  clip.targets.labels.assign(frames, kBackgroundIndex);
  clip.targets.labels[frames / 4] = index_of(ActionClass::Take);
  clip.targets.labels[(3 * frames) / 4] = index_of(ActionClass::Release);
  for (std::size_t t = 0; t < frames; ++t) {
    if (clip.targets.labels[t] != kBackgroundIndex) clip.targets.positives.push_back(t);
  }
  const auto named = params.named();
  for (const auto& nt : named) nt.tensor.zero_grad();
  {
    nk::Tape tape;
    nk::backward(clip_loss(tape, params, clip, loss), tape);
  }
  ssm::ReferenceParams ref = ssm::to_reference(params);
  const auto feats = clip.features.data();
  auto eval = [&] { return ssm::loss_reference(ssm::forward_reference(model, ref, feats, frames), clip.targets, loss); };
  const double h = options.step;
  return nk::compare_gradients(
      named,
      [&](std::size_t ti, std::size_t i) {
        const double saved = ref[ti][i];
        ref[ti][i] = saved + h;
        const double up = eval();
        ref[ti][i] = saved - h;
        const double down = eval();
        ref[ti][i] = saved;
        return (up - down) / (2.0 * h);
      },
      options);
}

data::Dataset split_validation(data::Dataset& ds, std::size_t count) {
  if (count >= ds.videos.size()) {
    throw ConfigError("validation split of " + std::to_string(count) + " videos leaves no training videos");
  }
  std::sort(ds.videos.begin(), ds.videos.end(),
            [](const data::FeatureSequence& a, const data::FeatureSequence& b) { return a.video_id < b.video_id; });
  data::Dataset val;
  const auto first = ds.videos.end() - static_cast<std::ptrdiff_t>(count);
  std::move(first, ds.videos.end(), std::back_inserter(val.videos));
  ds.videos.erase(first, ds.videos.end());
  std::vector<GroundTruthAction> keep;
  for (auto& a : ds.actions) {
    const bool in_val = std::any_of(val.videos.begin(), val.videos.end(),
                                    [&](const data::FeatureSequence& v) { return v.video_id == a.video_id; });
    (in_val ? val.actions : keep).push_back(std::move(a));
  }
  ds.actions = std::move(keep);
  return val;
}

}  // namespace otr::train
