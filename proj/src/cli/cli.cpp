// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#include "otr/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>

#include "CLI11.hpp"
#include "otr/checkpoint.hpp"
#include "otr/config.hpp"
#include "otr/data/formats.hpp"
#include "otr/data/synthetic.hpp"
#include "otr/detection.hpp"
#include "otr/error.hpp"
#include "otr/inference.hpp"
#include "otr/metrics.hpp"
#include "otr/train.hpp"

namespace otr::cli {
namespace {

namespace fs = std::filesystem;
using config::Json;
using config::RunConfig;

// Flags that override values from --config only when given on the command line.
class Overrides {
 public:
  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& flag, T initial, std::function<void(RunConfig&, const T&)> set,
                   const std::string& help) {
    auto value = std::make_shared<T>(std::move(initial));
    CLI::Option* opt = app->add_option(flag, *value, help)->capture_default_str();
    items_.push_back({opt, [value, set](RunConfig& c) { set(c, *value); }});
    return opt;
  }

  void apply(RunConfig& c) const {
    for (const auto& [opt, fn] : items_) {
      if (opt->count() > 0) fn(c);
    }
  }

 private:
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> items_;
};

struct Common {
  std::string config_path;
  Overrides overrides;

  RunConfig resolve() const {
    RunConfig c = config_path.empty() ? RunConfig{} : config::load_run_config(config_path);
    overrides.apply(c);
    c.synth.feature_dim = c.train.model.feature_dim;
    c.validate();
    return c;
  }
};

void write_json(const fs::path& path, const Json& j) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << j.dump(2) << '\n';
}

fs::path split_dir(const fs::path& root, const char* split) {
  const fs::path p = root / split;
  return fs::is_directory(p) ? p : root;
}

void add_seed(Common& c, CLI::App* app) {
  const RunConfig d;
  c.overrides.add<std::uint64_t>(app, "--seed", d.train.seed,
                                 [](RunConfig& r, const std::uint64_t& v) {
                                   r.train.seed = v;
                                   r.synth.seed = v;
                                 },
                                 "Seed for data generation and training");
}

void add_model_flags(Common& c, CLI::App* app) {
  const RunConfig d;
  c.overrides.add<std::size_t>(app, "--feature-dim", d.train.model.feature_dim,
                               [](RunConfig& r, const std::size_t& v) { r.train.model.feature_dim = v; },
                               "Input feature width");
  c.overrides.add<std::size_t>(app, "--model-dim", d.train.model.model_dim,
                               [](RunConfig& r, const std::size_t& v) { r.train.model.model_dim = v; },
                               "Residual stream width");
  c.overrides.add<std::size_t>(app, "--state-dim", d.train.model.state_dim,
                               [](RunConfig& r, const std::size_t& v) { r.train.model.state_dim = v; },
                               "State size per channel");
  c.overrides.add<std::size_t>(app, "--layers", d.train.model.num_layers,
                               [](RunConfig& r, const std::size_t& v) { r.train.model.num_layers = v; },
                               "Number of stacked blocks");
}

void add_loss_flags(Common& c, CLI::App* app) {
  const RunConfig d;
  c.overrides.add<float>(app, "--gamma", d.train.loss.gamma,
                         [](RunConfig& r, const float& v) { r.train.loss.gamma = v; },
                         "Focal exponent (0 with --alpha 1 1 1 is cross-entropy)");
  c.overrides
      .add<std::vector<float>>(app, "--alpha", d.train.loss.alpha,
                               [](RunConfig& r, const std::vector<float>& v) { r.train.loss.alpha = v; },
                               "Class weights: take release background")
      ->expected(3);
  c.overrides.add<float>(app, "--lambda", d.train.loss.lambda,
                         [](RunConfig& r, const float& v) { r.train.loss.lambda = v; }, "Regularizer weight");
  c.overrides.add<std::string>(app, "--reg", std::string(losses::to_string(d.train.loss.reg_kind)),
                               [](RunConfig& r, const std::string& v) { r.train.loss.reg_kind = losses::parse_reg_kind(v); },
                               "Regularizer: none, entropy, sliding_window, fixed_window");
  c.overrides.add<std::size_t>(app, "--window", d.train.loss.window,
                               [](RunConfig& r, const std::size_t& v) { r.train.loss.window = v; },
                               "Regularizer window in frames");
}

void add_inference_flags(Common& c, CLI::App* app) {
  const RunConfig d;
  c.overrides.add<std::string>(app, "--mode", d.inference.mode.name(),
                               [](RunConfig& r, const std::string& v) { r.inference.mode.kind = inference::parse_mode(v); },
                               "streaming or sliding");
  c.overrides.add<std::size_t>(app, "--window", d.inference.mode.window,
                               [](RunConfig& r, const std::size_t& v) { r.inference.mode.window = v; },
                               "Sliding window length in frames");
  c.overrides.add<std::size_t>(app, "--stride", d.inference.mode.stride,
                               [](RunConfig& r, const std::size_t& v) { r.inference.mode.stride = v; },
                               "Sliding window stride in frames");
}

std::vector<Detection> detect_all(const train::Checkpoint& ck, const data::Dataset& ds, const RunConfig& c,
                                  inference::InferenceStats& stats) {
  detection::ExtractOptions opts;
  opts.theta = c.inference.theta;
  opts.nms_radius = c.inference.nms_radius;
  std::vector<Detection> dets;
  for (const auto& v : ds.videos) {
    auto d = detection::extract_detections(inference::infer(ck.state.params, v, c.inference.mode, &stats), opts);
    std::move(d.begin(), d.end(), std::back_inserter(dets));
  }
  return dets;
}

Json score_json(const std::vector<Detection>& dets, const std::vector<GroundTruthAction>& gts) {
  const metrics::EvalReport report = metrics::mp_map(dets, gts);
  Json j;
  j["ground_truth"] = gts.size();
  j["detections"] = dets.size();
  j["detections_per_gt_1s"] = metrics::detections_per_gt(dets, gts, 1.0);
  const Json scores = metrics::to_json(report);
  for (const auto& [k, v] : scores.items()) j[k] = v;
  return j;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Online take/release detection: data generation, training, evaluation and benchmarks", "otr"};
  app.require_subcommand(1);
  const RunConfig defaults;

  // gen
  Common gen;
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("gen", "Write a synthetic dataset: <out-dir>/train and <out-dir>/test");
  gen_cmd->add_option("--config", gen.config_path, "Run configuration JSON");
  gen_cmd->add_option("--out-dir", gen_out, "Output directory")->required();
  add_seed(gen, gen_cmd);
  gen.overrides.add<std::size_t>(gen_cmd, "--train-videos", defaults.train_videos,
                                 [](RunConfig& r, const std::size_t& v) { r.train_videos = v; }, "Training videos");
  gen.overrides.add<std::size_t>(gen_cmd, "--test-videos", defaults.test_videos,
                                 [](RunConfig& r, const std::size_t& v) { r.test_videos = v; }, "Test videos");
  gen.overrides.add<std::size_t>(gen_cmd, "--frames", defaults.synth.frames_per_video,
                                 [](RunConfig& r, const std::size_t& v) { r.synth.frames_per_video = v; },
                                 "Frames per video");
  gen.overrides.add<std::size_t>(gen_cmd, "--feature-dim", defaults.train.model.feature_dim,
                                 [](RunConfig& r, const std::size_t& v) { r.train.model.feature_dim = v; },
                                 "Feature width");
  gen.overrides.add<double>(gen_cmd, "--fps", defaults.synth.fps,
                            [](RunConfig& r, const double& v) { r.synth.fps = v; }, "Frame rate");
  gen.overrides.add<double>(gen_cmd, "--rate", defaults.synth.actions_per_minute,
                            [](RunConfig& r, const double& v) { r.synth.actions_per_minute = v; },
                            "Mean actions per minute");
  gen.overrides.add<double>(gen_cmd, "--duration", defaults.synth.mean_duration,
                            [](RunConfig& r, const double& v) { r.synth.mean_duration = v; },
                            "Mean action duration in frames");
  gen.overrides.add<float>(gen_cmd, "--amplitude", defaults.synth.amplitude,
                           [](RunConfig& r, const float& v) { r.synth.amplitude = v; }, "Ramp peak height");
  gen.overrides.add<float>(gen_cmd, "--noise", defaults.synth.noise_sigma,
                           [](RunConfig& r, const float& v) { r.synth.noise_sigma = v; }, "Gaussian noise sigma");
  gen.overrides.add<double>(gen_cmd, "--distractors", defaults.synth.distractors_per_minute,
                            [](RunConfig& r, const double& v) { r.synth.distractors_per_minute = v; },
                            "Decoy ramps per minute");

  // train
  Common tr;
  std::string tr_data, tr_out, tr_history;
  auto* train_cmd = app.add_subcommand("train", "Train on <data-dir>/train and write the best checkpoint");
  train_cmd->add_option("--config", tr.config_path, "Run configuration JSON");
  train_cmd->add_option("--data-dir", tr_data, "Dataset directory")->required();
  train_cmd->add_option("--out", tr_out, "Checkpoint path")->required();
  train_cmd->add_option("--history", tr_history, "History JSON path (default: <out>.history.json)");
  add_seed(tr, train_cmd);
  add_model_flags(tr, train_cmd);
  add_loss_flags(tr, train_cmd);
  tr.overrides.add<std::size_t>(train_cmd, "--epochs", defaults.train.epochs,
                                [](RunConfig& r, const std::size_t& v) { r.train.epochs = v; }, "Training epochs");
  tr.overrides.add<std::size_t>(train_cmd, "--batch-size", defaults.train.batch_size,
                                [](RunConfig& r, const std::size_t& v) { r.train.batch_size = v; }, "Clips per step");
  tr.overrides.add<float>(train_cmd, "--lr", defaults.train.adam.lr,
                          [](RunConfig& r, const float& v) { r.train.adam.lr = v; }, "Adam learning rate");
  tr.overrides.add<std::size_t>(train_cmd, "--clip-len", defaults.train.clip_len,
                                [](RunConfig& r, const std::size_t& v) { r.train.clip_len = v; }, "Frames per clip");
  tr.overrides.add<std::size_t>(train_cmd, "--clip-stride", defaults.train.stride,
                                [](RunConfig& r, const std::size_t& v) { r.train.stride = v; },
                                "Frames between clip starts");
  tr.overrides.add<float>(train_cmd, "--grad-clip", 0.0f,
                          [](RunConfig& r, const float& v) {
                            r.train.grad_clip = v > 0.0f ? std::optional<float>(v) : std::nullopt;
                          },
                          "Max global gradient norm (0 disables)");
  tr.overrides.add<std::size_t>(train_cmd, "--val-videos", defaults.val_videos,
                                [](RunConfig& r, const std::size_t& v) { r.val_videos = v; },
                                "Training videos held out for model selection");
  tr.overrides.add<std::size_t>(train_cmd, "--threads", defaults.train.threads,
                                [](RunConfig& r, const std::size_t& v) { r.train.threads = v; }, "Worker threads");

  // eval
  Common ev;
  std::string ev_ckpt, ev_data, ev_report, ev_dets;
  auto* eval_cmd = app.add_subcommand("eval", "Run inference on <data-dir>/test and score it");
  eval_cmd->add_option("--config", ev.config_path, "Run configuration JSON (inference section)");
  eval_cmd->add_option("--checkpoint", ev_ckpt, "Checkpoint path")->required();
  eval_cmd->add_option("--data-dir", ev_data, "Dataset directory")->required();
  eval_cmd->add_option("--report", ev_report, "Report JSON path");
  eval_cmd->add_option("--detections", ev_dets, "Detections CSV path");
  add_inference_flags(ev, eval_cmd);
  ev.overrides.add<double>(eval_cmd, "--theta", defaults.inference.theta,
                           [](RunConfig& r, const double& v) { r.inference.theta = v; },
                           "Minimum probability for a detection");
  ev.overrides.add<std::size_t>(eval_cmd, "--nms-radius", 0,
                                [](RunConfig& r, const std::size_t& v) { r.inference.nms_radius = v; },
                                "Keep only local maxima within this many frames (default: off)");

  // score
  std::string sc_dets, sc_ann, sc_report;
  auto* score_cmd = app.add_subcommand("score", "Score a detections CSV against an annotations CSV");
  score_cmd->add_option("--detections", sc_dets, "Detections CSV")->required();
  score_cmd->add_option("--annotations", sc_ann, "Annotations CSV")->required();
  score_cmd->add_option("--report", sc_report, "Report JSON path");

  // bench
  Common bn;
  std::string bn_ckpt, bn_feat, bn_report, bn_steps;
  std::size_t bn_repeats = 5;
  auto* bench_cmd = app.add_subcommand("bench", "Measure inference latency on one feature file");
  bench_cmd->add_option("--checkpoint", bn_ckpt, "Checkpoint path")->required();
  bench_cmd->add_option("--features", bn_feat, "Feature file (.otrf)")->required();
  bench_cmd->add_option("--repeats", bn_repeats, "Timed passes after one warm-up")->capture_default_str();
  bench_cmd->add_option("--report", bn_report, "Report JSON path");
  bench_cmd->add_option("--step-times", bn_steps, "Per-step timings CSV path");
  add_inference_flags(bn, bench_cmd);

  // gradcheck
  Common gc;
  std::string gc_report;
  std::size_t gc_frames = 8, gc_max_entries = 256;
  float gc_step = 1e-5f;
  double gc_tol = nk::GradCheckOptions{}.tolerance;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference audit of every model parameter");
  gc_cmd->add_option("--config", gc.config_path, "Run configuration JSON (model and loss sections)");
  add_seed(gc, gc_cmd);
  add_model_flags(gc, gc_cmd);
  add_loss_flags(gc, gc_cmd);
  gc_cmd->add_option("--frames", gc_frames, "Sequence length")->capture_default_str();
  gc_cmd->add_option("--step", gc_step, "Finite-difference step")->capture_default_str();
  gc_cmd->add_option("--tolerance", gc_tol, "Maximum relative error per tensor")->capture_default_str();
  gc_cmd->add_option("--max-entries", gc_max_entries, "Entries checked per tensor (0 = all)")->capture_default_str();
  gc_cmd->add_option("--report", gc_report, "Report JSON path");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: usage: " << one_line(e.what()) << '\n';
    return kExitUsage;
  }

  try {
    if (*gen_cmd) {
      const RunConfig c = gen.resolve();
      data::SynthSpec spec = c.synth;
      spec.num_videos = c.train_videos + c.test_videos;
      data::Dataset all = data::generate_synthetic(spec);
      data::Dataset test = train::split_validation(all, c.test_videos);
      fs::create_directories(gen_out);
      data::write_dataset(fs::path(gen_out) / "train", all);
      data::write_dataset(fs::path(gen_out) / "test", test);
      write_json(fs::path(gen_out) / "config.json", config::to_json(c));
      out << "wrote " << all.videos.size() << " train videos (" << all.actions.size() << " actions) and "
          << test.videos.size() << " test videos (" << test.actions.size() << " actions) to " << gen_out << '\n';
      return kExitOk;
    }

    if (*train_cmd) {
      const RunConfig c = tr.resolve();
      data::Dataset train_set = data::read_dataset(split_dir(tr_data, "train"));
      data::Dataset val_set = train::split_validation(train_set, c.val_videos);
      const auto result = train::train(train_set, val_set, c.train, std::nullopt,
                                       [&](const train::EpochRecord& r, const train::TrainState&) {
                                         char line[160];
                                         std::snprintf(line, sizeof line, "epoch %3zu  loss %.6f  val mp-mAP %s\n",
                                                       r.epoch, r.train_loss,
                                                       r.val_mp_map ? std::to_string(100.0 * *r.val_mp_map).c_str()
                                                                    : "n/a");
                                         out << line << std::flush;
                                       });
      train::save_checkpoint(tr_out, result.best, c.train);
      Json h;
      h["config"] = config::to_json(c);
      h["best_epoch"] = result.best_epoch;
      Json epochs = Json::array();
      for (const auto& r : result.history) {
        Json e;
        e["epoch"] = r.epoch;
        e["train_loss"] = r.train_loss;
        e["val_mp_map"] = r.val_mp_map ? Json(100.0 * *r.val_mp_map) : Json(nullptr);
        epochs.push_back(e);
      }
      h["epochs"] = epochs;
      write_json(tr_history.empty() ? fs::path(tr_out + ".history.json") : fs::path(tr_history), h);
      out << "best epoch " << result.best_epoch << ", checkpoint " << tr_out << '\n';
      return kExitOk;
    }

    if (*eval_cmd) {
      const RunConfig c = ev.resolve();
      const train::Checkpoint ck = train::load_checkpoint(ev_ckpt);
      const data::Dataset test = data::read_dataset(split_dir(ev_data, "test"));
      inference::InferenceStats stats;
      const auto dets = detect_all(ck, test, c, stats);
      if (!ev_dets.empty()) data::write_detections(ev_dets, dets);
      Json j;
      j["mode"] = c.inference.mode.name();
      if (c.inference.mode.kind == inference::InferenceMode::Kind::SlidingWindow) {
        j["window"] = c.inference.mode.window;
        j["stride"] = c.inference.mode.stride;
      }
      j["theta"] = c.inference.theta;
      j["nms_radius"] = c.inference.nms_radius ? Json(*c.inference.nms_radius) : Json(nullptr);
      j["videos"] = test.videos.size();
      j["forward_steps"] = stats.steps;
      const Json scores = score_json(dets, test.actions);
      for (const auto& [k, v] : scores.items()) j[k] = v;
      if (!ev_report.empty()) write_json(ev_report, j);
      out << metrics::format_table(metrics::mp_map(dets, test.actions));
      return kExitOk;
    }

    if (*score_cmd) {
      const auto dets = data::read_detections(sc_dets);
      const auto gts = data::read_annotations(sc_ann);
      const Json j = score_json(dets, gts);
      if (!sc_report.empty()) write_json(sc_report, j);
      out << metrics::format_table(metrics::mp_map(dets, gts));
      return kExitOk;
    }

    if (*bench_cmd) {
      const RunConfig c = bn.resolve();
      const train::Checkpoint ck = train::load_checkpoint(bn_ckpt);
      const data::FeatureSequence seq = data::read_features(bn_feat);
      const auto rep = inference::benchmark(ck.state.params, seq, c.inference.mode, bn_repeats);
      const Json j = inference::to_json(rep);
      if (!bn_report.empty()) write_json(bn_report, j);
      if (!bn_steps.empty()) inference::write_step_times(bn_steps, rep);
      out << j.dump(2) << '\n';
      return kExitOk;
    }

    if (*gc_cmd) {
      const RunConfig c = gc.resolve();
      nk::GradCheckOptions opts;
      opts.step = gc_step;
      opts.tolerance = gc_tol;
      opts.max_entries_per_tensor = gc_max_entries;
      opts.seed = c.train.seed;
      const auto rep = train::audit_gradients(c.train.model, c.train.loss, gc_frames, c.train.seed, opts);
      Json j;
      j["tolerance"] = rep.tolerance;
      j["max_rel_error"] = rep.max_rel_error();
      j["passed"] = rep.passed();
      Json tensors = Json::array();
      char line[200];
      for (const auto& e : rep.entries) {
        Json t;
        t["name"] = e.name;
        t["checked"] = e.checked;
        t["max_abs_error"] = e.max_abs_error;
        t["rel_error"] = e.rel_error;
        tensors.push_back(t);
        std::snprintf(line, sizeof line, "%-32s %8zu  abs %.3e  rel %.3e\n", e.name.c_str(), e.checked,
                      e.max_abs_error, e.rel_error);
        out << line;
      }
      j["tensors"] = tensors;
      if (!gc_report.empty()) write_json(gc_report, j);
      if (!rep.passed()) {
        err << "error: gradcheck: max relative error " << rep.max_rel_error() << " >= tolerance " << rep.tolerance
            << '\n';
        return kExitFailure;
      }
      out << "gradcheck passed: max relative error " << rep.max_rel_error() << '\n';
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    err << "error: config: " << one_line(e.what()) << '\n';
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "error: data: " << one_line(e.what()) << '\n';
    return kExitData;
  } catch (const DimensionError& e) {
    err << "error: data: " << one_line(e.what()) << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "error: data: " << one_line(e.what()) << '\n';
    return kExitData;
  } catch (const TrainingError& e) {
    err << "error: training: " << one_line(e.what()) << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: internal: " << one_line(e.what()) << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace otr::cli
