// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "otr/checkpoint.hpp"
#include "otr/config.hpp"
#include "otr/data/synthetic.hpp"
#include "otr/detection.hpp"
#include "otr/error.hpp"
#include "otr/inference.hpp"
#include "otr/metrics.hpp"
#include "otr/ssm/model.hpp"
#include "otr/train.hpp"

namespace py = pybind11;
using namespace otr;
using Json = config::Json;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Json to_cpp_json(const py::object& obj) {
  if (obj.is_none()) return Json::object();
  const auto text = py::module_::import("json").attr("dumps")(obj).cast<std::string>();
  return Json::parse(text);
}

py::object to_py_json(const Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nk::Tensor tensor_from(const FloatArray& a) {
  if (a.ndim() != 2) throw DimensionError("expected a 2-d array, got " + std::to_string(a.ndim()) + " dims");
  const auto rows = static_cast<std::size_t>(a.shape(0)), cols = static_cast<std::size_t>(a.shape(1));
  return nk::Tensor({rows, cols}, std::vector<float>(a.data(), a.data() + rows * cols));
}

py::array_t<float> array_from(const nk::Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<float> out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

data::FeatureSequence sequence_from(const FloatArray& features, double fps, const std::string& video_id) {
  data::FeatureSequence fs;
  fs.video_id = video_id;
  fs.fps = fps;
  fs.features = tensor_from(features);
  return fs;
}

ActionClass class_from(const std::string& name) {
  const auto c = parse_foreground_class(name);
  if (!c) throw ConfigError("unknown action class '" + name + "' (expected take or release)");
  return *c;
}

// Streaming wrapper: one state, one frame per call.
class Stream {
 public:
  explicit Stream(ssm::ModelParams params) : params_(std::move(params)), state_(ssm::reset_state(params_.config)) {}
  py::array_t<float> step(const FloatArray& frame) {
    if (frame.ndim() != 1) throw DimensionError("step expects a 1-d frame");
    std::vector<float> logits =
        ssm::forward_step(params_, state_, std::span<const float>(frame.data(), static_cast<std::size_t>(frame.size())));
    std::vector<float> probs(logits.size());
    inference::softmax_row(logits, probs);
    return py::array_t<float>(static_cast<py::ssize_t>(probs.size()), probs.data());
  }
  void reset() { state_ = ssm::reset_state(params_.config); }
  std::size_t state_bytes() const { return state_.bytes(); }
  std::uint64_t frames_seen() const { return state_.frames_seen; }

 private:
  ssm::ModelParams params_;
  ssm::StreamState state_;
};

}  // namespace

PYBIND11_MODULE(otr, m) {
  m.doc() = "Online take/release detection with a selective state-space model";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

  py::class_<GroundTruthAction>(m, "Action")
      .def(py::init([](std::string video_id, const std::string& cls, double end_time) {
             return GroundTruthAction{std::move(video_id), class_from(cls), end_time};
           }),
           py::arg("video_id"), py::arg("cls"), py::arg("end_time"))
      .def_readonly("video_id", &GroundTruthAction::video_id)
      .def_property_readonly("cls", [](const GroundTruthAction& a) { return std::string(to_string(a.cls)); })
      .def_readonly("end_time", &GroundTruthAction::end_time)
      .def("__repr__", [](const GroundTruthAction& a) {
        return "Action(" + a.video_id + ", " + std::string(to_string(a.cls)) + ", " + std::to_string(a.end_time) + ")";
      });

  py::class_<Detection>(m, "Detection")
      .def(py::init([](std::string video_id, const std::string& cls, double time, double score) {
             return Detection{std::move(video_id), class_from(cls), time, score};
           }),
           py::arg("video_id"), py::arg("cls"), py::arg("time"), py::arg("score"))
      .def_readonly("video_id", &Detection::video_id)
      .def_property_readonly("cls", [](const Detection& d) { return std::string(to_string(d.cls)); })
      .def_readonly("time", &Detection::time)
      .def_readonly("score", &Detection::score);

  py::class_<data::FeatureSequence>(m, "Video")
      .def(py::init(&sequence_from), py::arg("features"), py::arg("fps") = 4.0, py::arg("video_id") = "video")
      .def_readonly("video_id", &data::FeatureSequence::video_id)
      .def_readonly("fps", &data::FeatureSequence::fps)
      .def_property_readonly("num_frames", &data::FeatureSequence::num_frames)
      .def_property_readonly("features", [](const data::FeatureSequence& fs) { return array_from(fs.features); });

  py::class_<data::Dataset>(m, "Dataset")
      .def(py::init<>())
      .def_readwrite("videos", &data::Dataset::videos)
      .def_readwrite("actions", &data::Dataset::actions)
      .def("split_validation", &train::split_validation, py::arg("count"),
           "Moves the last `count` videos and their actions into a new dataset.")
      .def("save", [](const data::Dataset& ds, const std::filesystem::path& dir) { data::write_dataset(dir, ds); })
      .def_static("load", &data::read_dataset, py::arg("dir"));

  m.def(
      "generate_synthetic",
      [](const py::object& spec, std::size_t num_videos) {
        data::SynthSpec s = config::synth_from_json(to_cpp_json(spec));
        s.num_videos = num_videos;
        s.validate();
        return data::generate_synthetic(s);
      },
      py::arg("spec") = py::none(), py::arg("num_videos") = 10,
      "Synthetic dataset from a dict of generator settings (missing keys use defaults).");

  m.def("default_config", []() { return to_py_json(config::to_json(config::RunConfig{})); },
        "Default run configuration as a dict.");

  py::class_<ssm::ModelParams>(m, "Model")
      .def_property_readonly("config", [](const ssm::ModelParams& p) { return to_py_json(config::to_json(p.config)); })
      .def_property_readonly("num_parameters", &ssm::count_params)
      .def("parameters",
           [](const ssm::ModelParams& p) {
             py::dict out;
             for (const auto& nt : p.named()) out[py::str(nt.name)] = array_from(nt.tensor);
             return out;
           })
      .def(
          "forward", [](const ssm::ModelParams& p, const FloatArray& x) { return array_from(ssm::forward_sequence(p, tensor_from(x))); },
          py::arg("features"), "Logits [T x 3] for a whole sequence.")
      .def("stream", [](const ssm::ModelParams& p) { return Stream(p); });

  py::class_<Stream>(m, "Stream")
      .def("step", &Stream::step, py::arg("frame"), "Class probabilities for the next frame.")
      .def("reset", &Stream::reset)
      .def_property_readonly("state_bytes", &Stream::state_bytes)
      .def_property_readonly("frames_seen", &Stream::frames_seen);

  m.def(
      "init_model",
      [](const py::object& model, std::uint64_t seed) { return ssm::init_model(config::model_from_json(to_cpp_json(model)), seed); },
      py::arg("model") = py::none(), py::arg("seed") = 0);

  m.def(
      "train",
      [](const data::Dataset& train_set, const data::Dataset& val_set, const py::object& cfg) {
        const train::TrainConfig tc = config::train_from_json(to_cpp_json(cfg));
        train::TrainResult r;
        {
          py::gil_scoped_release release;
          r = train::train(train_set, val_set, tc);
        }
        py::list history;
        for (const auto& e : r.history) {
          py::dict d;
          d["epoch"] = e.epoch;
          d["train_loss"] = e.train_loss;
          d["val_mp_map"] = e.val_mp_map ? py::cast(100.0 * *e.val_mp_map) : py::none();
          history.append(d);
        }
        return py::make_tuple(r.best.params, r.best_epoch, history);
      },
      py::arg("train_set"), py::arg("val_set"), py::arg("config") = py::none(),
      "Returns (best model, best epoch, history).");

  m.def(
      "load_model", [](const std::filesystem::path& path) { return train::load_checkpoint(path).state.params; },
      py::arg("path"));

  m.def(
      "infer",
      [](const ssm::ModelParams& p, const data::FeatureSequence& video, const std::string& mode, std::size_t window,
         std::size_t stride) {
        inference::InferenceMode im;
        im.kind = inference::parse_mode(mode);
        im.window = window;
        im.stride = stride;
        return array_from(inference::infer(p, video, im).probs);
      },
      py::arg("model"), py::arg("video"), py::arg("mode") = "streaming", py::arg("window") = 20,
      py::arg("stride") = 20, "Per-frame class probabilities [T x 3].");

  m.def(
      "extract_detections",
      [](const FloatArray& probs, double fps, const std::string& video_id, double theta,
         std::optional<std::size_t> nms_radius) {
        detection::FrameProbs fp{video_id, fps, tensor_from(probs)};
        return detection::extract_detections(fp, {theta, nms_radius});
      },
      py::arg("probs"), py::arg("fps") = 4.0, py::arg("video_id") = "video", py::arg("theta") = 0.0,
      py::arg("nms_radius") = py::none());

  m.def(
      "mp_map",
      [](const std::vector<Detection>& dets, const std::vector<GroundTruthAction>& gts) {
        return to_py_json(metrics::to_json(metrics::mp_map(dets, gts)));
      },
      py::arg("detections"), py::arg("actions"), "Point-level mAP report in percent.");

  m.def("detections_per_gt", &metrics::detections_per_gt, py::arg("detections"), py::arg("actions"),
        py::arg("radius") = 1.0);
}
