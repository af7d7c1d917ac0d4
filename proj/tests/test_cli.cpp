#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "otr/cli.hpp"
#include "otr/config.hpp"
#include "otr/error.hpp"

namespace fs = std::filesystem;
using namespace otr;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("otr_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream f(p);
  return nlohmann::json::parse(f);
}

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(run({"--help"}).code == cli::kExitOk);
  CHECK(run({"train", "--help"}).code == cli::kExitOk);
  const auto bad = run({"train", "--no-such-flag"});
  CHECK(bad.code == cli::kExitUsage);
  CHECK(bad.err.rfind("error: usage:", 0) == 0);
  CHECK(run({"frobnicate"}).code == cli::kExitUsage);
  CHECK(run({"eval", "--checkpoint"}).code == cli::kExitUsage);
}

TEST_CASE("missing inputs are data errors") {
  const auto dir = scratch("missing");
  const auto r = run({"score", "--detections", (dir / "none.csv").string(), "--annotations",
                      (dir / "none2.csv").string()});
  CHECK(r.code == cli::kExitData);
  CHECK(r.err.rfind("error: data:", 0) == 0);
  const auto e = run({"eval", "--checkpoint", (dir / "none.ckpt").string(), "--data-dir", dir.string()});
  CHECK(e.code == cli::kExitData);
}

TEST_CASE("bad config values") {
  const auto dir = scratch("config");
  {
    std::ofstream f(dir / "bad.json");
    f << R"({"train": {"epochs": 2, "bogus": 1}})";
  }
  const auto r = run({"gen", "--config", (dir / "bad.json").string(), "--out-dir", (dir / "d").string()});
  CHECK(r.code == cli::kExitUsage);
  CHECK(r.err.rfind("error: config:", 0) == 0);
  CHECK(run({"eval", "--checkpoint", "x", "--data-dir", "y", "--theta", "1.5"}).code == cli::kExitUsage);
  CHECK(run({"eval", "--checkpoint", "x", "--data-dir", "y", "--mode", "batch"}).code == cli::kExitUsage);
}

TEST_CASE("run config json round trip") {
  config::RunConfig c;
  c.train.epochs = 3;
  c.train.loss.gamma = 1.5;
  c.synth.seed = 77;
  c.inference.mode = inference::InferenceMode::sliding(12, 6);
  c.inference.nms_radius = 2;
  const auto j = config::to_json(c);
  const auto back = config::run_from_json(j);
  CHECK(config::to_json(back) == j);
  CHECK(back.inference == c.inference);

  auto extra = j;
  extra["train"]["typo"] = 1;
  CHECK_THROWS_AS(config::run_from_json(extra), ConfigError);
  auto wrong = j;
  wrong["train"]["epochs"] = "three";
  CHECK_THROWS_AS(config::run_from_json(wrong), ConfigError);
}

TEST_CASE("gen, train, eval and score") {
  const auto dir = scratch("pipeline");
  const std::string data = (dir / "data").string();
  auto r = run({"gen", "--out-dir", data, "--seed", "3", "--train-videos", "5", "--test-videos", "2", "--frames",
                "160", "--feature-dim", "8"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(dir / "data" / "train" / "annotations.csv"));
  CHECK(fs::exists(dir / "data" / "test" / "annotations.csv"));
  CHECK(fs::exists(dir / "data" / "config.json"));

  const std::string ckpt = (dir / "model.ckpt").string();
  r = run({"train", "--data-dir", data, "--out", ckpt, "--feature-dim", "8", "--model-dim", "8", "--state-dim", "4",
           "--layers", "1", "--epochs", "2", "--val-videos", "1", "--clip-len", "40", "--threads", "1"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(ckpt));
  const auto hist = read_json(ckpt + ".history.json");
  CHECK(hist["epochs"].size() == 2);

  const std::string report = (dir / "report.json").string(), dets = (dir / "dets.csv").string();
  r = run({"eval", "--checkpoint", ckpt, "--data-dir", data, "--report", report, "--detections", dets, "--theta",
           "0.2"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto rep = read_json(report);
  CHECK(rep["mode"] == "streaming");
  CHECK(rep["videos"] == 2);
  CHECK(rep["forward_steps"] == 320);

  const std::string sliding = (dir / "sliding.json").string();
  r = run({"eval", "--checkpoint", ckpt, "--data-dir", data, "--report", sliding, "--mode", "sliding", "--window",
           "20", "--stride", "10"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(read_json(sliding)["window"] == 20);
  CHECK(read_json(sliding)["forward_steps"] == 2 * 15 * 20);

  const std::string scored = (dir / "scored.json").string();
  r = run({"score", "--detections", dets, "--annotations", (dir / "data" / "test" / "annotations.csv").string(),
           "--report", scored});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(read_json(scored)["mp_map"].get<double>() == doctest::Approx(rep["mp_map"].get<double>()).epsilon(1e-4));

  fs::path video;
  for (const auto& e : fs::directory_iterator(dir / "data" / "test")) {
    if (e.path().extension() == ".otrf") video = e.path();
  }
  const std::string bench = (dir / "bench.json").string();
  r = run({"bench", "--checkpoint", ckpt, "--features", video.string(), "--repeats", "3", "--report", bench});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(read_json(bench)["frames"] == 160);
  CHECK(run({"bench", "--checkpoint", ckpt, "--features", video.string(), "--repeats", "2"}).code == cli::kExitUsage);
}

TEST_CASE("gradcheck subcommand") {
  const auto dir = scratch("gradcheck");
  const auto r = run({"gradcheck", "--feature-dim", "6", "--model-dim", "8", "--state-dim", "4", "--layers", "1",
                      "--frames", "6", "--report", (dir / "gc.json").string()});
  CHECK_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(dir / "gc.json"));
}

TEST_CASE("score reproduces the hand AP fixture") {
  const auto dir = scratch("score");
  {
    std::ofstream a(dir / "gt.csv");
    a << "video_id,class,end_time_s\nv,take,10\nv,take,20\n";
    std::ofstream d(dir / "det.csv");
    d << "video_id,class,time_s,score\nv,take,10,0.9\nv,take,50,0.8\nv,take,20,0.7\n";
  }
  const auto r = run({"score", "--detections", (dir / "det.csv").string(), "--annotations", (dir / "gt.csv").string(),
                      "--report", (dir / "r.json").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto j = read_json(dir / "r.json");
  // Every threshold from 1 s to 10 s sees TP, FP, TP; release has no data and is skipped.
  CHECK(j["mp_map"].get<double>() == doctest::Approx(83.33333333).epsilon(1e-8));
}

TEST_CASE("a window longer than the video scores like streaming") {
  const auto dir = scratch("window");
  const std::string data = (dir / "data").string(), ckpt = (dir / "m.ckpt").string();
  REQUIRE(run({"gen", "--out-dir", data, "--train-videos", "5", "--test-videos", "2", "--frames", "120",
               "--feature-dim", "8"}).code == 0);
  REQUIRE(run({"train", "--data-dir", data, "--out", ckpt, "--feature-dim", "8", "--model-dim", "8", "--layers", "1",
               "--epochs", "1", "--val-videos", "1"}).code == 0);
  const std::string a = (dir / "a.json").string(), b = (dir / "b.json").string();
  REQUIRE(run({"eval", "--checkpoint", ckpt, "--data-dir", data, "--report", a}).code == 0);
  REQUIRE(run({"eval", "--checkpoint", ckpt, "--data-dir", data, "--report", b, "--mode", "sliding", "--window",
               "1000000", "--stride", "7"}).code == 0);
  CHECK(read_json(a)["mp_map"] == read_json(b)["mp_map"]);
  CHECK(read_json(a)["thresholds"] == read_json(b)["thresholds"]);
}
