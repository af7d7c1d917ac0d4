#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <unistd.h>

#include "doctest.h"
#include "otr/data/clips.hpp"
#include "otr/data/formats.hpp"
#include "otr/data/synthetic.hpp"
#include "otr/error.hpp"
#include "otr/metrics.hpp"

using namespace otr;
using namespace otr::data;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("otr_test_data_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static inline int counter = 0;
};

std::vector<char> slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::vector<char>& b) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f.write(b.data(), static_cast<std::streamsize>(b.size()));
}

void spit(const fs::path& p, const std::string& s) { spit(p, std::vector<char>(s.begin(), s.end())); }

std::uint64_t format_offset(const fs::path& p) {
  try {
    read_features(p);
  } catch (const FormatError& e) {
    return e.offset();
  }
  FAIL("expected FormatError");
  return 0;
}

FeatureSequence sample_features() {
  FeatureSequence s;
  s.video_id = "clip";
  s.fps = 4.0;
  std::vector<float> v(5 * 3);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(static_cast<float>(i) * 1.7f) * 1e3f;
  v[4] = -0.0f;
  v[7] = 1e-40f;  // subnormal
  s.features = nk::Tensor({5, 3}, v);
  return s;
}

}  // namespace

TEST_CASE("feature files round-trip bit for bit") {
  TempDir dir;
  const auto s = sample_features();
  write_features(dir.path / "clip.otrf", s);
  const auto r = read_features(dir.path / "clip.otrf");
  CHECK(r.video_id == "clip");
  CHECK(r.fps == 4.0);
  CHECK(r.features.shape() == s.features.shape());
  CHECK(std::memcmp(r.features.data().data(), s.features.data().data(), s.features.size() * 4) == 0);
}

TEST_CASE("damaged feature files") {
  TempDir dir;
  const fs::path p = dir.path / "clip.otrf";
  write_features(p, sample_features());
  const auto good = slurp(p);

  auto bad = good;
  bad[0] = 'X';
  spit(p, bad);
  CHECK(format_offset(p) == 0);

  bad = good;
  bad[4] = 9;
  spit(p, bad);
  CHECK(format_offset(p) == 4);

  bad = good;
  bad.resize(good.size() - 3);
  spit(p, bad);
  CHECK(format_offset(p) == good.size() - 3);

  bad = good;
  bad.push_back(0);
  spit(p, bad);
  CHECK(format_offset(p) == good.size());

  bad = good;
  const float nan = NAN;
  std::memcpy(bad.data() + 20 + 4 * 6, &nan, 4);
  spit(p, bad);
  CHECK(format_offset(p) == 20 + 4 * 6);

  CHECK_THROWS_AS(read_features(dir.path / "missing.otrf"), FormatError);
}

TEST_CASE("annotation and detection CSVs") {
  TempDir dir;
  const std::vector<GroundTruthAction> acts{{"a", ActionClass::Take, 1.25}, {"b", ActionClass::Release, 0.1 + 0.2}};
  write_annotations(dir.path / "ann.csv", acts);
  const auto ra = read_annotations(dir.path / "ann.csv");
  REQUIRE(ra.size() == 2);
  CHECK(ra[1].cls == ActionClass::Release);
  CHECK(ra[1].end_time == 0.1 + 0.2);

  const std::vector<Detection> dets{{"a", ActionClass::Take, 2.0, 0.9}, {"a", ActionClass::Release, 2.25, 1.0 / 3.0}};
  write_detections(dir.path / "det.csv", dets);
  const auto rd = read_detections(dir.path / "det.csv");
  REQUIRE(rd.size() == 2);
  CHECK(rd[1].score == 1.0 / 3.0);

  spit(dir.path / "bad.csv", "video_id,class,end_time_s\na,take,1.0\na,grab,2.0\n");
  try {
    read_annotations(dir.path / "bad.csv");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 3);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  spit(dir.path / "bad2.csv", "video_id,class,time_s,score\na,take,1.0,1.5\n");
  CHECK_THROWS_AS(read_detections(dir.path / "bad2.csv"), FormatError);
  spit(dir.path / "bad3.csv", "vid,cls,t\n");
  CHECK_THROWS_AS(read_annotations(dir.path / "bad3.csv"), FormatError);
}

TEST_CASE("dataset directories") {
  TempDir dir;
  SynthSpec spec;
  spec.num_videos = 3;
  spec.frames_per_video = 200;
  const auto ds = generate_synthetic(spec);
  write_dataset(dir.path, ds);
  const auto back = read_dataset(dir.path);
  REQUIRE(back.videos.size() == 3);
  CHECK(back.videos[0].video_id == "vid0000");
  CHECK(back.actions.size() == ds.actions.size());
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(std::equal(back.videos[i].features.data().begin(), back.videos[i].features.data().end(),
                     ds.videos[i].features.data().begin()));
  CHECK_THROWS_AS(read_dataset(dir.path / "nope"), FormatError);
}

TEST_CASE("synthetic generation is seeded") {
  SynthSpec spec;
  spec.num_videos = 2;
  spec.frames_per_video = 300;
  const auto a = generate_synthetic(spec), b = generate_synthetic(spec);
  spec.seed = 1;
  const auto c = generate_synthetic(spec);
  CHECK(std::equal(a.videos[1].features.data().begin(), a.videos[1].features.data().end(),
                   b.videos[1].features.data().begin()));
  CHECK_FALSE(std::equal(a.videos[1].features.data().begin(), a.videos[1].features.data().end(),
                         c.videos[1].features.data().begin()));
}

TEST_CASE("synthetic action count follows the rate") {
  SynthSpec spec;  // 10 videos x 2400 frames at 4 fps, 4 actions per minute
  const auto ds = generate_synthetic(spec);
  const double minutes = 10.0 * 2400.0 / 4.0 / 60.0;
  const double expect = spec.actions_per_minute * minutes;
  CHECK(expect == 400.0);
  CHECK(std::fabs(static_cast<double>(ds.actions.size()) - expect) <= 3.0 * std::sqrt(expect));
  for (const auto& a : ds.actions) CHECK(a.end_time < 600.0);
}

TEST_CASE("synthetic spec validation") {
  SynthSpec s;
  s.frames_per_video = 5;
  CHECK_THROWS_AS(generate_synthetic(s), ConfigError);
  s = SynthSpec{};
  s.actions_per_minute = 60.0;  // one action every 4 frames, shorter than the 8-frame mean duration
  CHECK_THROWS_AS(generate_synthetic(s), ConfigError);
  CHECK(dims_per_class(32) == 8);
  CHECK(dims_per_class(3) == 1);
}

TEST_CASE("noise-free features are linearly separable at end frames") {
  SynthSpec spec;
  spec.noise_sigma = 0.0f;
  spec.num_videos = 4;
  const auto ds = generate_synthetic(spec);
  const std::size_t K = dims_per_class(spec.feature_dim);
  // Probe: mean of the class's dims, fired at 0.95 of the peak height.
  std::vector<Detection> dets;
  for (const auto& v : ds.videos) {
    for (std::size_t t = 0; t < v.num_frames(); ++t) {
      for (std::size_t c = 0; c < 2; ++c) {
        double s = 0.0;
        for (std::size_t k = 0; k < K; ++k) s += v.features.at(t, c * K + k);
        s /= static_cast<double>(K);
        if (s >= 0.95 * spec.amplitude) dets.push_back({v.video_id, kForegroundClasses[c], frame_to_time(t, 4.0), 1.0});
      }
    }
  }
  for (ActionClass cls : kForegroundClasses) {
    const auto m = metrics::match_greedy(dets, ds.actions, 1.0, cls);
    CHECK(m.num_gt > 0);
    CHECK(m.fn == 0);
  }
}

TEST_CASE("clip chunking") {
  FeatureSequence fs;
  fs.video_id = "v";
  fs.features = nk::Tensor::zeros({40, 2});
  const std::vector<GroundTruthAction> acts{{"v", ActionClass::Take, 25.0 / 4.0}, {"w", ActionClass::Take, 1.0}};
  const auto disjoint = chunk_video(fs, acts, 20, 20);
  CHECK(disjoint.size() == 2);
  const auto overlap = chunk_video(fs, acts, 20, 10);
  CHECK(overlap.size() == 3);
  for (const auto& c : overlap) {
    const bool covers = c.start_frame <= 25 && 25 < c.start_frame + 20;
    CHECK(c.targets.positives.size() == (covers ? 1u : 0u));
    if (covers) CHECK(c.targets.positives[0] == 25 - c.start_frame);
  }
  for (std::size_t T : {20u, 21u, 57u, 100u}) {
    for (std::size_t stride : {1u, 3u, 7u, 20u}) {
      fs.features = nk::Tensor::zeros({T, 2});
      const auto clips = chunk_video(fs, {}, 20, stride);
      CHECK(clips.size() == (T - 20) / stride + 1);
      std::vector<bool> seen(T, false);
      for (const auto& c : clips)
        for (std::size_t i = 0; i < 20; ++i) seen[c.start_frame + i] = true;
      const std::size_t last_end = clips.back().start_frame + 20;
      CHECK(std::all_of(seen.begin(), seen.begin() + static_cast<std::ptrdiff_t>(last_end), [](bool b) { return b; }));
    }
  }
  fs.features = nk::Tensor::zeros({10, 2});
  CHECK(chunk_video(fs, {}, 20, 20).empty());
  CHECK_THROWS_AS(chunk_video(fs, {}, 20, 21), ConfigError);
  CHECK_THROWS_AS(chunk_video(fs, {}, 20, 0), ConfigError);
}
