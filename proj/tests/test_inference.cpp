#include <cmath>
#include <random>

#include "doctest.h"
#include "otr/error.hpp"
#include "otr/inference.hpp"
#include "otr/ssm/model.hpp"

using namespace otr;
using namespace otr::inference;
using otr::nk::Tensor;

namespace {

ssm::ModelParams small_model(std::uint64_t seed = 1) {
  ssm::ModelConfig cfg;
  cfg.feature_dim = 8;
  cfg.model_dim = 16;
  cfg.state_dim = 4;
  cfg.num_layers = 2;
  return ssm::init_model(cfg, seed);
}

data::FeatureSequence random_video(std::size_t T, std::size_t D, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::vector<float> v(T * D);
  for (auto& x : v) x = n(rng);
  data::FeatureSequence fs;
  fs.video_id = "v" + std::to_string(seed);
  fs.features = Tensor({T, D}, std::move(v));
  return fs;
}

// Softmax of the whole-sequence forward run over frames [begin, end) only.
std::vector<float> window_probs(const ssm::ModelParams& p, const data::FeatureSequence& fs, std::size_t begin,
                                std::size_t end) {
  const std::size_t D = fs.feature_dim(), C = p.config.num_classes;
  const auto x = fs.features.data();
  Tensor sub({end - begin, D}, std::vector<float>(x.begin() + begin * D, x.begin() + end * D));
  const Tensor logits = ssm::forward_sequence(p, sub);
  std::vector<float> out((end - begin) * C);
  for (std::size_t t = 0; t < end - begin; ++t) {
    double z = 0.0, m = -1e30;
    for (std::size_t c = 0; c < C; ++c) m = std::max(m, double(logits.at(t * C + c)));
    for (std::size_t c = 0; c < C; ++c) z += std::exp(logits.at(t * C + c) - m);
    for (std::size_t c = 0; c < C; ++c) out[t * C + c] = float(std::exp(logits.at(t * C + c) - m) / z);
  }
  return out;
}

float max_diff(const Tensor& a, std::span<const float> b) {
  float worst = 0.0f;
  for (std::size_t i = 0; i < b.size(); ++i) worst = std::max(worst, std::fabs(a.at(i) - b[i]));
  return worst;
}

}  // namespace

TEST_CASE("streaming probabilities match the sequence forward") {
  const auto p = small_model();
  const auto fs = random_video(120, 8, 3);
  InferenceStats st;
  const auto fp = infer_streaming(p, fs, &st);
  CHECK(fp.video_id == fs.video_id);
  CHECK(fp.probs.dim(0) == 120);
  CHECK(max_diff(fp.probs, window_probs(p, fs, 0, 120)) < 1e-5f);
  CHECK(st.steps == 120);
  for (std::size_t t = 0; t < 120; ++t) {
    CHECK(fp.probs.at(t * 3) + fp.probs.at(t * 3 + 1) + fp.probs.at(t * 3 + 2) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("a window covering the whole video equals streaming") {
  const auto p = small_model();
  const auto fs = random_video(50, 8, 4);
  const auto s = infer_streaming(p, fs);
  for (std::size_t w : {50u, 64u}) {
    const auto sl = infer_sliding(p, fs, w, 7);
    CHECK(max_diff(sl.probs, s.probs.data()) == 0.0f);
  }
}

TEST_CASE("single frame video") {
  const auto p = small_model();
  const auto fs = random_video(1, 8, 5);
  InferenceStats a, b;
  CHECK(infer_streaming(p, fs, &a).probs.dim(0) == 1);
  CHECK(infer_sliding(p, fs, 20, 20, &b).probs.dim(0) == 1);
  CHECK(a.steps == 1);
  CHECK(b.steps == 1);
}

TEST_CASE("sliding frames come from the earliest covering window") {
  const auto p = small_model(2);
  const std::size_t T = 47, C = 3;
  const auto fs = random_video(T, 8, 6);
  struct Case { std::size_t w, s; };
  for (auto [w, s] : {Case{20, 20}, Case{10, 4}, Case{6, 9}, Case{5, 1}}) {
    if (s > w) continue;  // gaps are not covered
    CAPTURE(w);
    CAPTURE(s);
    InferenceStats st;
    const auto fp = infer_sliding(p, fs, w, s, &st);
    std::size_t expected_steps = 0;
    for (std::size_t k = 0;; ++k) {
      const std::size_t end = std::min(T, k * s + w);
      expected_steps += end - k * s;
      if (end == T) break;
    }
    CHECK(st.steps == expected_steps);
    if (s < w) CHECK(st.steps > T);
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t k = t + 1 > w ? (t + 1 - w + s - 1) / s : 0;
      const std::size_t begin = k * s, end = std::min(T, begin + w);
      REQUIRE(begin <= t);
      REQUIRE(t < end);
      const auto ref = window_probs(p, fs, begin, end);
      for (std::size_t c = 0; c < C; ++c) CHECK(fp.probs.at(t * C + c) == doctest::Approx(ref[(t - begin) * C + c]).epsilon(1e-5));
    }
  }
}

TEST_CASE("sliding resets its state at window starts") {
  const auto p = small_model(3);
  const auto fs = random_video(60, 8, 7);
  const auto s = infer_streaming(p, fs);
  const auto sl = infer_sliding(p, fs, 20, 20);
  // Identical before the first reset, different right after it.
  for (std::size_t i = 0; i < 20 * 3; ++i) CHECK(sl.probs.at(i) == s.probs.at(i));
  float after = 0.0f;
  for (std::size_t c = 0; c < 3; ++c) after = std::max(after, std::fabs(sl.probs.at(20 * 3 + c) - s.probs.at(20 * 3 + c)));
  CHECK(after > 0.0f);
  const auto first = window_probs(p, fs, 20, 40);
  CHECK(max_diff(Tensor({20, 3}, std::vector<float>(sl.probs.data().begin() + 60, sl.probs.data().begin() + 120)),
                 first) < 1e-5f);
}

TEST_CASE("state memory does not depend on video length") {
  const auto p = small_model();
  InferenceStats a, b;
  infer_streaming(p, random_video(10, 8, 1), &a);
  infer_streaming(p, random_video(2000, 8, 1), &b);
  CHECK(a.peak_state_bytes > 0);
  CHECK(a.peak_state_bytes == b.peak_state_bytes);
}

TEST_CASE("argument errors") {
  const auto p = small_model();
  const auto fs = random_video(10, 8, 1);
  CHECK_THROWS_AS(infer_sliding(p, fs, 0, 1), ConfigError);
  CHECK_THROWS_AS(infer_sliding(p, fs, 4, 0), ConfigError);
  CHECK_THROWS_AS(infer_streaming(p, random_video(10, 7, 1)), DimensionError);
  CHECK_THROWS_AS(benchmark(p, fs, InferenceMode::streaming(), 2), ConfigError);
  CHECK(parse_mode("streaming") == InferenceMode::Kind::Streaming);
  CHECK(parse_mode("sliding") == InferenceMode::Kind::SlidingWindow);
  CHECK_THROWS_AS(parse_mode("Streaming"), ConfigError);
  CHECK_THROWS_AS(parse_mode(""), ConfigError);
}

TEST_CASE("softmax row") {
  const std::vector<float> logits{1.0f, 2.0f, 3.0f};
  std::vector<float> probs(3);
  softmax_row(logits, probs);
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  CHECK(probs[0] == doctest::Approx(std::exp(1.0) / z).epsilon(1e-6));
  CHECK(probs[2] == doctest::Approx(std::exp(3.0) / z).epsilon(1e-6));
  const std::vector<float> big{1000.0f, 1000.0f, -1000.0f};
  softmax_row(big, probs);
  CHECK(probs[0] == doctest::Approx(0.5));
  CHECK(probs[2] == 0.0f);
}

TEST_CASE("benchmark report") {
  const auto p = small_model();
  const auto fs = random_video(40, 8, 2);
  const auto r = benchmark(p, fs, InferenceMode::sliding(10, 5), 3);
  CHECK(r.mode == "sliding");
  CHECK(r.frames == 40);
  CHECK(r.steps_per_video == 10 * 7);
  CHECK(r.step_us.size() == r.steps_per_video);
  CHECK(r.frame_us_median > 0.0);
  const auto j = to_json(r);
  CHECK(j["repeats"] == 3);
  CHECK_FALSE(j.contains("step_us"));
  const auto s = benchmark(p, fs, InferenceMode::streaming(), 3);
  CHECK(s.steps_per_video == 40);
}
