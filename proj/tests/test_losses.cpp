#include <cmath>
#include <random>

#include "doctest.h"
#include "otr/error.hpp"
#include "otr/losses.hpp"
#include "otr/numkernel/grad_check.hpp"
#include "otr/numkernel/ops.hpp"

using namespace otr;
using namespace otr::losses;

namespace {

FrameTargets labels(std::vector<std::size_t> l) {
  FrameTargets t;
  t.labels = std::move(l);
  for (std::size_t i = 0; i < t.labels.size(); ++i) {
    if (t.labels[i] != kBackgroundIndex) t.positives.push_back(i);
  }
  return t;
}

Tensor random_probs(std::size_t T, std::mt19937_64& rng, bool grad = false) {
  std::normal_distribution<float> n(0.0f, 2.0f);
  std::vector<float> v(T * 3);
  for (auto& x : v) x = n(rng);
  Tape tape;
  Tensor p = nk::softmax(tape, Tensor({T, 3}, v));
  return p.clone(grad);
}

const std::vector<float> kOnes{1.0f, 1.0f, 1.0f};

double eval(Tensor t) { return t.item(); }

}  // namespace

TEST_CASE("focal loss reference values") {
  Tape tape;
  CHECK(eval(focal_loss(tape, Tensor({1, 3}, {0.5f, 0.25f, 0.25f}), labels({0}), 0.0f, kOnes)) ==
        doctest::Approx(0.693147).epsilon(1e-6));
  const double expect = 0.1 * 0.1 * -std::log(0.9);
  CHECK(expect == doctest::Approx(1.0536e-3).epsilon(1e-4));
  CHECK(eval(focal_loss(tape, Tensor({1, 3}, {0.05f, 0.9f, 0.05f}), labels({1}), 2.0f, kOnes)) ==
        doctest::Approx(expect).epsilon(1e-5));
  CHECK(eval(focal_loss(tape, Tensor({2, 3}, {1, 0, 0, 0, 0, 1}), labels({0, 2}), 2.0f, kOnes)) == 0.0);
}

TEST_CASE("focal loss without focusing is mean cross-entropy") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t T = 1 + trial % 9;
    const Tensor p = random_probs(T, rng);
    std::vector<std::size_t> l(T);
    for (auto& x : l) x = rng() % 3;
    double ce = 0.0;
    for (std::size_t t = 0; t < T; ++t) ce -= std::log(static_cast<double>(p.at(t * 3 + l[t])));
    ce /= static_cast<double>(T);
    Tape tape;
    CHECK(std::fabs(eval(focal_loss(tape, p, labels(l), 0.0f, kOnes)) - ce) < 1e-6);
  }
}

TEST_CASE("focal loss argument checks") {
  Tape tape;
  const Tensor p({1, 3}, {0.2f, 0.3f, 0.5f});
  CHECK_THROWS_AS(focal_loss(tape, p, labels({0}), -1.0f, kOnes), ConfigError);
  CHECK_THROWS_AS(focal_loss(tape, p, labels({0, 1}), 2.0f, kOnes), DimensionError);
  CHECK_THROWS_AS(focal_loss(tape, Tensor({1, 2}, {0.5f, 0.5f}), labels({0}), 2.0f, kOnes), DimensionError);
  LossConfig c;
  c.gamma = -0.5f;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(parse_reg_kind("ridge"), ConfigError);
  for (auto k : {RegKind::None, RegKind::Entropy, RegKind::SlidingWindow, RegKind::FixedWindow})
    CHECK(parse_reg_kind(to_string(k)) == k);
}

TEST_CASE("entropy regularizer") {
  Tape tape;
  CHECK(eval(entropy_reg(tape, Tensor({2, 3}, {1, 0, 0, 0, 0, 1}))) == 0.0);
  CHECK(eval(entropy_reg(tape, Tensor({1, 3}, {1.0f / 3, 1.0f / 3, 1.0f / 3}))) ==
        doctest::Approx(std::log(3.0)).epsilon(1e-6));
  CHECK(eval(entropy_reg(tape, Tensor({2, 3}, {0.5f, 0.5f, 0, 1, 0, 0}))) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-6));
}

TEST_CASE("sliding window regularizer") {
  Tape tape;
  const Tensor p({3}, {0.5f, 0.5f, 0.5f});
  CHECK(eval(sliding_window_reg(tape, p, 3)) == doctest::Approx(3.5));
  CHECK(eval(sliding_window_reg(tape, Tensor({3}, {0.2f, 0.5f, 0.1f}), 1)) == doctest::Approx(0.8));
  CHECK(eval(sliding_window_reg(tape, Tensor::zeros({5}), 4)) == 0.0);
  CHECK_THROWS_AS(sliding_window_reg(tape, p, 0), ConfigError);
}

TEST_CASE("fixed window regularizer") {
  Tape tape;
  const Tensor p({3}, {0.2f, 0.5f, 0.1f});
  CHECK(eval(fixed_window_reg(tape, p, std::vector<std::size_t>{}, 3)) == 0.0);
  CHECK(eval(fixed_window_reg(tape, p, std::vector<std::size_t>{1}, 3)) == doctest::Approx(0.8));
  CHECK(eval(fixed_window_reg(tape, p, std::vector<std::size_t>{0, 1, 2}, 3)) ==
        doctest::Approx(eval(sliding_window_reg(tape, p, 3))));
  CHECK_THROWS_AS(fixed_window_reg(tape, p, std::vector<std::size_t>{3}, 3), ContractError);
}

TEST_CASE("window regularizers against a direct sum") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t T = 1 + rng() % 30, w = 1 + rng() % 8;
    std::vector<float> p(T);
    for (auto& x : p) x = u(rng);
    std::vector<std::size_t> g;
    for (std::size_t i = 0; i < T; ++i)
      if (rng() % 5 == 0) g.push_back(i);
    auto window_sum = [&](std::size_t f) {
      double s = 0.0;
      const long h = static_cast<long>(w / 2);
      for (long i = static_cast<long>(f) - h; i <= static_cast<long>(f) + h; ++i)
        if (i >= 0 && i < static_cast<long>(T)) s += p[static_cast<std::size_t>(i)];
      return s;
    };
    double slide = 0.0, fixed = 0.0;
    for (std::size_t f = 0; f < T; ++f) slide += window_sum(f);
    for (std::size_t f : g) fixed += window_sum(f);
    Tape tape;
    const Tensor pt({T}, p);
    CHECK(eval(sliding_window_reg(tape, pt, w)) == doctest::Approx(slide).epsilon(1e-5));
    CHECK(eval(fixed_window_reg(tape, pt, g, w)) == doctest::Approx(fixed).epsilon(1e-5));
  }
}

TEST_CASE("total loss composition") {
  std::mt19937_64 rng(3);
  const Tensor p = random_probs(12, rng);
  const auto t = labels({2, 2, 0, 2, 2, 2, 1, 2, 2, 2, 2, 0});
  Tape tape;
  LossConfig c;
  const double focal = eval(focal_loss(tape, p, t, c.gamma, c.alpha));
  c.lambda = 0.0f;
  CHECK(eval(total_loss(tape, p, t, c)) == focal);
  c.lambda = 0.5f;
  c.reg_kind = RegKind::None;
  CHECK(eval(total_loss(tape, p, t, c)) == focal);
  c.reg_kind = RegKind::FixedWindow;
  const double fixed = eval(total_loss(tape, p, t, c));
  c.reg_kind = RegKind::SlidingWindow;
  const double sliding = eval(total_loss(tape, p, t, c));
  CHECK(fixed > focal);
  CHECK(fixed <= sliding);
}

TEST_CASE("loss gradients") {
  std::mt19937_64 rng(4);
  const auto t = labels({2, 0, 2, 2, 1, 2, 2});
  for (auto kind : {RegKind::None, RegKind::Entropy, RegKind::SlidingWindow, RegKind::FixedWindow}) {
    CAPTURE(to_string(kind));
    std::normal_distribution<float> n(0.0f, 1.0f);
    std::vector<float> v(21);
    for (auto& x : v) x = n(rng);
    Tensor logits({7, 3}, v, true);
    LossConfig c;
    c.reg_kind = kind;
    c.lambda = 0.3f;
    c.window = 3;
    const auto rep = nk::grad_check([&](Tape& tape) { return total_loss(tape, nk::softmax(tape, logits), t, c); },
                                    {{"logits", logits}});
    CHECK(rep.passed());
  }
}

TEST_CASE("targets from annotation times") {
  const std::vector<GroundTruthAction> acts{{"v", ActionClass::Take, 2.0},
                                            {"v", ActionClass::Release, 2.625},
                                            {"v", ActionClass::Take, 0.1},
                                            {"v", ActionClass::Release, 100.0}};
  const auto t = make_targets(12, 4.0, acts);
  CHECK(t.labels[8] == 0);
  CHECK(t.labels[10] == 1);  // 10.5 frames ties toward frame 10
  CHECK(t.labels[0] == 0);   // 0.4 frames rounds to 0
  CHECK(t.positives == std::vector<std::size_t>{0, 8, 10});
  const auto shifted = make_targets(4, 4.0, acts, 8);
  CHECK(shifted.positives == std::vector<std::size_t>{0, 2});
}

TEST_CASE("frame and time conversion") {
  CHECK(frame_to_time(0, 4.0) == 0.0);
  CHECK(frame_to_time(8, 4.0) == 2.0);
  for (std::size_t f = 0; f < 1000; ++f) CHECK(time_to_frame(frame_to_time(f, 4.0), 4.0) == static_cast<std::int64_t>(f));
  CHECK(time_to_frame(0.125, 4.0) == 0);
  CHECK(time_to_frame(0.126, 4.0) == 1);
}
