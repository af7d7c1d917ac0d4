#include <bit>
#include <cmath>
#include <cstdint>
#include <random>

#include "doctest.h"
#include "otr/error.hpp"
#include "otr/numkernel/grad_check.hpp"
#include "otr/numkernel/ops.hpp"
#include "otr/numkernel/scalar.hpp"
#include "otr/numkernel/tape.hpp"

using namespace otr;
using namespace otr::nk;

namespace {

Tensor rand_tensor(Shape shape, std::mt19937_64& rng, bool grad = true) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::vector<float> v(numel(shape));
  for (auto& x : v) x = n(rng);
  return Tensor(std::move(shape), std::move(v), grad);
}

}  // namespace

TEST_CASE("matmul small products") {
  Tape tape;
  Tensor eye({2, 2}, {1, 0, 0, 1});
  Tensor m({2, 2}, {1, 2, 3, 4});
  Tensor r = matmul(tape, eye, m);
  CHECK(r.shape() == Shape{2, 2});
  for (std::size_t i = 0; i < 4; ++i) CHECK(r.at(i) == m.at(i));

  Tensor row({1, 2}, {1, 2});
  Tensor col({2, 1}, {3, 4});
  CHECK(matmul(tape, row, col).item() == 11.0f);
  CHECK_THROWS_AS(matmul(tape, row, row), DimensionError);
}

TEST_CASE("matmul gradient against central differences") {
  std::mt19937_64 rng(3);
  Tensor a = rand_tensor({3, 4}, rng), b = rand_tensor({4, 2}, rng);
  GradCheckOptions opt;
  opt.tolerance = 1e-3;
  const auto rep = grad_check([&](Tape& t) { return sum(t, matmul(t, a, b)); }, {{"a", a}, {"b", b}}, opt);
  for (const auto& e : rep.entries) CHECK(e.max_abs_error < 1e-3);
}

TEST_CASE("causal depthwise conv") {
  Tape tape;
  Tensor x({3, 1}, {1, 2, 3});
  Tensor k({2, 1}, {1, 1});
  const Tensor y = causal_depthwise_conv1d(tape, x, k);
  CHECK(y.at(0) == 1.0f);
  CHECK(y.at(1) == 3.0f);
  CHECK(y.at(2) == 5.0f);

  std::mt19937_64 rng(1);
  Tensor x2 = rand_tensor({5, 3}, rng, false);
  const Tensor same = causal_depthwise_conv1d(tape, x2, Tensor::filled({1, 3}, 1.0f));
  for (std::size_t i = 0; i < x2.size(); ++i) CHECK(same.at(i) == x2.at(i));

  CHECK_THROWS_AS(causal_depthwise_conv1d(tape, x2, Tensor::filled({2, 2}, 1.0f)), DimensionError);
}

TEST_CASE("conv and layer norm gradients") {
  std::mt19937_64 rng(5);
  Tensor x = rand_tensor({6, 3}, rng), k = rand_tensor({4, 3}, rng);
  Tensor g = rand_tensor({3}, rng), b = rand_tensor({3}, rng), w = rand_tensor({6, 3}, rng, false);
  const auto rep = grad_check(
      [&](Tape& t) { return sum(t, mul(t, layer_norm(t, causal_depthwise_conv1d(t, x, k), g, b), w)); },
      {{"x", x}, {"k", k}, {"gamma", g}, {"beta", b}});
  CHECK(rep.passed());
}

TEST_CASE("elementwise scalars") {
  Tape tape;
  const Tensor z = Tensor::scalar(0.0f);
  CHECK(sigmoid(tape, z).item() == 0.5f);
  CHECK(silu(tape, z).item() == 0.0f);
  const double softplus1 = std::log1p(std::exp(1.0));
  CHECK(softplus1 == doctest::Approx(1.3132617).epsilon(1e-7));
  CHECK(softplus(tape, Tensor::scalar(1.0f)).item() == doctest::Approx(softplus1).epsilon(1e-6));
  CHECK(scalar::softplus(30.0f) == 30.0f);
  CHECK(scalar::sigmoid(-100.0f) >= 0.0f);
}

TEST_CASE("unary gradients") {
  std::mt19937_64 rng(7);
  Tensor x = rand_tensor({10}, rng);
  for (UnaryOp op : {UnaryOp::Silu, UnaryOp::Sigmoid, UnaryOp::Exp, UnaryOp::Softplus}) {
    CAPTURE(to_string(op));
    const auto rep = grad_check([&](Tape& t) { return sum(t, unary(t, op, x)); }, {{"x", x}});
    CHECK(rep.passed());
  }
  Tensor pos({4}, {0.5f, 1.0f, 2.0f, 3.0f}, true);
  CHECK(grad_check([&](Tape& t) { return sum(t, log(t, pos)); }, {{"x", pos}}).passed());
}

TEST_CASE("log rejects non-positive input") {
  Tape tape;
  CHECK_THROWS_AS(log(tape, Tensor({2}, {1.0f, 0.0f})), NumericDomainError);
  CHECK_THROWS_AS(log(tape, Tensor({1}, {-1.0f})), NumericDomainError);
}

TEST_CASE("non-finite outputs name the op") {
  Tape tape;
  try {
    exp(tape, Tensor::scalar(200.0f));
    FAIL("expected NonFiniteError");
  } catch (const NonFiniteError& e) {
    CHECK(e.op() == "exp");
  }
}

TEST_CASE("softmax rows") {
  Tape tape;
  const Tensor u = softmax(tape, Tensor({1, 3}, {0, 0, 0}));
  for (std::size_t i = 0; i < 3; ++i) CHECK(u.at(i) == doctest::Approx(1.0 / 3.0));

  const Tensor big = softmax(tape, Tensor({1, 3}, {1000, 0, 0}));
  CHECK(big.at(0) == doctest::Approx(1.0));
  CHECK(big.at(1) == doctest::Approx(0.0));

  double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  const Tensor s = softmax(tape, Tensor({1, 3}, {1, 2, 3}));
  const double expect[3] = {std::exp(1.0) / z, std::exp(2.0) / z, std::exp(3.0) / z};
  CHECK(expect[0] == doctest::Approx(0.09003).epsilon(1e-4));
  CHECK(expect[1] == doctest::Approx(0.24473).epsilon(1e-4));
  CHECK(expect[2] == doctest::Approx(0.66524).epsilon(1e-4));
  for (std::size_t i = 0; i < 3; ++i) CHECK(s.at(i) == doctest::Approx(expect[i]).epsilon(1e-6));

  std::mt19937_64 rng(9);
  Tensor x = rand_tensor({4, 3}, rng), w = rand_tensor({4, 3}, rng, false);
  CHECK(grad_check([&](Tape& t) { return sum(t, mul(t, softmax(t, x), w)); }, {{"x", x}}).passed());
}

TEST_CASE("backward requires a scalar from this tape") {
  Tape tape;
  Tensor x({2}, {1, 2}, true);
  Tensor y = scale(tape, x, 2.0f);
  CHECK_THROWS_AS(tape.backward(y), ContractError);
  Tape other;
  CHECK_THROWS_AS(other.backward(sum(tape, y)), ContractError);
}

TEST_CASE("gradients accumulate across uses") {
  Tape tape;
  Tensor x({2}, {1, 2}, true);
  Tensor y = sum(tape, add(tape, mul(tape, x, x), x));
  tape.backward(y);
  CHECK(x.grad()[0] == 3.0f);
  CHECK(x.grad()[1] == 5.0f);
}

TEST_CASE("grad check is exact on a quadratic") {
  // Dyadic values and step keep every evaluation exact in float.
  Tensor x({3}, {0.5f, 1.25f, -2.0f}, true);
  GradCheckOptions opt;
  opt.step = 0x1p-10f;
  const auto rep = grad_check([&](Tape& t) { return sum(t, mul(t, x, x)); }, {{"x", x}}, opt);
  CHECK(rep.entries[0].max_abs_error < 1e-8);
}

TEST_CASE("grad check catches a broken backward rule") {
  Tensor x({3}, {0.3f, -0.7f, 1.1f}, true);
  auto broken_square = [&](Tape& t) {
    std::vector<float> v;
    for (float a : x.data()) v.push_back(a * a);
    Tensor out({3}, v, true);
    t.record("broken_square", {x}, out, [](const Tape::Node& n) {
      auto g = n.inputs[0].grad_mut();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.output.grad()[i] * 3.0f * n.inputs[0].at(i);
    });
    return sum(t, out);
  };
  CHECK_FALSE(grad_check(broken_square, {{"x", x}}).passed());
}

TEST_CASE("grad check samples the largest entry first") {
  std::mt19937_64 rng(11);
  Tensor x = rand_tensor({50}, rng), w = rand_tensor({50}, rng, false);
  GradCheckOptions opt;
  opt.max_entries_per_tensor = 5;
  const auto rep = grad_check([&](Tape& t) { return sum(t, mul(t, x, w)); }, {{"x", x}}, opt);
  CHECK(rep.entries[0].checked == 5);
  CHECK(rep.passed());
}

TEST_CASE("exp_nonpos tracks std::exp") {
  auto ulps = [](float a, float b) {
    return std::abs(static_cast<std::int64_t>(std::bit_cast<std::int32_t>(a)) - std::bit_cast<std::int32_t>(b));
  };
  std::int64_t worst = 0;
  for (float x = -87.0f; x <= 0.0f; x += 0.00173f) worst = std::max(worst, ulps(scalar::exp_nonpos(x), std::exp(x)));
  CHECK(worst <= 2);
  CHECK(scalar::exp_nonpos(0.0f) == 1.0f);
  CHECK(scalar::exp_nonpos(-1000.0f) == scalar::exp_nonpos(-87.0f));
  CHECK(scalar::exp_nonpos(-1000.0f) > 0.0f);
}

TEST_CASE("tensor storage and grads") {
  Tensor a({2, 2}, {1, 2, 3, 4}, true);
  CHECK_FALSE(a.has_grad());
  a.grad_mut()[0] = 1.0f;
  CHECK(a.has_grad());
  Tensor b = a.clone();
  b.mutable_data()[0] = 9.0f;
  CHECK(a.at(0) == 1.0f);
  CHECK_FALSE(b.same_storage(a));
  CHECK(a.at(1, 0) == 3.0f);
  CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(a.item(), ContractError);
  CHECK_FALSE(all_finite(std::vector<float>{1.0f, NAN}));
}
