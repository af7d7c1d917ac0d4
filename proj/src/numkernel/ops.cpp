// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#include "otr/numkernel/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "otr/error.hpp"
#include "otr/numkernel/scalar.hpp"

namespace otr::nk {
namespace {

bool needs_grad(std::initializer_list<const Tensor*> inputs) {
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
}

void require_rank(std::string_view op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                         shape_str(t.shape()));
  }
}

Tensor finish(std::string_view op, Shape shape, std::vector<float> data, bool requires_grad) {
  Tensor out(std::move(shape), std::move(data), requires_grad);
  check_finite(op, out);
  return out;
}

}  // namespace

std::string_view to_string(UnaryOp op) {
  switch (op) {
    case UnaryOp::Silu: return "silu";
    case UnaryOp::Sigmoid: return "sigmoid";
    case UnaryOp::Exp: return "exp";
    case UnaryOp::Softplus: return "softplus";
    case UnaryOp::Log: return "log";
  }
  return "?";
}

void check_finite(std::string_view op, const Tensor& t) {
  if (!all_finite(t.data())) {
    throw NonFiniteError(std::string(op), std::string(op) + ": produced a non-finite value");
  }
}

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions disagree: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  std::vector<float> c(m * n, 0.0f);
  const float* pa = a.data().data();
  const float* pb = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    float* __restrict ci = c.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const float aip = pa[i * k + p];
      const float* __restrict bp = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
  Tensor out = finish("matmul", {m, n}, std::move(c), needs_grad({&a, &b}));
  if (out.requires_grad()) {
    tape.record("matmul", {a, b}, out, [m, k, n](const Tape::Node& node) {
      const Tensor& a = node.inputs[0];
      const Tensor& b = node.inputs[1];
      const float* g = node.output.grad().data();
      const float* pa = a.data().data();
      const float* pb = b.data().data();
      if (a.requires_grad()) {
        // ga += g * b^T, via a transposed copy of b so the inner loop is contiguous
        std::vector<float> bt(k * n);
        for (std::size_t p = 0; p < k; ++p) {
          for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = pb[p * n + j];
        }
        float* ga = a.grad_mut().data();
        for (std::size_t i = 0; i < m; ++i) {
          float* __restrict gai = ga + i * k;
          for (std::size_t j = 0; j < n; ++j) {
            const float gij = g[i * n + j];
            const float* __restrict btj = bt.data() + j * k;
            for (std::size_t p = 0; p < k; ++p) gai[p] += gij * btj[p];
          }
        }
      }
      if (b.requires_grad()) {
        float* gb = b.grad_mut().data();
        for (std::size_t i = 0; i < m; ++i) {
          const float* gi = g + i * n;
          for (std::size_t p = 0; p < k; ++p) {
            const float aip = pa[i * k + p];
            float* __restrict gbp = gb + p * n;
            for (std::size_t j = 0; j < n; ++j) gbp[j] += aip * gi[j];
          }
        }
      }
    });
  }
  return out;
}

Tensor unary(Tape& tape, UnaryOp op, const Tensor& x) {
  const auto xs = x.data();
  std::vector<float> y(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const float v = xs[i];
    switch (op) {
      case UnaryOp::Silu: y[i] = scalar::silu(v); break;
      case UnaryOp::Sigmoid: y[i] = scalar::sigmoid(v); break;
      case UnaryOp::Exp: y[i] = std::exp(v); break;
      case UnaryOp::Softplus: y[i] = scalar::softplus(v); break;
      case UnaryOp::Log:
        if (!(v > 0.0f)) {
          throw NumericDomainError("log: non-positive input " + std::to_string(v) + " at index " +
                                   std::to_string(i));
        }
        y[i] = std::log(v);
        break;
    }
  }
  const std::string name(to_string(op));
  Tensor out = finish(name, x.shape(), std::move(y), x.requires_grad());
  if (out.requires_grad()) {
    tape.record(name, {x}, out, [op](const Tape::Node& node) {
      const Tensor& x = node.inputs[0];
      const auto xs = x.data();
      const auto ys = node.output.data();
      const auto g = node.output.grad();
      auto gx = x.grad_mut();
      for (std::size_t i = 0; i < xs.size(); ++i) {
        float d = 0.0f;
        switch (op) {
          case UnaryOp::Silu: d = scalar::silu_grad(xs[i]); break;
          case UnaryOp::Sigmoid: d = ys[i] * (1.0f - ys[i]); break;
          case UnaryOp::Exp: d = ys[i]; break;
          case UnaryOp::Softplus: d = scalar::sigmoid(xs[i]); break;
          case UnaryOp::Log: d = 1.0f / xs[i]; break;
        }
        gx[i] += g[i] * d;
      }
    });
  }
  return out;
}

Tensor binary(Tape& tape, BinaryOp op, const Tensor& a, const Tensor& b) {
  const bool a_scalar = a.size() == 1 && b.size() != 1;
  const bool b_scalar = b.size() == 1 && a.size() != 1;
  if (!a_scalar && !b_scalar && a.shape() != b.shape()) {
    throw DimensionError("binary op: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                         " disagree");
  }
  const Shape shape = a_scalar ? b.shape() : a.shape();
  const std::size_t n = numel(shape);
  const auto as = a.data();
  const auto bs = b.data();
  std::vector<float> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const float av = as[a_scalar ? 0 : i];
    const float bv = bs[b_scalar ? 0 : i];
    y[i] = op == BinaryOp::Add ? av + bv : av * bv;
  }
  const char* name = op == BinaryOp::Add ? "add" : "mul";
  Tensor out = finish(name, shape, std::move(y), needs_grad({&a, &b}));
  if (out.requires_grad()) {
    tape.record(name, {a, b}, out, [op, a_scalar, b_scalar, n](const Tape::Node& node) {
      const Tensor& a = node.inputs[0];
      const Tensor& b = node.inputs[1];
      const auto g = node.output.grad();
      const auto as = a.data();
      const auto bs = b.data();
      if (a.requires_grad()) {
        auto ga = a.grad_mut();
        for (std::size_t i = 0; i < n; ++i) {
          const float d = op == BinaryOp::Add ? 1.0f : bs[b_scalar ? 0 : i];
          ga[a_scalar ? 0 : i] += g[i] * d;
        }
      }
      if (b.requires_grad()) {
        auto gb = b.grad_mut();
        for (std::size_t i = 0; i < n; ++i) {
          const float d = op == BinaryOp::Add ? 1.0f : as[a_scalar ? 0 : i];
          gb[b_scalar ? 0 : i] += g[i] * d;
        }
      }
    });
  }
  return out;
}

Tensor add_bias(Tape& tape, const Tensor& x, const Tensor& bias) {
  require_rank("add_bias", x, 2);
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (bias.size() != cols) {
    throw DimensionError("add_bias: bias of size " + std::to_string(bias.size()) + " for rows of " +
                         std::to_string(cols));
  }
  std::vector<float> y(x.data().begin(), x.data().end());
  const auto bs = bias.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] += bs[c];
  Tensor out = finish("add_bias", x.shape(), std::move(y), needs_grad({&x, &bias}));
  if (out.requires_grad()) {
    tape.record("add_bias", {x, bias}, out, [rows, cols](const Tape::Node& node) {
      const auto g = node.output.grad();
      const Tensor& x = node.inputs[0];
      const Tensor& bias = node.inputs[1];
      if (x.requires_grad()) {
        auto gx = x.grad_mut();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
      if (bias.requires_grad()) {
        auto gb = bias.grad_mut();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) gb[c] += g[r * cols + c];
      }
    });
  }
  return out;
}

Tensor scale(Tape& tape, const Tensor& x, float factor) {
  std::vector<float> y(x.data().begin(), x.data().end());
  for (float& v : y) v *= factor;
  Tensor out = finish("scale", x.shape(), std::move(y), x.requires_grad());
  if (out.requires_grad()) {
    tape.record("scale", {x}, out, [factor](const Tape::Node& node) {
      const auto g = node.output.grad();
      auto gx = node.inputs[0].grad_mut();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor;
    });
  }
  return out;
}

Tensor sum(Tape& tape, const Tensor& x) {
  float acc = 0.0f;
  for (float v : x.data()) acc += v;
  Tensor out = finish("sum", {}, {acc}, x.requires_grad());
  if (out.requires_grad()) {
    tape.record("sum", {x}, out, [](const Tape::Node& node) {
      const float g = node.output.grad()[0];
      for (float& v : node.inputs[0].grad_mut()) v += g;
    });
  }
  return out;
}

Tensor softmax(Tape& tape, const Tensor& x) {
  if (x.rank() == 0 || x.shape().back() == 0) throw DimensionError("softmax: empty last axis");
  const std::size_t cols = x.shape().back();
  const std::size_t rows = x.size() / cols;
  const auto xs = x.data();
  std::vector<float> y(xs.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const float* xr = xs.data() + r * cols;
    float* yr = y.data() + r * cols;
    const float mx = *std::max_element(xr, xr + cols);
    float z = 0.0f;
    for (std::size_t c = 0; c < cols; ++c) {
      yr[c] = std::exp(xr[c] - mx);
      z += yr[c];
    }
    for (std::size_t c = 0; c < cols; ++c) yr[c] /= z;
  }
  Tensor out = finish("softmax", x.shape(), std::move(y), x.requires_grad());
  if (out.requires_grad()) {
    tape.record("softmax", {x}, out, [rows, cols](const Tape::Node& node) {
      const auto p = node.output.data();
      const auto g = node.output.grad();
      auto gx = node.inputs[0].grad_mut();
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t o = r * cols;
        float dot = 0.0f;
        for (std::size_t c = 0; c < cols; ++c) dot += g[o + c] * p[o + c];
        for (std::size_t c = 0; c < cols; ++c) gx[o + c] += p[o + c] * (g[o + c] - dot);
      }
    });
  }
  return out;
}

Tensor causal_depthwise_conv1d(Tape& tape, const Tensor& x, const Tensor& kernel) {
  require_rank("causal_depthwise_conv1d", x, 2);
  require_rank("causal_depthwise_conv1d", kernel, 2);
  const std::size_t T = x.dim(0), D = x.dim(1), K = kernel.dim(0);
  if (K < 1 || kernel.dim(1) != D) {
    throw DimensionError("causal_depthwise_conv1d: kernel " + shape_str(kernel.shape()) + " for input " +
                         shape_str(x.shape()));
  }
  const auto xs = x.data();
  const auto ks = kernel.data();
  std::vector<float> y(T * D, 0.0f);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < K; ++k) {
      // Source row t - (K-1) + k; skipped when it falls before the sequence start.
      if (t + k + 1 < K) continue;
      const std::size_t src = t + k + 1 - K;
      for (std::size_t d = 0; d < D; ++d) y[t * D + d] += ks[k * D + d] * xs[src * D + d];
    }
  }
  Tensor out = finish("causal_depthwise_conv1d", {T, D}, std::move(y), needs_grad({&x, &kernel}));
  if (out.requires_grad()) {
    tape.record("causal_depthwise_conv1d", {x, kernel}, out, [T, D, K](const Tape::Node& node) {
      const Tensor& x = node.inputs[0];
      const Tensor& kernel = node.inputs[1];
      const auto g = node.output.grad();
      const auto xs = x.data();
      const auto ks = kernel.data();
      std::span<float> gx, gk;
      if (x.requires_grad()) gx = x.grad_mut();
      if (kernel.requires_grad()) gk = kernel.grad_mut();
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t k = 0; k < K; ++k) {
          if (t + k + 1 < K) continue;
          const std::size_t src = t + k + 1 - K;
          for (std::size_t d = 0; d < D; ++d) {
            const float gv = g[t * D + d];
            if (!gx.empty()) gx[src * D + d] += gv * ks[k * D + d];
            if (!gk.empty()) gk[k * D + d] += gv * xs[src * D + d];
          }
        }
      }
    });
  }
  return out;
}

Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
  require_rank("layer_norm", x, 2);
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (gamma.size() != cols || beta.size() != cols) {
    throw DimensionError("layer_norm: gamma/beta must have " + std::to_string(cols) + " entries");
  }
  const auto xs = x.data();
  const auto gs = gamma.data();
  const auto bs = beta.data();
  std::vector<float> y(xs.size());
  std::vector<float> xhat(xs.size());
  std::vector<float> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const float* xr = xs.data() + r * cols;
    float mean = 0.0f;
    for (std::size_t c = 0; c < cols; ++c) mean += xr[c];
    mean /= static_cast<float>(cols);
    float var = 0.0f;
    for (std::size_t c = 0; c < cols; ++c) var += (xr[c] - mean) * (xr[c] - mean);
    var /= static_cast<float>(cols);
    inv_std[r] = 1.0f / std::sqrt(var + eps);
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t i = r * cols + c;
      xhat[i] = (xr[c] - mean) * inv_std[r];
      y[i] = xhat[i] * gs[c] + bs[c];
    }
  }
  Tensor out = finish("layer_norm", x.shape(), std::move(y), needs_grad({&x, &gamma, &beta}));
  if (out.requires_grad()) {
    tape.record("layer_norm", {x, gamma, beta}, out,
                [rows, cols, xhat = std::move(xhat), inv_std = std::move(inv_std)](const Tape::Node& node) {
                  const Tensor& x = node.inputs[0];
                  const Tensor& gamma = node.inputs[1];
                  const Tensor& beta = node.inputs[2];
                  const auto g = node.output.grad();
                  const auto gs = gamma.data();
                  if (gamma.requires_grad()) {
                    auto gg = gamma.grad_mut();
                    for (std::size_t i = 0; i < g.size(); ++i) gg[i % cols] += g[i] * xhat[i];
                  }
                  if (beta.requires_grad()) {
                    auto gb = beta.grad_mut();
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i % cols] += g[i];
                  }
                  if (x.requires_grad()) {
                    auto gx = x.grad_mut();
                    const float inv_n = 1.0f / static_cast<float>(cols);
                    for (std::size_t r = 0; r < rows; ++r) {
                      const std::size_t o = r * cols;
                      float sum_dy = 0.0f, sum_dy_xhat = 0.0f;
                      for (std::size_t c = 0; c < cols; ++c) {
                        const float dy = g[o + c] * gs[c];
                        sum_dy += dy;
                        sum_dy_xhat += dy * xhat[o + c];
                      }
                      for (std::size_t c = 0; c < cols; ++c) {
                        const float dy = g[o + c] * gs[c];
                        gx[o + c] += inv_std[r] * (dy - inv_n * sum_dy - inv_n * xhat[o + c] * sum_dy_xhat);
                      }
                    }
                  }
                });
  }
  return out;
}

}  // namespace otr::nk
