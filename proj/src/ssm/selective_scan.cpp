// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <string>

#include "otr/error.hpp"
#include "otr/numkernel/ops.hpp"
#include "otr/numkernel/scalar.hpp"
#include "otr/ssm/model.hpp"

namespace otr::ssm {

Tensor selective_scan(Tape& tape, const Tensor& x, const Tensor& dt, const Tensor& a_log, const Tensor& b,
                      const Tensor& c, const Tensor& d_skip) {
  if (x.rank() != 2 || dt.shape() != x.shape() || a_log.rank() != 2 || b.rank() != 2 ||
      c.shape() != b.shape()) {
    throw DimensionError("selective_scan: malformed operand shapes");
  }
  const std::size_t T = x.dim(0), E = x.dim(1), N = a_log.dim(1);
  if (a_log.dim(0) != E || b.dim(0) != T || b.dim(1) != N || d_skip.size() != E) {
    throw DimensionError("selective_scan: x " + nk::shape_str(x.shape()) + ", a_log " +
                         nk::shape_str(a_log.shape()) + ", b " + nk::shape_str(b.shape()) + " disagree");
  }
  const float* xs = x.data().data();
  const float* dts = dt.data().data();
  const float* bs = b.data().data();
  const float* cs = c.data().data();
  const float* ds = d_skip.data().data();

  std::vector<float> a(E * N);
  for (std::size_t i = 0; i < E * N; ++i) a[i] = -std::exp(a_log.data()[i]);

  // states[t] holds h_t; kept for the backward pass.
  std::vector<float> states((T + 1) * E * N, 0.0f);
  std::vector<float> decays(T * E * N);
  std::vector<float> y(T * E);
  for (std::size_t t = 0; t < T; ++t) {
    const float* prev = states.data() + t * E * N;
    float* cur = states.data() + (t + 1) * E * N;
    float* dec = decays.data() + t * E * N;
    for (std::size_t e = 0; e < E; ++e) {
      const float dte = dts[t * E + e];
      const float* ae = a.data() + e * N;
      float* de = dec + e * N;
#pragma omp simd
      for (std::size_t n = 0; n < N; ++n) de[n] = nk::scalar::exp_nonpos(dte * ae[n]);
    }
    for (std::size_t e = 0; e < E; ++e) {
      const float dte = dts[t * E + e];
      const float xe = xs[t * E + e];
      float acc = 0.0f;
      for (std::size_t n = 0; n < N; ++n) {
        const std::size_t i = e * N + n;
        const float decay = dec[i];
        cur[i] = decay * prev[i] + dte * bs[t * N + n] * xe;
        acc += cs[t * N + n] * cur[i];
      }
      y[t * E + e] = acc + ds[e] * xe;
    }
  }

  const bool grad = x.requires_grad() || dt.requires_grad() || a_log.requires_grad() || b.requires_grad() ||
                    c.requires_grad() || d_skip.requires_grad();
  Tensor out({T, E}, std::move(y), grad);
  nk::check_finite("selective_scan", out);
  if (!grad) return out;

  tape.record("selective_scan", {x, dt, a_log, b, c, d_skip}, out,
              [T, E, N, a = std::move(a), states = std::move(states), decays = std::move(decays)](const Tape::Node& node) {
                const Tensor& x = node.inputs[0];
                const Tensor& dt = node.inputs[1];
                const Tensor& a_log = node.inputs[2];
                const Tensor& b = node.inputs[3];
                const Tensor& c = node.inputs[4];
                const Tensor& d_skip = node.inputs[5];
                const float* gy = node.output.grad().data();
                const float* xs = x.data().data();
                const float* dts = dt.data().data();
                const float* bs = b.data().data();
                const float* cs = c.data().data();
                const float* ds = d_skip.data().data();

                std::vector<float> gx(T * E, 0.0f), gdt(T * E, 0.0f), ga(E * N, 0.0f);
                std::vector<float> gb(T * N, 0.0f), gc(T * N, 0.0f), gd(E, 0.0f);
                // dh accumulates d(loss)/d(h_t) flowing back from later frames.
                std::vector<float> dh(E * N, 0.0f);
                for (std::size_t t = T; t-- > 0;) {
                  const float* prev = states.data() + t * E * N;
                  const float* cur = states.data() + (t + 1) * E * N;
                  const float* dec = decays.data() + t * E * N;
                  for (std::size_t e = 0; e < E; ++e) {
                    const float g = gy[t * E + e];
                    const float dte = dts[t * E + e];
                    const float xe = xs[t * E + e];
                    gd[e] += g * xe;
                    float gxe = g * ds[e];
                    float gdte = 0.0f;
                    for (std::size_t n = 0; n < N; ++n) {
                      const std::size_t i = e * N + n;
                      gc[t * N + n] += g * cur[i];
                      const float dhi = dh[i] + g * cs[t * N + n];
                      const float decay = dec[i];
                      const float g_decay = dhi * prev[i] * decay;  // d/d(dt*A)
                      gdte += g_decay * a[i] + dhi * bs[t * N + n] * xe;
                      ga[i] += g_decay * dte;
                      gb[t * N + n] += dhi * dte * xe;
                      gxe += dhi * dte * bs[t * N + n];
                      dh[i] = dhi * decay;
                    }
                    gx[t * E + e] += gxe;
                    gdt[t * E + e] += gdte;
                  }
                }
                auto accumulate = [](const Tensor& t, const std::vector<float>& g) {
                  if (!t.requires_grad()) return;
                  auto dst = t.grad_mut();
                  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
                };
                // dA/d(a_log) = A.
                for (std::size_t i = 0; i < E * N; ++i) ga[i] *= a[i];
                accumulate(x, gx);
                accumulate(dt, gdt);
                accumulate(a_log, ga);
                accumulate(b, gb);
                accumulate(c, gc);
                accumulate(d_skip, gd);
              });
  return out;
}

}  // namespace otr::ssm
