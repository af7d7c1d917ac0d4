// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>

// Scalar activation functions shared by the taped ops and the streaming step.
namespace otr::nk::scalar {

inline float sigmoid(float x) {
  if (x >= 0.0f) return 1.0f / (1.0f + std::exp(-x));
  const float e = std::exp(x);
  return e / (1.0f + e);
}

inline float silu(float x) { return x * sigmoid(x); }

inline float silu_grad(float x) {
  const float s = sigmoid(x);
  return s * (1.0f + x * (1.0f - s));
}

// ln(1 + e^x), linear above 20 where the correction is below float resolution.
inline float softplus(float x) {
  if (x > 20.0f) return x;
  return std::log1p(std::exp(x));
}

// e^x for x <= 0 without branches, so loops over it vectorize. Range reduction
// x = k ln2 + r with |r| <= ln2/2, degree-6 polynomial for e^r; within 2 ulp of
// std::exp down to -87; inputs below that are clamped.
inline float exp_nonpos(float x) {
  constexpr float kLog2e = 1.44269504088896341f;
  constexpr float kLn2Hi = 0.693359375f;
  constexpr float kLn2Lo = -2.12194440e-4f;
  x = std::max(x, -87.0f);
  // Adding 1.5 * 2^23 rounds to an integer held in the low mantissa bits.
  constexpr float kShift = 12582912.0f;
  const float shifted = x * kLog2e + kShift;
  const float k = shifted - kShift;
  const float r = (x - k * kLn2Hi) - k * kLn2Lo;
  float p = 1.9875691500e-4f;
  p = p * r + 1.3981999507e-3f;
  p = p * r + 8.3334519073e-3f;
  p = p * r + 4.1665795894e-2f;
  p = p * r + 1.6666665459e-1f;
  p = p * r + 5.0000001201e-1f;
  const float er = (p * r) * r + r + 1.0f;
  const std::int32_t bits = (std::bit_cast<std::int32_t>(shifted) - std::bit_cast<std::int32_t>(kShift) + 127) << 23;
  return er * std::bit_cast<float>(bits);
}

}  // namespace otr::nk::scalar
