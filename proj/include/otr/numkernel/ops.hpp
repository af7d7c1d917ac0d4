// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string_view>

#include "otr/numkernel/tape.hpp"
#include "otr/numkernel/tensor.hpp"

// Differentiable primitives. Every op checks shapes, refuses to return
// non-finite values (NonFiniteError names the op), and records a backward rule
// on `tape` when any input requires a gradient.
namespace otr::nk {

enum class UnaryOp { Silu, Sigmoid, Exp, Softplus, Log };
enum class BinaryOp { Add, Mul };

std::string_view to_string(UnaryOp op);

// a: [m x k], b: [k x n] -> [m x n]
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

// Pointwise op. Log of a non-positive value throws NumericDomainError.
Tensor unary(Tape& tape, UnaryOp op, const Tensor& x);

// Operands must have equal shapes, or one of them must hold a single value.
Tensor binary(Tape& tape, BinaryOp op, const Tensor& a, const Tensor& b);

inline Tensor silu(Tape& t, const Tensor& x) { return unary(t, UnaryOp::Silu, x); }
inline Tensor sigmoid(Tape& t, const Tensor& x) { return unary(t, UnaryOp::Sigmoid, x); }
inline Tensor exp(Tape& t, const Tensor& x) { return unary(t, UnaryOp::Exp, x); }
inline Tensor softplus(Tape& t, const Tensor& x) { return unary(t, UnaryOp::Softplus, x); }
inline Tensor log(Tape& t, const Tensor& x) { return unary(t, UnaryOp::Log, x); }
inline Tensor add(Tape& t, const Tensor& a, const Tensor& b) { return binary(t, BinaryOp::Add, a, b); }
inline Tensor mul(Tape& t, const Tensor& a, const Tensor& b) { return binary(t, BinaryOp::Mul, a, b); }

// x: [rows x n], bias: [n]. Adds bias to every row.
Tensor add_bias(Tape& tape, const Tensor& x, const Tensor& bias);

Tensor scale(Tape& tape, const Tensor& x, float factor);

// Sum of all elements -> scalar.
Tensor sum(Tape& tape, const Tensor& x);

// Softmax over the last axis with max subtraction.
Tensor softmax(Tape& tape, const Tensor& x);

// x: [T x D], kernel: [K x D]. out[t,d] = sum_k kernel[k,d] * x[t-(K-1)+k, d],
// with x treated as zero before t = 0.
Tensor causal_depthwise_conv1d(Tape& tape, const Tensor& x, const Tensor& kernel);

// Normalizes each row of x: [rows x n] then applies gamma, beta: [n].
Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  float eps = 1e-5f);

// Throws NonFiniteError naming `op` if any value is NaN or Inf.
void check_finite(std::string_view op, const Tensor& t);

}  // namespace otr::nk
