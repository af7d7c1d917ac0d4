// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace otr::nk {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct TensorImpl {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;  // empty until first written
  bool requires_grad = false;
};
}  // namespace detail

// Dense row-major float tensor with an optional gradient buffer.
//
// Tensor is a shared handle: copies alias the same storage. Values are treated
// as immutable once an op has consumed them; only initializers and optimizers
// write through mutable_data(). The gradient buffer is mutable state and may be
// written through a const handle.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<float> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, float value, bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<const float> data() const;
  std::span<float> mutable_data();
  float item() const;
  float at(std::size_t i) const { return data()[i]; }
  float at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  void set_requires_grad(bool value);

  bool has_grad() const;
  std::span<const float> grad() const;
  // Returns the gradient buffer, allocating it zero-filled on first use.
  std::span<float> grad_mut() const;
  void zero_grad() const;
  void release_grad() const;

  // Deep copy of values; the copy carries no gradient.
  Tensor clone(bool requires_grad = false) const;

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

bool all_finite(std::span<const float> values);

}  // namespace otr::nk
