// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "otr/numkernel/tensor.hpp"

namespace otr::nk {

// Record-then-reverse autodiff tape.
//
// Ops append a node only when at least one input requires a gradient. A node's
// backward rule reads `output.grad()` and accumulates into the inputs' grads.
// A tape and the tensors recorded on it belong to one thread.
class Tape {
 public:
  struct Node {
    std::string op;
    std::vector<Tensor> inputs;
    Tensor output;
    std::function<void(const Node&)> backward;
  };

  void record(std::string op, std::vector<Tensor> inputs, Tensor output,
              std::function<void(const Node&)> backward);

  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t i) const { return nodes_.at(i); }

  // Seeds d(loss)/d(loss) = 1 and replays nodes in reverse up to the loss.
  // Intermediate gradients are reset on each call; leaf gradients accumulate.
  void backward(const Tensor& loss);

  void clear() { nodes_.clear(); }

 private:
  std::vector<Node> nodes_;
};

inline void backward(const Tensor& loss, Tape& tape) { tape.backward(loss); }

}  // namespace otr::nk
