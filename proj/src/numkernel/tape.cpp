// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#include "otr/numkernel/tape.hpp"

#include "otr/error.hpp"

namespace otr::nk {

void Tape::record(std::string op, std::vector<Tensor> inputs, Tensor output,
                  std::function<void(const Node&)> backward) {
  nodes_.push_back(Node{std::move(op), std::move(inputs), std::move(output), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
  }
  std::size_t end = nodes_.size();
  while (end > 0 && !nodes_[end - 1].output.same_storage(loss)) --end;
  if (end == 0) throw ContractError("backward: loss was not produced on this tape");

  for (std::size_t i = 0; i < end; ++i) nodes_[i].output.release_grad();
  loss.grad_mut()[0] = 1.0f;

  for (std::size_t i = end; i-- > 0;) {
    const Node& n = nodes_[i];
    if (n.output.has_grad()) n.backward(n);
  }
}

}  // namespace otr::nk
