#pragma once

#include <functional>
#include <string>
#include <vector>

#include "csfuse/numcore/layers.hpp"

namespace csfuse::numcore {

/// A chain of catalog layers.
struct Sequential {
  std::vector<Layer> layers;
};

/// Inputs seen by each layer during a forward pass, kept for backward.
using Tape = std::vector<Tensor>;

Tensor forward(const Sequential& seq, const Tensor& x, Tape* tape = nullptr);

/// Back-propagates `grad_out` through `seq` using `tape` from the matching forward pass.
/// Parameter gradients are added into `param_grads` (same structure as `seq`) when non-null.
Tensor backward(const Sequential& seq, const Tape& tape, const Tensor& grad_out, Sequential* param_grads);

/// Same structure with all parameter tensors zeroed.
Sequential zeros_like(const Sequential& seq);

void for_each_param(Sequential& seq, const std::function<void(const std::string&, Tensor&)>& fn);
void for_each_param(const Sequential& seq, const std::function<void(const std::string&, const Tensor&)>& fn);

}  // namespace csfuse::numcore
