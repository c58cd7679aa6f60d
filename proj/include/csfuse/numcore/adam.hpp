#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "csfuse/numcore/tensor.hpp"

namespace csfuse::numcore {

struct AdamConfig {
  double lr = 0.0002;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment accumulators mirror the parameter list they were created for.
struct AdamState {
  AdamConfig config;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::int64_t t = 0;
};

AdamState make_adam_state(std::span<Tensor* const> params, AdamConfig config = {});

/// One bias-corrected Adam update. Throws NumericError if any gradient is non-finite
/// (parameters are left untouched in that case).
void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads, AdamState& state);

}  // namespace csfuse::numcore
