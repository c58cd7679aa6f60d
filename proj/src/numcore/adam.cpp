#include "csfuse/numcore/adam.hpp"

#include <cmath>

#include "csfuse/core/error.hpp"

namespace csfuse::numcore {

AdamState make_adam_state(std::span<Tensor* const> params, AdamConfig config) {
  AdamState st;
  st.config = config;
  for (const Tensor* p : params) {
    st.m.emplace_back(p->shape());
    st.v.emplace_back(p->shape());
  }
  return st;
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads, AdamState& st) {
  if (params.size() != grads.size() || params.size() != st.m.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " params, " + std::to_string(grads.size()) +
                     " grads, " + std::to_string(st.m.size()) + " accumulators");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_same_shape(*params[i], *grads[i], "adam_step param/grad " + std::to_string(i));
    require_same_shape(*params[i], st.m[i], "adam_step param/state " + std::to_string(i));
    if (!grads[i]->all_finite()) {
      throw NumericError("adam_step: non-finite gradient in parameter tensor " + std::to_string(i));
    }
  }
  const AdamConfig& c = st.config;
  st.t += 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    Tensor& m = st.m[i];
    Tensor& v = st.v[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p[k] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

}  // namespace csfuse::numcore
