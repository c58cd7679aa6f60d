#include "csfuse/numcore/sequential.hpp"

#include "csfuse/core/error.hpp"

namespace csfuse::numcore {

Tensor forward(const Sequential& seq, const Tensor& x, Tape* tape) {
  if (tape) tape->clear();
  Tensor cur = x;
  for (const Layer& l : seq.layers) {
    Tensor next = layer_forward(l, cur);
    if (tape) tape->push_back(std::move(cur));
    cur = std::move(next);
  }
  return cur;
}

Tensor backward(const Sequential& seq, const Tape& tape, const Tensor& grad_out, Sequential* param_grads) {
  if (tape.size() != seq.layers.size()) {
    throw ShapeError("sequential backward: tape holds " + std::to_string(tape.size()) + " inputs for " +
                     std::to_string(seq.layers.size()) + " layers");
  }
  Tensor g = grad_out;
  for (std::size_t i = seq.layers.size(); i-- > 0;) {
    LayerGrads lg = layer_backward(seq.layers[i], tape[i], g);
    if (param_grads && seq.layers[i].has_params()) {
      param_grads->layers[i].weight += lg.weight;
      param_grads->layers[i].bias += lg.bias;
    }
    g = std::move(lg.input);
  }
  return g;
}

Sequential zeros_like(const Sequential& seq) {
  Sequential out = seq;
  for_each_param(out, [](const std::string&, Tensor& t) { t.fill(0.0); });
  return out;
}

void for_each_param(Sequential& seq, const std::function<void(const std::string&, Tensor&)>& fn) {
  for (Layer& l : seq.layers) for_each_param(l, fn);
}

void for_each_param(const Sequential& seq, const std::function<void(const std::string&, const Tensor&)>& fn) {
  for (const Layer& l : seq.layers) for_each_param(l, fn);
}

}  // namespace csfuse::numcore
