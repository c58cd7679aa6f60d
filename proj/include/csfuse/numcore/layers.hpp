#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "csfuse/numcore/tensor.hpp"

namespace csfuse::numcore {

enum class LayerKind { Conv, TransposeConv, InstanceNorm, Relu, LeakyRelu, Tanh };

std::string to_string(LayerKind kind);

/// One entry of the layer catalog.
///
/// Conv kinds store `weight` as (out_c, in_c, kh, kw) and `bias` as (out_c, 1, 1, 1).
/// Instance norm stores its per-channel affine scale in `weight` and shift in
/// `bias`, both (c, 1, 1, 1). Activations carry no parameters.
struct Layer {
  LayerKind kind = LayerKind::Relu;
  std::string name;
  Tensor weight;
  Tensor bias;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t output_padding = 0;  // transpose conv only
  double slope = 0.2;              // leaky relu
  double eps = 1e-5;               // instance norm

  bool has_params() const {
    return kind == LayerKind::Conv || kind == LayerKind::TransposeConv || kind == LayerKind::InstanceNorm;
  }
  std::size_t in_channels() const;
  std::size_t out_channels() const;
};

struct LayerGrads {
  Tensor input;
  Tensor weight;  // empty for parameterless layers
  Tensor bias;
};

using Rng = std::mt19937_64;

/// Conv weights ~ N(0, init_std^2), zero bias.
Layer make_conv(std::string name, std::size_t in_c, std::size_t out_c, std::size_t kernel, std::size_t stride,
                std::size_t padding, Rng& rng, double init_std = 0.02);
Layer make_transpose_conv(std::string name, std::size_t in_c, std::size_t out_c, std::size_t kernel,
                          std::size_t stride, std::size_t padding, std::size_t output_padding, Rng& rng,
                          double init_std = 0.02);
/// Affine scale 1, shift 0.
Layer make_instance_norm(std::string name, std::size_t channels, double eps = 1e-5);
Layer make_relu(std::string name = "relu");
Layer make_leaky_relu(double slope = 0.2, std::string name = "lrelu");
Layer make_tanh(std::string name = "tanh");

/// Output shape for `in`; throws ShapeError naming the layer on mismatch.
Shape output_shape(const Layer& layer, const Shape& in);

Tensor layer_forward(const Layer& layer, const Tensor& x);

/// Exact gradients of <grad_out, layer_forward(layer, x)> w.r.t. x and the layer's parameters.
LayerGrads layer_backward(const Layer& layer, const Tensor& x, const Tensor& grad_out);

/// Parameter tensors of a layer in a fixed order (weight, bias).
void for_each_param(Layer& layer, const std::function<void(const std::string&, Tensor&)>& fn);
void for_each_param(const Layer& layer, const std::function<void(const std::string&, const Tensor&)>& fn);

}  // namespace csfuse::numcore
