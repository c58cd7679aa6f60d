#pragma once

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "csfuse/numcore/sequential.hpp"

namespace csfuse::csgan {

using numcore::Layer;
using numcore::Rng;
using numcore::Sequential;
using numcore::Shape;
using numcore::Tape;
using numcore::Tensor;

/// y = H(F(G(x)) + G(x)) + x, each sub-block pre-activated (norm, ReLU, conv).
struct DualBrb {
  std::string name;
  Sequential g;  // 1x1, C -> C_b
  Sequential f;  // 3x3, 3x3, C_b -> C_b
  Sequential h;  // 1x1, C_b -> C

  std::size_t channels() const;
  std::size_t bottleneck() const;
};

DualBrb make_dual_brb(const std::string& name, std::size_t channels, std::size_t bottleneck, Rng& rng,
                      double init_std = 0.02);

struct DualBrbTape {
  Tape g, f, h;
  Tensor gx;  // G(x), reused by the inner skip
};

Tensor dual_brb_forward(const DualBrb& block, const Tensor& x, DualBrbTape* tape = nullptr);
/// Gradient w.r.t. the block input; parameter gradients added into `param_grads` when non-null.
Tensor dual_brb_backward(const DualBrb& block, const DualBrbTape& tape, const Tensor& grad_out,
                         DualBrb* param_grads);

using Block = std::variant<Layer, DualBrb>;

struct Network {
  std::vector<Block> blocks;
};

struct BlockTape {
  Tensor input;
  DualBrbTape brb;
};
using NetTape = std::vector<BlockTape>;

Tensor forward(const Network& net, const Tensor& x, NetTape* tape = nullptr);
Tensor backward(const Network& net, const NetTape& tape, const Tensor& grad_out, Network* param_grads);

Network zeros_like(const Network& net);

/// Visits parameters as "<layer name>.weight" / "<layer name>.bias" in a fixed order.
void for_each_param(Network& net, const std::function<void(const std::string&, Tensor&)>& fn);
void for_each_param(const Network& net, const std::function<void(const std::string&, const Tensor&)>& fn);
std::vector<Tensor*> param_list(Network& net);
std::size_t param_count(const Network& net);

struct GeneratorSpec {
  std::size_t channels = 3;
  std::size_t base = 64;
  std::size_t n_blocks = 6;
  std::size_t tile = 64;
};

struct DiscriminatorSpec {
  std::size_t channels = 3;
  std::size_t base = 64;
  std::size_t n_down = 3;
  std::size_t tile = 64;
};

Network make_generator(const GeneratorSpec& spec, Rng& rng, double init_std = 0.02);
Network make_discriminator(const DiscriminatorSpec& spec, Rng& rng, double init_std = 0.02);
/// Fixed three-layer conv feature map used for the perceptual loss; He-scaled so features keep unit scale.
Network make_perceptual_net(std::size_t channels, std::size_t width, Rng& rng);

/// Rejects a tile that does not match the generator's configured input.
void check_generator_input(const GeneratorSpec& spec, const Tensor& x);
Shape discriminator_output_shape(const Network& disc, const Shape& in);

}  // namespace csfuse::csgan
