#include "csfuse/csgan/network.hpp"

#include <cmath>

#include "csfuse/core/error.hpp"

namespace csfuse::csgan {

using namespace numcore;

std::size_t DualBrb::channels() const { return g.layers.back().in_channels(); }
std::size_t DualBrb::bottleneck() const { return g.layers.back().out_channels(); }

DualBrb make_dual_brb(const std::string& name, std::size_t channels, std::size_t bottleneck, Rng& rng,
                      double init_std) {
  if (channels == 0 || bottleneck == 0) throw ShapeError("dual-brb '" + name + "': channel counts must be positive");
  DualBrb b;
  b.name = name;
  b.g.layers = {make_instance_norm(name + ".g.norm", channels), make_relu(name + ".g.relu"),
                make_conv(name + ".g.conv", channels, bottleneck, 1, 1, 0, rng, init_std)};
  b.f.layers = {make_instance_norm(name + ".f.norm0", bottleneck), make_relu(name + ".f.relu0"),
                make_conv(name + ".f.conv0", bottleneck, bottleneck, 3, 1, 1, rng, init_std),
                make_instance_norm(name + ".f.norm1", bottleneck), make_relu(name + ".f.relu1"),
                make_conv(name + ".f.conv1", bottleneck, bottleneck, 3, 1, 1, rng, init_std)};
  b.h.layers = {make_instance_norm(name + ".h.norm", bottleneck), make_relu(name + ".h.relu"),
                make_conv(name + ".h.conv", bottleneck, channels, 1, 1, 0, rng, init_std)};
  return b;
}

Tensor dual_brb_forward(const DualBrb& block, const Tensor& x, DualBrbTape* tape) {
  if (x.shape().c != block.channels()) {
    throw ShapeError("dual-brb '" + block.name + "': input has " + std::to_string(x.shape().c) +
                     " channels, expected " + std::to_string(block.channels()));
  }
  Tape tg, tf, th;
  Tensor gx = numcore::forward(block.g, x, tape ? &tg : nullptr);
  Tensor s = numcore::forward(block.f, gx, tape ? &tf : nullptr);
  s += gx;
  Tensor y = numcore::forward(block.h, s, tape ? &th : nullptr);
  y += x;
  if (tape) {
    tape->g = std::move(tg);
    tape->f = std::move(tf);
    tape->h = std::move(th);
    tape->gx = std::move(gx);
  }
  return y;
}

Tensor dual_brb_backward(const DualBrb& block, const DualBrbTape& tape, const Tensor& grad_out,
                         DualBrb* param_grads) {
  Tensor gs = numcore::backward(block.h, tape.h, grad_out, param_grads ? &param_grads->h : nullptr);
  Tensor gw = numcore::backward(block.f, tape.f, gs, param_grads ? &param_grads->f : nullptr);
  gw += gs;
  Tensor gx = numcore::backward(block.g, tape.g, gw, param_grads ? &param_grads->g : nullptr);
  gx += grad_out;
  return gx;
}

Tensor forward(const Network& net, const Tensor& x, NetTape* tape) {
  if (tape) tape->assign(net.blocks.size(), {});
  Tensor cur = x;
  for (std::size_t i = 0; i < net.blocks.size(); ++i) {
    Tensor next;
    if (const auto* l = std::get_if<Layer>(&net.blocks[i])) {
      next = layer_forward(*l, cur);
    } else {
      next = dual_brb_forward(std::get<DualBrb>(net.blocks[i]), cur, tape ? &(*tape)[i].brb : nullptr);
    }
    if (tape) (*tape)[i].input = std::move(cur);
    cur = std::move(next);
  }
  return cur;
}

Tensor backward(const Network& net, const NetTape& tape, const Tensor& grad_out, Network* param_grads) {
  if (tape.size() != net.blocks.size()) throw ShapeError("network backward: tape length does not match network");
  Tensor g = grad_out;
  for (std::size_t i = net.blocks.size(); i-- > 0;) {
    if (const auto* l = std::get_if<Layer>(&net.blocks[i])) {
      LayerGrads lg = layer_backward(*l, tape[i].input, g);
      if (param_grads && l->has_params()) {
        auto& pl = std::get<Layer>(param_grads->blocks[i]);
        pl.weight += lg.weight;
        pl.bias += lg.bias;
      }
      g = std::move(lg.input);
    } else {
      g = dual_brb_backward(std::get<DualBrb>(net.blocks[i]), tape[i].brb, g,
                            param_grads ? &std::get<DualBrb>(param_grads->blocks[i]) : nullptr);
    }
  }
  return g;
}

Network zeros_like(const Network& net) {
  Network z = net;
  for_each_param(z, [](const std::string&, Tensor& t) { t.fill(0.0); });
  return z;
}

void for_each_param(Network& net, const std::function<void(const std::string&, Tensor&)>& fn) {
  for (Block& b : net.blocks) {
    if (auto* l = std::get_if<Layer>(&b)) {
      numcore::for_each_param(*l, fn);
    } else {
      auto& brb = std::get<DualBrb>(b);
      numcore::for_each_param(brb.g, fn);
      numcore::for_each_param(brb.f, fn);
      numcore::for_each_param(brb.h, fn);
    }
  }
}

void for_each_param(const Network& net, const std::function<void(const std::string&, const Tensor&)>& fn) {
  for (const Block& b : net.blocks) {
    if (const auto* l = std::get_if<Layer>(&b)) {
      numcore::for_each_param(*l, fn);
    } else {
      const auto& brb = std::get<DualBrb>(b);
      numcore::for_each_param(brb.g, fn);
      numcore::for_each_param(brb.f, fn);
      numcore::for_each_param(brb.h, fn);
    }
  }
}

std::vector<Tensor*> param_list(Network& net) {
  std::vector<Tensor*> out;
  for_each_param(net, [&](const std::string&, Tensor& t) { out.push_back(&t); });
  return out;
}

std::size_t param_count(const Network& net) {
  std::size_t n = 0;
  for_each_param(net, [&](const std::string&, const Tensor& t) { n += t.size(); });
  return n;
}

Network make_generator(const GeneratorSpec& spec, Rng& rng, double init_std) {
  if (spec.tile % 4 != 0 || spec.tile < 8) throw ShapeError("generator tile size must be a multiple of 4 and >= 8");
  if (spec.base == 0) throw ShapeError("generator base channels must be positive");
  const std::size_t b = spec.base;
  Network net;
  auto add = [&](Layer l) { net.blocks.emplace_back(std::move(l)); };
  add(make_conv("enc0.conv", spec.channels, b, 7, 1, 3, rng, init_std));
  add(make_instance_norm("enc0.norm", b));
  add(make_relu("enc0.relu"));
  add(make_conv("enc1.conv", b, 2 * b, 3, 2, 1, rng, init_std));
  add(make_instance_norm("enc1.norm", 2 * b));
  add(make_relu("enc1.relu"));
  add(make_conv("enc2.conv", 2 * b, 4 * b, 3, 2, 1, rng, init_std));
  add(make_instance_norm("enc2.norm", 4 * b));
  add(make_relu("enc2.relu"));
  const std::size_t c = 4 * b;
  for (std::size_t i = 0; i < spec.n_blocks; ++i) {
    net.blocks.emplace_back(make_dual_brb("brb" + std::to_string(i), c, std::max<std::size_t>(1, c / 4), rng, init_std));
  }
  add(make_transpose_conv("dec0.tconv", 4 * b, 2 * b, 3, 2, 1, 1, rng, init_std));
  add(make_instance_norm("dec0.norm", 2 * b));
  add(make_relu("dec0.relu"));
  add(make_transpose_conv("dec1.tconv", 2 * b, b, 3, 2, 1, 1, rng, init_std));
  add(make_instance_norm("dec1.norm", b));
  add(make_relu("dec1.relu"));
  add(make_conv("out.conv", b, spec.channels, 7, 1, 3, rng, init_std));
  add(make_tanh("out.tanh"));
  return net;
}

Network make_discriminator(const DiscriminatorSpec& spec, Rng& rng, double init_std) {
  if (spec.n_down == 0) throw ShapeError("discriminator needs at least one downsampling stage");
  if (spec.tile >> spec.n_down < 2) throw ShapeError("discriminator tile too small for its downsampling depth");
  Network net;
  auto add = [&](Layer l) { net.blocks.emplace_back(std::move(l)); };
  std::size_t c = spec.base;
  add(make_conv("d0.conv", spec.channels, c, 4, 2, 1, rng, init_std));
  add(make_leaky_relu(0.2, "d0.lrelu"));
  for (std::size_t i = 1; i < spec.n_down; ++i) {
    const std::string p = "d" + std::to_string(i);
    add(make_conv(p + ".conv", c, 2 * c, 4, 2, 1, rng, init_std));
    add(make_instance_norm(p + ".norm", 2 * c));
    add(make_leaky_relu(0.2, p + ".lrelu"));
    c *= 2;
  }
  add(make_conv("s.conv", c, 2 * c, 4, 1, 1, rng, init_std));
  add(make_instance_norm("s.norm", 2 * c));
  add(make_leaky_relu(0.2, "s.lrelu"));
  add(make_conv("score.conv", 2 * c, 1, 4, 1, 1, rng, init_std));
  return net;
}

Network make_perceptual_net(std::size_t channels, std::size_t width, Rng& rng) {
  Network net;
  net.blocks.emplace_back(make_conv("phi0.conv", channels, width, 3, 1, 1, rng, std::sqrt(2.0 / (9.0 * channels))));
  net.blocks.emplace_back(make_relu("phi0.relu"));
  net.blocks.emplace_back(make_conv("phi1.conv", width, width, 3, 1, 1, rng, std::sqrt(2.0 / (9.0 * width))));
  net.blocks.emplace_back(make_relu("phi1.relu"));
  net.blocks.emplace_back(make_conv("phi2.conv", width, width, 3, 1, 1, rng, std::sqrt(2.0 / (9.0 * width))));
  return net;
}

void check_generator_input(const GeneratorSpec& spec, const Tensor& x) {
  const Shape s = x.shape();
  if (s.c != spec.channels || s.h != spec.tile || s.w != spec.tile) {
    throw ShapeError("generator expects (n, " + std::to_string(spec.channels) + ", " + std::to_string(spec.tile) +
                     ", " + std::to_string(spec.tile) + "), got " + to_string(s));
  }
}

Shape discriminator_output_shape(const Network& disc, const Shape& in) {
  Shape s = in;
  for (const Block& b : disc.blocks) s = output_shape(std::get<Layer>(b), s);
  return s;
}

}  // namespace csfuse::csgan
