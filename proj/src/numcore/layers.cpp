#include "csfuse/numcore/layers.hpp"

#include <cmath>

#include "csfuse/core/error.hpp"

namespace csfuse::numcore {
namespace {

[[noreturn]] void fail(const Layer& layer, const std::string& what) {
  throw ShapeError("layer '" + layer.name + "' (" + to_string(layer.kind) + "): " + what);
}

Tensor gaussian(Shape s, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor t(s);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

std::size_t conv_out(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// y[n,o,oh,ow] = b[o] + sum_{c,kh,kw} x[n,c,oh*s-p+kh, ow*s-p+kw] * W[o,c,kh,kw]
void conv_forward(const Tensor& x, const Layer& l, Tensor& y) {
  const Shape xs = x.shape();
  const Shape ys = y.shape();
  const Shape ws = l.weight.shape();
  const auto s = static_cast<std::ptrdiff_t>(l.stride);
  const auto p = static_cast<std::ptrdiff_t>(l.padding);
  for (std::size_t n = 0; n < ys.n; ++n) {
    for (std::size_t o = 0; o < ys.c; ++o) {
      auto out = y.plane(n, o);
      const double b = l.bias[o];
      for (double& v : out) v = b;
      for (std::size_t c = 0; c < xs.c; ++c) {
        auto in = x.plane(n, c);
        for (std::size_t kh = 0; kh < ws.h; ++kh) {
          for (std::size_t kw = 0; kw < ws.w; ++kw) {
            const double wv = l.weight.at(o, c, kh, kw);
            for (std::size_t oh = 0; oh < ys.h; ++oh) {
              const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh) * s - p + static_cast<std::ptrdiff_t>(kh);
              if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(xs.h)) continue;
              const double* row = in.data() + ih * static_cast<std::ptrdiff_t>(xs.w);
              double* orow = out.data() + oh * ys.w;
              for (std::size_t ow = 0; ow < ys.w; ++ow) {
                const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow) * s - p + static_cast<std::ptrdiff_t>(kw);
                if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(xs.w)) continue;
                orow[ow] += wv * row[iw];
              }
            }
          }
        }
      }
    }
  }
}

// Adjoint of conv_forward in x and W.
void conv_backward(const Tensor& x, const Layer& l, const Tensor& gy, LayerGrads& g) {
  const Shape xs = x.shape();
  const Shape ys = gy.shape();
  const Shape ws = l.weight.shape();
  const auto s = static_cast<std::ptrdiff_t>(l.stride);
  const auto p = static_cast<std::ptrdiff_t>(l.padding);
  for (std::size_t n = 0; n < ys.n; ++n) {
    for (std::size_t o = 0; o < ys.c; ++o) {
      auto go = gy.plane(n, o);
      double gb = 0.0;
      for (double v : go) gb += v;
      g.bias[o] += gb;
      for (std::size_t c = 0; c < xs.c; ++c) {
        auto in = x.plane(n, c);
        auto gin = g.input.plane(n, c);
        for (std::size_t kh = 0; kh < ws.h; ++kh) {
          for (std::size_t kw = 0; kw < ws.w; ++kw) {
            const double wv = l.weight.at(o, c, kh, kw);
            double gw = 0.0;
            for (std::size_t oh = 0; oh < ys.h; ++oh) {
              const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh) * s - p + static_cast<std::ptrdiff_t>(kh);
              if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(xs.h)) continue;
              const double* row = in.data() + ih * static_cast<std::ptrdiff_t>(xs.w);
              double* grow = gin.data() + ih * static_cast<std::ptrdiff_t>(xs.w);
              const double* gorow = go.data() + oh * ys.w;
              for (std::size_t ow = 0; ow < ys.w; ++ow) {
                const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow) * s - p + static_cast<std::ptrdiff_t>(kw);
                if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(xs.w)) continue;
                gw += gorow[ow] * row[iw];
                grow[iw] += gorow[ow] * wv;
              }
            }
            g.weight.at(o, c, kh, kw) += gw;
          }
        }
      }
    }
  }
}

// Transpose conv scatters each input pixel: y[n,o,ih*s-p+kh, iw*s-p+kw] += x[n,c,ih,iw] * W[o,c,kh,kw].
void tconv_forward(const Tensor& x, const Layer& l, Tensor& y) {
  const Shape xs = x.shape();
  const Shape ys = y.shape();
  const Shape ws = l.weight.shape();
  const auto s = static_cast<std::ptrdiff_t>(l.stride);
  const auto p = static_cast<std::ptrdiff_t>(l.padding);
  for (std::size_t n = 0; n < ys.n; ++n) {
    for (std::size_t o = 0; o < ys.c; ++o) {
      auto out = y.plane(n, o);
      const double b = l.bias[o];
      for (double& v : out) v = b;
      for (std::size_t c = 0; c < xs.c; ++c) {
        auto in = x.plane(n, c);
        for (std::size_t kh = 0; kh < ws.h; ++kh) {
          for (std::size_t kw = 0; kw < ws.w; ++kw) {
            const double wv = l.weight.at(o, c, kh, kw);
            for (std::size_t ih = 0; ih < xs.h; ++ih) {
              const std::ptrdiff_t oh = static_cast<std::ptrdiff_t>(ih) * s - p + static_cast<std::ptrdiff_t>(kh);
              if (oh < 0 || oh >= static_cast<std::ptrdiff_t>(ys.h)) continue;
              const double* row = in.data() + ih * xs.w;
              double* orow = out.data() + oh * static_cast<std::ptrdiff_t>(ys.w);
              for (std::size_t iw = 0; iw < xs.w; ++iw) {
                const std::ptrdiff_t ow = static_cast<std::ptrdiff_t>(iw) * s - p + static_cast<std::ptrdiff_t>(kw);
                if (ow < 0 || ow >= static_cast<std::ptrdiff_t>(ys.w)) continue;
                orow[ow] += wv * row[iw];
              }
            }
          }
        }
      }
    }
  }
}

void tconv_backward(const Tensor& x, const Layer& l, const Tensor& gy, LayerGrads& g) {
  const Shape xs = x.shape();
  const Shape ys = gy.shape();
  const Shape ws = l.weight.shape();
  const auto s = static_cast<std::ptrdiff_t>(l.stride);
  const auto p = static_cast<std::ptrdiff_t>(l.padding);
  for (std::size_t n = 0; n < ys.n; ++n) {
    for (std::size_t o = 0; o < ys.c; ++o) {
      auto go = gy.plane(n, o);
      double gb = 0.0;
      for (double v : go) gb += v;
      g.bias[o] += gb;
      for (std::size_t c = 0; c < xs.c; ++c) {
        auto in = x.plane(n, c);
        auto gin = g.input.plane(n, c);
        for (std::size_t kh = 0; kh < ws.h; ++kh) {
          for (std::size_t kw = 0; kw < ws.w; ++kw) {
            const double wv = l.weight.at(o, c, kh, kw);
            double gw = 0.0;
            for (std::size_t ih = 0; ih < xs.h; ++ih) {
              const std::ptrdiff_t oh = static_cast<std::ptrdiff_t>(ih) * s - p + static_cast<std::ptrdiff_t>(kh);
              if (oh < 0 || oh >= static_cast<std::ptrdiff_t>(ys.h)) continue;
              const double* row = in.data() + ih * xs.w;
              double* grow = gin.data() + ih * xs.w;
              const double* gorow = go.data() + oh * static_cast<std::ptrdiff_t>(ys.w);
              for (std::size_t iw = 0; iw < xs.w; ++iw) {
                const std::ptrdiff_t ow = static_cast<std::ptrdiff_t>(iw) * s - p + static_cast<std::ptrdiff_t>(kw);
                if (ow < 0 || ow >= static_cast<std::ptrdiff_t>(ys.w)) continue;
                gw += gorow[ow] * row[iw];
                grow[iw] += gorow[ow] * wv;
              }
            }
            g.weight.at(o, c, kh, kw) += gw;
          }
        }
      }
    }
  }
}

struct PlaneStats {
  double mean;
  double inv_std;
};

PlaneStats plane_stats(std::span<const double> v, double eps) {
  double mean = 0.0;
  for (double a : v) mean += a;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double a : v) var += (a - mean) * (a - mean);
  var /= static_cast<double>(v.size());
  return {mean, 1.0 / std::sqrt(var + eps)};
}

void instance_norm_forward(const Tensor& x, const Layer& l, Tensor& y) {
  const Shape xs = x.shape();
  for (std::size_t n = 0; n < xs.n; ++n) {
    for (std::size_t c = 0; c < xs.c; ++c) {
      auto in = x.plane(n, c);
      auto out = y.plane(n, c);
      const PlaneStats st = plane_stats(in, l.eps);
      const double gamma = l.weight[c];
      const double beta = l.bias[c];
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = gamma * ((in[i] - st.mean) * st.inv_std) + beta;
    }
  }
}

void instance_norm_backward(const Tensor& x, const Layer& l, const Tensor& gy, LayerGrads& g) {
  const Shape xs = x.shape();
  const double count = static_cast<double>(xs.plane());
  std::vector<double> xhat(xs.plane());
  for (std::size_t n = 0; n < xs.n; ++n) {
    for (std::size_t c = 0; c < xs.c; ++c) {
      auto in = x.plane(n, c);
      auto go = gy.plane(n, c);
      auto gi = g.input.plane(n, c);
      const PlaneStats st = plane_stats(in, l.eps);
      const double gamma = l.weight[c];
      double sum_g = 0.0;
      double sum_gx = 0.0;
      for (std::size_t i = 0; i < in.size(); ++i) {
        xhat[i] = (in[i] - st.mean) * st.inv_std;
        sum_g += go[i];
        sum_gx += go[i] * xhat[i];
      }
      g.weight[c] += sum_gx;
      g.bias[c] += sum_g;
      // d/dx of gamma * xhat with batch-free per-plane statistics.
      const double k = gamma * st.inv_std / count;
      for (std::size_t i = 0; i < in.size(); ++i) {
        gi[i] += k * (count * go[i] - sum_g - xhat[i] * sum_gx);
      }
    }
  }
}

void check_conv_input(const Layer& l, const Shape& in) {
  if (in.c != l.in_channels()) {
    fail(l, "input has " + std::to_string(in.c) + " channels, expected " + std::to_string(l.in_channels()) +
                " (input " + to_string(in) + ")");
  }
}

}  // namespace

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv: return "conv";
    case LayerKind::TransposeConv: return "transpose-conv";
    case LayerKind::InstanceNorm: return "instance-norm";
    case LayerKind::Relu: return "relu";
    case LayerKind::LeakyRelu: return "leaky-relu";
    case LayerKind::Tanh: return "tanh";
  }
  return "unknown";
}

std::size_t Layer::in_channels() const {
  switch (kind) {
    case LayerKind::Conv:
    case LayerKind::TransposeConv: return weight.shape().c;
    case LayerKind::InstanceNorm: return weight.shape().n;
    default: return 0;
  }
}

std::size_t Layer::out_channels() const {
  switch (kind) {
    case LayerKind::Conv:
    case LayerKind::TransposeConv:
    case LayerKind::InstanceNorm: return weight.shape().n;
    default: return 0;
  }
}

Layer make_conv(std::string name, std::size_t in_c, std::size_t out_c, std::size_t kernel, std::size_t stride,
                std::size_t padding, Rng& rng, double init_std) {
  if (stride < 1) throw ShapeError("conv '" + name + "': stride must be >= 1");
  Layer l;
  l.kind = LayerKind::Conv;
  l.name = std::move(name);
  l.weight = gaussian({out_c, in_c, kernel, kernel}, init_std, rng);
  l.bias = Tensor({out_c, 1, 1, 1});
  l.stride = stride;
  l.padding = padding;
  return l;
}

Layer make_transpose_conv(std::string name, std::size_t in_c, std::size_t out_c, std::size_t kernel,
                          std::size_t stride, std::size_t padding, std::size_t output_padding, Rng& rng,
                          double init_std) {
  if (stride < 1) throw ShapeError("transpose conv '" + name + "': stride must be >= 1");
  if (output_padding >= stride) throw ShapeError("transpose conv '" + name + "': output_padding must be < stride");
  Layer l;
  l.kind = LayerKind::TransposeConv;
  l.name = std::move(name);
  l.weight = gaussian({out_c, in_c, kernel, kernel}, init_std, rng);
  l.bias = Tensor({out_c, 1, 1, 1});
  l.stride = stride;
  l.padding = padding;
  l.output_padding = output_padding;
  return l;
}

Layer make_instance_norm(std::string name, std::size_t channels, double eps) {
  Layer l;
  l.kind = LayerKind::InstanceNorm;
  l.name = std::move(name);
  l.weight = Tensor({channels, 1, 1, 1}, 1.0);
  l.bias = Tensor({channels, 1, 1, 1}, 0.0);
  l.eps = eps;
  return l;
}

Layer make_relu(std::string name) {
  Layer l;
  l.kind = LayerKind::Relu;
  l.name = std::move(name);
  return l;
}

Layer make_leaky_relu(double slope, std::string name) {
  Layer l;
  l.kind = LayerKind::LeakyRelu;
  l.name = std::move(name);
  l.slope = slope;
  return l;
}

Layer make_tanh(std::string name) {
  Layer l;
  l.kind = LayerKind::Tanh;
  l.name = std::move(name);
  return l;
}

Shape output_shape(const Layer& l, const Shape& in) {
  switch (l.kind) {
    case LayerKind::Conv: {
      check_conv_input(l, in);
      const Shape ws = l.weight.shape();
      if (in.h + 2 * l.padding < ws.h || in.w + 2 * l.padding < ws.w) {
        fail(l, "kernel " + std::to_string(ws.h) + "x" + std::to_string(ws.w) + " larger than padded input " +
                    to_string(in));
      }
      return {in.n, ws.n, conv_out(in.h, ws.h, l.stride, l.padding), conv_out(in.w, ws.w, l.stride, l.padding)};
    }
    case LayerKind::TransposeConv: {
      check_conv_input(l, in);
      const Shape ws = l.weight.shape();
      const std::size_t full_h = (in.h - 1) * l.stride + ws.h + l.output_padding;
      const std::size_t full_w = (in.w - 1) * l.stride + ws.w + l.output_padding;
      if (in.h == 0 || in.w == 0 || full_h <= 2 * l.padding || full_w <= 2 * l.padding) {
        fail(l, "padding " + std::to_string(l.padding) + " leaves no output for input " + to_string(in));
      }
      return {in.n, ws.n, full_h - 2 * l.padding, full_w - 2 * l.padding};
    }
    case LayerKind::InstanceNorm:
      if (in.c != l.weight.shape().n) {
        fail(l, "input has " + std::to_string(in.c) + " channels, expected " + std::to_string(l.weight.shape().n));
      }
      return in;
    default: return in;
  }
}

Tensor layer_forward(const Layer& l, const Tensor& x) {
  Tensor y(output_shape(l, x.shape()));
  switch (l.kind) {
    case LayerKind::Conv: conv_forward(x, l, y); break;
    case LayerKind::TransposeConv: tconv_forward(x, l, y); break;
    case LayerKind::InstanceNorm: instance_norm_forward(x, l, y); break;
    case LayerKind::Relu:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
      break;
    case LayerKind::LeakyRelu:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : l.slope * x[i];
      break;
    case LayerKind::Tanh:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
      break;
  }
  return y;
}

LayerGrads layer_backward(const Layer& l, const Tensor& x, const Tensor& gy) {
  const Shape expect = output_shape(l, x.shape());
  if (gy.shape() != expect) {
    fail(l, "grad_out shape " + to_string(gy.shape()) + " does not match output shape " + to_string(expect));
  }
  LayerGrads g;
  g.input = Tensor(x.shape());
  if (l.has_params()) {
    g.weight = Tensor(l.weight.shape());
    g.bias = Tensor(l.bias.shape());
  }
  switch (l.kind) {
    case LayerKind::Conv: conv_backward(x, l, gy, g); break;
    case LayerKind::TransposeConv: tconv_backward(x, l, gy, g); break;
    case LayerKind::InstanceNorm: instance_norm_backward(x, l, gy, g); break;
    case LayerKind::Relu:
      for (std::size_t i = 0; i < x.size(); ++i) g.input[i] = x[i] > 0.0 ? gy[i] : 0.0;
      break;
    case LayerKind::LeakyRelu:
      for (std::size_t i = 0; i < x.size(); ++i) g.input[i] = x[i] > 0.0 ? gy[i] : l.slope * gy[i];
      break;
    case LayerKind::Tanh:
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double t = std::tanh(x[i]);
        g.input[i] = gy[i] * (1.0 - t * t);
      }
      break;
  }
  return g;
}

void for_each_param(Layer& l, const std::function<void(const std::string&, Tensor&)>& fn) {
  if (!l.has_params()) return;
  fn(l.name + ".weight", l.weight);
  fn(l.name + ".bias", l.bias);
}

void for_each_param(const Layer& l, const std::function<void(const std::string&, const Tensor&)>& fn) {
  if (!l.has_params()) return;
  fn(l.name + ".weight", l.weight);
  fn(l.name + ".bias", l.bias);
}

}  // namespace csfuse::numcore
