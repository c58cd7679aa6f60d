#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "csfuse/numcore/layers.hpp"
#include "csfuse/numcore/tensor.hpp"

namespace testsupport {

using csfuse::numcore::Layer;
using csfuse::numcore::Shape;
using csfuse::numcore::Tensor;

inline Tensor random_tensor(Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(s);
  for (double& v : t.data()) v = u(rng);
  return t;
}

/// Values with magnitude in [0.05, 1], random sign; keeps ReLU kinks out of FD probes.
inline Tensor random_away_from_zero(Shape s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::bernoulli_distribution sign(0.5);
  Tensor t(s);
  for (double& v : t.data()) v = sign(rng) ? u(rng) : -u(rng);
  return t;
}

inline double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Direct nested-loop convolution (cross-correlation), zero padding.
inline Tensor conv2d_direct(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride, std::size_t pad) {
  const Shape xs = x.shape();
  const Shape ws = w.shape();
  const std::size_t oh = (xs.h + 2 * pad - ws.h) / stride + 1;
  const std::size_t ow = (xs.w + 2 * pad - ws.w) / stride + 1;
  Tensor y(Shape{xs.n, ws.n, oh, ow});
  for (std::size_t n = 0; n < xs.n; ++n)
    for (std::size_t o = 0; o < ws.n; ++o)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          double acc = b.empty() ? 0.0 : b[o];
          for (std::size_t c = 0; c < xs.c; ++c)
            for (std::size_t ki = 0; ki < ws.h; ++ki)
              for (std::size_t kj = 0; kj < ws.w; ++kj) {
                const long r = static_cast<long>(i * stride + ki) - static_cast<long>(pad);
                const long q = static_cast<long>(j * stride + kj) - static_cast<long>(pad);
                if (r < 0 || q < 0 || r >= static_cast<long>(xs.h) || q >= static_cast<long>(xs.w)) continue;
                acc += x.at(n, c, r, q) * w.at(o, c, ki, kj);
              }
          y.at(n, o, i, j) = acc;
        }
  return y;
}

/// Transpose convolution as an explicit scatter; weight (out, in, kh, kw) like the library.
inline Tensor tconv2d_scatter(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride, std::size_t pad,
                              std::size_t out_pad) {
  const Shape xs = x.shape();
  const Shape ws = w.shape();
  const std::size_t oh = (xs.h - 1) * stride + ws.h + out_pad - 2 * pad;
  const std::size_t ow = (xs.w - 1) * stride + ws.w + out_pad - 2 * pad;
  Tensor y(Shape{xs.n, ws.n, oh, ow});
  for (std::size_t n = 0; n < xs.n; ++n) {
    for (std::size_t o = 0; o < ws.n; ++o)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) y.at(n, o, i, j) = b.empty() ? 0.0 : b[o];
    for (std::size_t c = 0; c < xs.c; ++c)
      for (std::size_t i = 0; i < xs.h; ++i)
        for (std::size_t j = 0; j < xs.w; ++j)
          for (std::size_t o = 0; o < ws.n; ++o)
            for (std::size_t ki = 0; ki < ws.h; ++ki)
              for (std::size_t kj = 0; kj < ws.w; ++kj) {
                const long r = static_cast<long>(i * stride + ki) - static_cast<long>(pad);
                const long q = static_cast<long>(j * stride + kj) - static_cast<long>(pad);
                if (r < 0 || q < 0 || r >= static_cast<long>(oh) || q >= static_cast<long>(ow)) continue;
                y.at(n, o, r, q) += x.at(n, c, i, j) * w.at(o, c, ki, kj);
              }
  }
  return y;
}

/// Central finite difference of f along coordinate i of `t` (perturbed in place and restored).
template <class F>
double central_diff(Tensor& t, std::size_t i, double step, F&& f) {
  const double orig = t[i];
  t[i] = orig + step;
  const double fp = f();
  t[i] = orig - step;
  const double fm = f();
  t[i] = orig;
  return (fp - fm) / (2.0 * step);
}

inline double rel_err(double a, double n) {
  const double d = std::max({std::abs(a), std::abs(n), 1e-8});
  return std::abs(a - n) / d;
}

}  // namespace testsupport
