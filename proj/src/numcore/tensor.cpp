#include "csfuse/numcore/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "csfuse/core/error.hpp"

namespace csfuse::numcore {

std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," + std::to_string(s.h) + "," +
         std::to_string(s.w) + ")";
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.count(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.count()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                     to_string(shape_));
  }
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::slice_batch(std::size_t first, std::size_t count) const {
  if (first + count > shape_.n) {
    throw ShapeError("batch slice [" + std::to_string(first) + ", " + std::to_string(first + count) +
                     ") out of range for " + to_string(shape_));
  }
  Shape s = shape_;
  s.n = count;
  const std::size_t per = shape_.c * shape_.plane();
  std::vector<double> d(data_.begin() + static_cast<std::ptrdiff_t>(first * per),
                        data_.begin() + static_cast<std::ptrdiff_t>((first + count) * per));
  return Tensor(s, std::move(d));
}

Tensor& Tensor::operator+=(const Tensor& other) {
  require_same_shape(*this, other, "tensor +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
  require_same_shape(*this, other, "tensor -=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
Tensor operator*(double s, Tensor a) { return a *= s; }

Tensor concat_batch(std::span<const Tensor> parts) {
  if (parts.empty()) {
    return Tensor();
  }
  Shape s = parts.front().shape();
  std::vector<double> d;
  d.reserve(s.count() * parts.size());
  for (const Tensor& p : parts) {
    const Shape& ps = p.shape();
    if (ps.c != s.c || ps.h != s.h || ps.w != s.w) {
      throw ShapeError("concat_batch: shape " + to_string(ps) + " incompatible with " + to_string(s));
    }
    d.insert(d.end(), p.data().begin(), p.data().end());
  }
  s.n = 0;
  for (const Tensor& p : parts) s.n += p.shape().n;
  return Tensor(s, std::move(d));
}

double sum(const Tensor& t) {
  double acc = 0.0;
  for (double v : t.data()) acc += v;
  return acc;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void require_same_shape(const Tensor& a, const Tensor& b, const std::string& context) {
  if (a.shape() != b.shape()) {
    throw ShapeError(context + ": shape " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

}  // namespace csfuse::numcore
