#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace csfuse::numcore {

/// (batch, channel, height, width).
struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t count() const { return n * c * h * w; }
  std::size_t plane() const { return h * w; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

/// Dense 4-D array of doubles, row-major in (n, c, h, w).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }
  double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }

  /// The (n, c) spatial plane.
  std::span<double> plane(std::size_t n, std::size_t c) {
    return std::span<double>(data_).subspan((n * shape_.c + c) * shape_.plane(), shape_.plane());
  }
  std::span<const double> plane(std::size_t n, std::size_t c) const {
    return std::span<const double>(data_).subspan((n * shape_.c + c) * shape_.plane(), shape_.plane());
  }

  bool all_finite() const;
  void fill(double v);

  /// Samples [first, first + count) along the batch axis.
  Tensor slice_batch(std::size_t first, std::size_t count) const;

  Tensor& operator+=(const Tensor& other);
  Tensor& operator-=(const Tensor& other);
  Tensor& operator*=(double s);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

Tensor operator+(Tensor a, const Tensor& b);
Tensor operator-(Tensor a, const Tensor& b);
Tensor operator*(double s, Tensor a);

/// Stacks equally shaped tensors along the batch axis.
Tensor concat_batch(std::span<const Tensor> parts);

double sum(const Tensor& t);
double max_abs_diff(const Tensor& a, const Tensor& b);

void require_same_shape(const Tensor& a, const Tensor& b, const std::string& context);

}  // namespace csfuse::numcore
