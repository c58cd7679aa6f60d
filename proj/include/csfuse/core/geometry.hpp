#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace csfuse {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }
  friend bool operator==(Point2 a, Point2 b) = default;
};

inline double norm(Point2 p) { return std::hypot(p.x, p.y); }

/// Ordered landmarks; index j names the same semantic landmark in every domain.
using FeaturePoints = std::vector<Point2>;

/// Axis-aligned box in continuous pixel coordinates, top-left origin.
/// Pixel (i, j) covers [i, i+1) x [j, j+1).
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double right() const { return x + w; }
  double bottom() const { return y + h; }
  double cx() const { return x + 0.5 * w; }
  double cy() const { return y + 0.5 * h; }
  double area() const { return w > 0.0 && h > 0.0 ? w * h : 0.0; }
  bool valid() const { return w > 0.0 && h > 0.0; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Intersection of `box` with [0, width) x [0, height); zero-area when disjoint.
inline BBox clip_to_frame(const BBox& box, double width, double height) {
  const double x0 = std::max(0.0, box.x);
  const double y0 = std::max(0.0, box.y);
  const double x1 = std::min(width, box.right());
  const double y1 = std::min(height, box.bottom());
  return {x0, y0, std::max(0.0, x1 - x0), std::max(0.0, y1 - y0)};
}

inline double iou(const BBox& a, const BBox& b) {
  const double x0 = std::max(a.x, b.x);
  const double y0 = std::max(a.y, b.y);
  const double x1 = std::min(a.right(), b.right());
  const double y1 = std::min(a.bottom(), b.bottom());
  const double inter = std::max(0.0, x1 - x0) * std::max(0.0, y1 - y0);
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace csfuse
