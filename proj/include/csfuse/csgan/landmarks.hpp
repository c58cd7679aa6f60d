#pragma once

#include <span>
#include <vector>

#include "csfuse/core/geometry.hpp"
#include "csfuse/numcore/tensor.hpp"

namespace csfuse::csgan {

using numcore::Tensor;

/// Landmark order shared by every domain.
enum LandmarkIndex : std::size_t { kLeftCanthus = 0, kRightCanthus = 1, kNoseTip = 2, kMouth = 3, kLandmarkCount = 4 };

struct LandmarkTemplate {
  std::vector<double> patch;  // (2r+1)^2, zero mean, unit norm
  Point2 canonical;           // tile coordinates, pixel (i, j) spans [j, j+1) x [i, i+1)
};

/// Template-correlation landmark detector on grayscale tiles (channel mean).
/// Peak: argmax of normalized cross-correlation inside a square search region around the
/// canonical position. Position: soft-argmax of plain correlation over a small window at the
/// peak, so points are differentiable in the image.
struct LandmarkDetector {
  std::size_t tile = 64;
  std::size_t radius = 4;         // template half-size
  std::size_t search_radius = 12;
  std::size_t soft_window = 1;    // half-size of the soft-argmax window
  double beta = 20.0;
  double threshold = 0.5;         // minimum NCC at every peak
  std::vector<LandmarkTemplate> templates;

  std::size_t count() const { return templates.size(); }
};

struct LandmarkHit {
  Point2 point;
  double ncc = 0.0;
  std::size_t peak_x = 0, peak_y = 0;
  std::vector<double> weights;  // soft-argmax weights over the window, row-major
  std::size_t wx0 = 0, wy0 = 0, ww = 0, wh = 0;
};

struct Detection {
  bool found = false;
  std::vector<LandmarkHit> hits;  // always one per template, even when not found

  FeaturePoints points() const;
  double min_ncc() const;
};

/// Cut a zero-mean unit-norm template around `center` of a (1, C, T, T) tile.
LandmarkTemplate make_template(const Tensor& tile, std::size_t sample, Point2 center, std::size_t radius);

/// Runs the detector on sample `sample` of a (n, C, T, T) batch.
Detection detect(const LandmarkDetector& det, const Tensor& batch, std::size_t sample = 0);

/// Accumulates d(Σ_j <grad_j, p_j>)/d(image) into `grad_batch` for the given sample.
void detect_backward(const LandmarkDetector& det, const Detection& d, std::span<const Point2> grad_points,
                     Tensor& grad_batch, std::size_t sample = 0);

}  // namespace csfuse::csgan
