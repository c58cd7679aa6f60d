#pragma once

#include <vector>

#include "csfuse/core/geometry.hpp"
#include "csfuse/core/image.hpp"
#include "csfuse/numcore/tensor.hpp"

namespace csfuse::data {

using numcore::Tensor;

/// Area-averaged resample of `box` to a (1, 3, T, T) tile; [0, 255] maps to [-1, 1].
Tensor rgb_tile(const RgbImage& img, const BBox& box, std::size_t tile);
/// Same for raw counts; [0, 65535] maps to [-1, 1]; shape (1, 1, T, T).
Tensor thermal_tile(const Gray16Image& img, const BBox& box, std::size_t tile);

/// Quantizes a (n, 3, T, T) tile in [-1, 1] back to 8-bit.
RgbImage tile_to_rgb(const Tensor& tiles, std::size_t sample = 0);

Point2 to_tile(Point2 frame_pt, const BBox& box, std::size_t tile);
Point2 from_tile(Point2 tile_pt, const BBox& box, std::size_t tile);

/// Skin-colored blob detector: one box per connected skin region of at least `min_area`
/// pixels, sized from the region's second moments (disk/ellipse assumption), ordered left to right.
std::vector<BBox> detect_faces(const RgbImage& img, int min_area = 30);

}  // namespace csfuse::data
