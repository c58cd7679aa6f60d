#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "csfuse/core/geometry.hpp"

namespace csfuse::fusion {

struct Resolution {
  int w = 0;
  int h = 0;
};

struct CameraCalib {
  double f_y = 320.0;  // visual focal length, px
  double f_x = 320.0;  // thermal focal length, px
  Resolution r_y{640, 160};
  Resolution r_x{640, 160};
  double baseline_ft = 0.35;
  double b_hat_px = 28.0;
  double sweep_range_px = 12.0;
  double sweep_step_px = 4.0;

  /// Throws ConfigError when an invariant is violated.
  void validate() const;
};

std::string calib_json(const CameraCalib& c);
/// Throws ConfigError on missing/unknown keys or invalid values.
CameraCalib calib_from_json(const std::string& text);

/// B_x = f_X/f_Y · B_y, shifted right by `disparity`, clipped to R_X; nullopt when nothing is left.
std::optional<BBox> map_bbox(const BBox& b_y, const CameraCalib& calib, double disparity);

struct Candidate {
  double disparity = 0.0;
  BBox box;
};

/// One candidate per disparity in b̂ - range, ..., b̂ + range (step `sweep_step_px`);
/// candidates clipped away entirely are dropped, so an empty result is the empty-candidate signal.
std::vector<Candidate> propose_candidates(const BBox& b_y, const CameraCalib& calib);

/// Grows both boxes about their centers to the elementwise max size, then clips each to its
/// frame. Throws DataError if either result has zero area.
std::pair<BBox, BBox> expand_to_common_size(const BBox& b_y, const BBox& b_x, Resolution frame_y, Resolution frame_x);

}  // namespace csfuse::fusion
