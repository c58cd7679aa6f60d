#pragma once

#include "csfuse/csgan/landmarks.hpp"
#include "csfuse/data/rig.hpp"

namespace csfuse::data {

struct DetectorParams {
  std::size_t radius = 0;         // 0 = max(2, T/16)
  std::size_t search_radius = 0;  // 0 = max(3, 3T/16)
  std::size_t soft_window = 1;
  double beta = 20.0;
  double threshold = 0.5;
};

/// Landmark detector whose templates are cut from the canonical face tile.
csgan::LandmarkDetector make_detector(const RigSpec& rig, std::size_t tile, const DetectorParams& params = {});

}  // namespace csfuse::data
