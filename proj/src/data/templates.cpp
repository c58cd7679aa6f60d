#include "csfuse/data/templates.hpp"

#include <algorithm>

#include "csfuse/data/tiles.hpp"

namespace csfuse::data {

csgan::LandmarkDetector make_detector(const RigSpec& rig, std::size_t tile, const DetectorParams& params) {
  csgan::LandmarkDetector det;
  det.tile = tile;
  det.radius = params.radius ? params.radius : std::max<std::size_t>(2, tile / 16);
  det.search_radius = params.search_radius ? params.search_radius : std::max<std::size_t>(3, 3 * tile / 16);
  det.soft_window = params.soft_window;
  det.beta = params.beta;
  det.threshold = params.threshold;
  const FaceShape face = canonical_face();
  const RgbImage img = render_face_tile(face, tile, rig.crop_scale, rig);
  const double T = static_cast<double>(tile);
  const Tensor t = rgb_tile(img, BBox{0.0, 0.0, T, T}, tile);
  for (const Point2& p : face_tile_landmarks(face, tile, rig.crop_scale)) {
    det.templates.push_back(csgan::make_template(t, 0, p, det.radius));
  }
  return det;
}

}  // namespace csfuse::data
