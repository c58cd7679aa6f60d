#include "csfuse/fusion/associate.hpp"

#include <limits>

#include "csfuse/core/error.hpp"
#include "csfuse/data/rig.hpp"
#include "csfuse/data/tiles.hpp"

namespace csfuse::fusion {

Synthesizer csgan_synthesizer(const csgan::CsganModel& model) {
  return [&model](const Tensor& thermal) {
    return csgan::synthesize_visual(model, csgan::replicate_channels(thermal, model.spec.gen.channels));
  };
}

Synthesizer identity_synthesizer() {
  return [](const Tensor& thermal) { return csgan::replicate_channels(thermal, 3); };
}

std::vector<double> frame_disparity_vector(const FeaturePoints& v, const FeaturePoints& q, const BBox& crop_y,
                                           const CameraCalib& calib, std::size_t tile) {
  if (v.size() != q.size()) throw ShapeError("frame_disparity_vector: point counts differ");
  const double back = calib.f_y / calib.f_x;
  FeaturePoints a, b;
  for (std::size_t j = 0; j < v.size(); ++j) {
    a.push_back(data::to_tile(v[j], crop_y, tile));
    b.push_back(data::to_tile(back * q[j], crop_y, tile));
  }
  return disparity_vector(a, b);
}

namespace {

double mean_residual(const FeaturePoints& a, const FeaturePoints& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += norm(a[j] - b[j]);
  return s / static_cast<double>(a.size());
}

}  // namespace

std::optional<std::vector<double>> labelled_disparity_vector(const RgbImage& visual, const FeaturePoints& v,
                                                             const FeaturePoints& q, const CameraCalib& calib,
                                                             const AssociateOptions& opt) {
  if (v.empty()) return std::nullopt;
  Point2 mid;
  for (const auto& p : v) mid = mid + (1.0 / static_cast<double>(v.size())) * p;
  const auto faces = opt.detect_faces ? opt.detect_faces(visual) : data::detect_faces(visual);
  for (const auto& f : faces) {
    if (mid.x >= f.x && mid.x < f.right() && mid.y >= f.y && mid.y < f.bottom()) {
      return frame_disparity_vector(v, q, data::crop_box(f, opt.crop_scale), calib, opt.tile);
    }
  }
  return std::nullopt;
}

Association associate(const RgbImage& visual, const Gray16Image& thermal, const Synthesizer& g_y,
                      const CameraCalib& calib, const csgan::LandmarkDetector& detector,
                      const RegressorModel* regressor, const AssociateOptions& opt) {
  calib.validate();
  if (visual.width != calib.r_y.w || visual.height != calib.r_y.h) {
    throw DataError("associate: visual frame is " + std::to_string(visual.width) + "x" + std::to_string(visual.height) +
                    ", calibration expects " + std::to_string(calib.r_y.w) + "x" + std::to_string(calib.r_y.h));
  }
  if (thermal.width != calib.r_x.w || thermal.height != calib.r_x.h) {
    throw DataError("associate: thermal frame is " + std::to_string(thermal.width) + "x" +
                    std::to_string(thermal.height) + ", calibration expects " + std::to_string(calib.r_x.w) + "x" +
                    std::to_string(calib.r_x.h));
  }
  if (detector.tile != opt.tile) throw ConfigError("associate: detector tile size differs from the association tile");

  const auto faces = opt.detect_faces ? opt.detect_faces(visual) : data::detect_faces(visual);
  Association out;
  for (std::size_t i = 0; i < faces.size(); ++i) {
    const BBox crop = data::crop_box(faces[i], opt.crop_scale);
    auto skip = [&](std::string reason) { out.skipped.push_back({i, faces[i], std::move(reason)}); };

    const auto candidates = propose_candidates(crop, calib);
    if (candidates.empty()) {
      skip("no thermal candidate inside the frame");
      continue;
    }
    std::vector<std::pair<BBox, BBox>> boxes;
    std::vector<double> disparities;
    for (const auto& c : candidates) {
      try {
        boxes.push_back(expand_to_common_size(clip_to_frame(crop, calib.r_y.w, calib.r_y.h), c.box, calib.r_y, calib.r_x));
        disparities.push_back(c.disparity);
      } catch (const DataError&) {
      }
    }
    if (boxes.empty()) {
      skip("visual crop is degenerate");
      continue;
    }

    // The visual crop can only differ between candidates when clipping made the expansion asymmetric.
    const auto vis_det = csgan::detect(detector, data::rgb_tile(visual, boxes.front().first, opt.tile));
    if (!vis_det.found) {
      skip("no landmarks on the visual crop");
      continue;
    }

    std::vector<Tensor> tiles;
    for (const auto& b : boxes) tiles.push_back(data::thermal_tile(thermal, b.second, opt.tile));
    const Tensor synth = g_y(numcore::concat_batch(tiles));

    std::size_t best = boxes.size();
    double best_score = std::numeric_limits<double>::infinity();
    FeaturePoints pts_y, pts_yhat;
    for (std::size_t k = 0; k < boxes.size(); ++k) {
      const auto d = csgan::detect(detector, synth, k);
      if (!d.found) continue;
      const FeaturePoints vp = boxes[k].first == boxes.front().first
                                   ? vis_det.points()
                                   : csgan::detect(detector, data::rgb_tile(visual, boxes[k].first, opt.tile)).points();
      const double s = mean_residual(vp, d.points());
      if (s < best_score) {
        best_score = s;
        best = k;
        pts_y = vp;
        pts_yhat = d.points();
      }
    }
    if (best == boxes.size()) {
      skip("no landmarks on any synthesized candidate");
      continue;
    }

    AssociatedObject obj;
    obj.index = i;
    obj.face = faces[i];
    obj.b_y = boxes[best].first;
    obj.b_x = boxes[best].second;
    obj.disparity = disparities[best];
    obj.score = best_score;
    obj.pts_y = pts_y;
    obj.pts_yhat = pts_yhat;
    FeaturePoints vis_frame;
    for (std::size_t j = 0; j < pts_y.size(); ++j) {
      vis_frame.push_back(data::from_tile(pts_y[j], obj.b_y, opt.tile));
      obj.thermal_points.push_back(data::from_tile(pts_yhat[j], obj.b_x, opt.tile));
    }
    obj.z = frame_disparity_vector(vis_frame, obj.thermal_points, crop, calib, opt.tile);
    if (regressor) obj.pose = estimate_position(obj.z, *regressor);
    out.objects.push_back(std::move(obj));
  }
  return out;
}

}  // namespace csfuse::fusion
