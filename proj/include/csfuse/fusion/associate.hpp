#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "csfuse/core/image.hpp"
#include "csfuse/csgan/landmarks.hpp"
#include "csfuse/csgan/model.hpp"
#include "csfuse/fusion/calib.hpp"
#include "csfuse/fusion/regressor.hpp"

namespace csfuse::fusion {

using numcore::Tensor;

/// (n, 1, T, T) thermal tiles -> (n, 3, T, T) visual-domain tiles.
using Synthesizer = std::function<Tensor(const Tensor&)>;
using FaceDetector = std::function<std::vector<BBox>(const RgbImage&)>;

/// G_Y of a trained model.
Synthesizer csgan_synthesizer(const csgan::CsganModel& model);
/// Replicates the thermal channel; correct when the thermal frame is a gray copy of the visual one.
Synthesizer identity_synthesizer();

struct AssociateOptions {
  std::size_t tile = 64;
  double crop_scale = 1.2;  // face box -> tile crop
  FaceDetector detect_faces;  // empty = skin-blob default
};

struct AssociatedObject {
  std::size_t index = 0;  // detection order
  BBox face;              // detector output
  BBox b_y;               // visual crop after common-size expansion
  BBox b_x;               // chosen thermal crop after common-size expansion
  double disparity = 0.0;
  double score = 0.0;     // mean landmark residual, tile px
  FeaturePoints pts_y;    // tile coordinates of the visual crop
  FeaturePoints pts_yhat; // tile coordinates of the synthesized crop
  FeaturePoints thermal_points;  // thermal frame coordinates
  std::vector<double> z;
  std::optional<PoseEstimate> pose;  // set when a regressor is supplied
};

struct SkippedObject {
  std::size_t index = 0;
  BBox face;
  std::string reason;
};

struct Association {
  std::vector<AssociatedObject> objects;
  std::vector<SkippedObject> skipped;
};

/// Disparity vector of frame-coordinate landmarks, measured in tile units of `crop_y` with the
/// thermal points pulled back through the zero-disparity mapping (scale f_Y/f_X).
std::vector<double> frame_disparity_vector(const FeaturePoints& visual_frame, const FeaturePoints& thermal_frame,
                                           const BBox& crop_y, const CameraCalib& calib, std::size_t tile);

/// z for a labelled pair: the face box containing the visual landmarks' centroid supplies the crop.
/// nullopt when no detected face contains it.
std::optional<std::vector<double>> labelled_disparity_vector(const RgbImage& visual, const FeaturePoints& visual_frame,
                                                             const FeaturePoints& thermal_frame,
                                                             const CameraCalib& calib, const AssociateOptions& options);

Association associate(const RgbImage& visual, const Gray16Image& thermal, const Synthesizer& g_y,
                      const CameraCalib& calib, const csgan::LandmarkDetector& detector,
                      const RegressorModel* regressor, const AssociateOptions& options);

}  // namespace csfuse::fusion
