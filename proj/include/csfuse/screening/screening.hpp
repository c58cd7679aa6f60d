#pragma once

#include <optional>
#include <string>
#include <vector>

#include "csfuse/core/image.hpp"
#include "csfuse/data/rig.hpp"
#include "csfuse/fusion/associate.hpp"

namespace csfuse::screening {

/// Raw counts plus the linear counts -> °C map.
struct ThermalFrame {
  Gray16Image raster;
  data::ThermalCalib calib;

  double celsius(int x, int y) const { return calib.to_celsius(raster.at(x, y)); }
};

constexpr double kSanityMinC = 0.0;
constexpr double kSanityMaxC = 60.0;
inline bool in_sanity_band(double t) { return t >= kSanityMinC && t <= kSanityMaxC; }

/// Max over a (2r+1)^2 window at each canthus (centered on the pixel containing the point),
/// then the max of the two. Throws DataError naming the point when a window leaves the frame.
double read_canthus_temperature(const ThermalFrame& frame, const FeaturePoints& thermal_landmarks, int radius = 1);

struct CompensationModel {
  double kappa = 0.1;  // °C per foot
  double min_distance_ft = 0.0;
  double max_distance_ft = 20.0;

  void validate() const;
};

struct Compensated {
  double t_comp = 0.0;
  bool extrapolated = false;
};

/// T_meas + κ·d; throws DataError for negative or non-finite d.
Compensated compensate_temperature(double t_meas, double distance_ft, const CompensationModel& model);

/// Least-squares κ through the origin for (body - measured) = κ·d; valid range = observed span.
CompensationModel fit_compensation(const std::vector<double>& distance_ft, const std::vector<double>& measured_c,
                                   const std::vector<double>& body_c);

constexpr double kDefaultFeverThresholdC = 38.0;
inline bool classify_fever(double t_comp, double threshold = kDefaultFeverThresholdC) { return t_comp >= threshold; }

struct ConfusionCounts {
  long tp = 0, fp = 0, tn = 0, fn = 0;

  long total() const { return tp + fp + tn + fn; }
  void add(bool predicted, bool truth);
};

/// (TP + TN) / total; throws DataError on an empty matrix.
double accuracy(const ConfusionCounts& c);
/// Percentage truncated (not rounded) to one decimal: 116/142 -> "81.6".
std::string percent_truncated(double fraction);

struct EvalRow {
  std::string id;
  bool predicted = false;
  bool truth = false;
};
/// CSV with header record_id,predicted,truth; flags are 0/1 or true/false.
std::vector<EvalRow> parse_eval_csv(const std::string& text);
ConfusionCounts confusion(const std::vector<EvalRow>& rows);

struct PersonRecord {
  std::string id;
  BBox b_y;
  BBox b_x;
  Point2 canthus;  // thermal frame, the hotter of the two
  double t_meas = 0.0;
  double distance_ft = 0.0;
  double offset_ft = 0.0;
  double t_comp = 0.0;
  bool fever = false;
  bool pose_extrapolated = false;
  bool compensation_extrapolated = false;
  bool sane = true;  // t_meas inside the sanity band
};

std::string record_json(const PersonRecord& r);
PersonRecord record_from_json(const std::string& line);

struct ScreeningBundle {
  fusion::CameraCalib calib;
  csgan::LandmarkDetector detector;
  fusion::Synthesizer synthesizer;
  fusion::RegressorModel regressor;
  CompensationModel compensation;
  data::ThermalCalib thermal_calib;
  double threshold_c = kDefaultFeverThresholdC;
  int canthus_radius = 0;  // 0: one tile pixel's worth of frame pixels, at least 1
  fusion::AssociateOptions associate;
};

struct ScreenResult {
  std::vector<PersonRecord> records;
  std::vector<fusion::SkippedObject> skipped;
};

ScreenResult screen_frame_pair(const RgbImage& visual, const Gray16Image& thermal, const ScreeningBundle& bundle,
                               const std::string& frame_id);

}  // namespace csfuse::screening
