#include "csfuse/fusion/calib.hpp"

#include <cmath>
#include <set>

#include "csfuse/core/error.hpp"
#include "json.hpp"

namespace csfuse::fusion {

using nlohmann::json;

void CameraCalib::validate() const {
  if (!(f_y > 0.0) || !(f_x > 0.0)) throw ConfigError("calibration: focal lengths must be positive");
  if (r_y.w <= 0 || r_y.h <= 0 || r_x.w <= 0 || r_x.h <= 0) throw ConfigError("calibration: resolutions must be positive");
  if (!(sweep_step_px > 0.0)) throw ConfigError("calibration: sweep step must be positive");
  if (!(sweep_range_px >= 0.0)) throw ConfigError("calibration: sweep range must be non-negative");
}

std::string calib_json(const CameraCalib& c) {
  const json j{{"f_y", c.f_y},
               {"f_x", c.f_x},
               {"r_y", {c.r_y.w, c.r_y.h}},
               {"r_x", {c.r_x.w, c.r_x.h}},
               {"baseline_ft", c.baseline_ft},
               {"b_hat_px", c.b_hat_px},
               {"sweep_range_px", c.sweep_range_px},
               {"sweep_step_px", c.sweep_step_px}};
  return j.dump(2) + "\n";
}

CameraCalib calib_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("calibration: ") + e.what());
  }
  static const std::set<std::string> keys{"f_y", "f_x", "r_y", "r_x", "baseline_ft", "b_hat_px", "sweep_range_px",
                                          "sweep_step_px"};
  if (!j.is_object()) throw ConfigError("calibration: expected a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!keys.count(k)) throw ConfigError("calibration: unknown key '" + k + "'");
  }
  for (const auto& k : keys) {
    if (!j.contains(k)) throw ConfigError("calibration: missing key '" + k + "'");
  }
  CameraCalib c;
  try {
    c.f_y = j.at("f_y").get<double>();
    c.f_x = j.at("f_x").get<double>();
    c.r_y = {j.at("r_y").at(0).get<int>(), j.at("r_y").at(1).get<int>()};
    c.r_x = {j.at("r_x").at(0).get<int>(), j.at("r_x").at(1).get<int>()};
    c.baseline_ft = j.at("baseline_ft").get<double>();
    c.b_hat_px = j.at("b_hat_px").get<double>();
    c.sweep_range_px = j.at("sweep_range_px").get<double>();
    c.sweep_step_px = j.at("sweep_step_px").get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("calibration: ") + e.what());
  }
  c.validate();
  return c;
}

std::optional<BBox> map_bbox(const BBox& b_y, const CameraCalib& calib, double disparity) {
  const double s = calib.f_x / calib.f_y;
  const BBox scaled{s * b_y.x + disparity, s * b_y.y, s * b_y.w, s * b_y.h};
  const BBox clipped = clip_to_frame(scaled, calib.r_x.w, calib.r_x.h);
  if (!clipped.valid()) return std::nullopt;
  return clipped;
}

std::vector<Candidate> propose_candidates(const BBox& b_y, const CameraCalib& calib) {
  calib.validate();
  const auto k = static_cast<long>(std::floor(calib.sweep_range_px / calib.sweep_step_px + 1e-9));
  std::vector<Candidate> out;
  for (long i = -k; i <= k; ++i) {
    const double disp = calib.b_hat_px + static_cast<double>(i) * calib.sweep_step_px;
    if (auto b = map_bbox(b_y, calib, disp)) out.push_back({disp, *b});
  }
  return out;
}

std::pair<BBox, BBox> expand_to_common_size(const BBox& b_y, const BBox& b_x, Resolution frame_y, Resolution frame_x) {
  if (!b_y.valid() || !b_x.valid()) throw DataError("expand_to_common_size: degenerate input box");
  const double w = std::max(b_y.w, b_x.w), h = std::max(b_y.h, b_x.h);
  auto grow = [&](const BBox& b, Resolution r) {
    const BBox g{b.cx() - 0.5 * w, b.cy() - 0.5 * h, w, h};
    const BBox c = clip_to_frame(g, r.w, r.h);
    if (!c.valid()) throw DataError("expand_to_common_size: box has zero area after clipping");
    return c;
  };
  return {grow(b_y, frame_y), grow(b_x, frame_x)};
}

}  // namespace csfuse::fusion
