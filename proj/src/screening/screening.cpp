#include "csfuse/screening/screening.hpp"

#include <cmath>
#include <sstream>

#include "csfuse/core/error.hpp"
#include "json.hpp"

namespace csfuse::screening {

double read_canthus_temperature(const ThermalFrame& frame, const FeaturePoints& pts, int radius) {
  if (pts.size() <= csgan::kRightCanthus) throw DataError("read_canthus_temperature: canthus landmarks missing");
  if (radius < 0) throw ConfigError("read_canthus_temperature: negative radius");
  const auto& img = frame.raster;
  double best = -INFINITY;
  for (std::size_t j : {std::size_t{csgan::kLeftCanthus}, std::size_t{csgan::kRightCanthus}}) {
    const Point2 p = pts[j];
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw DataError("read_canthus_temperature: non-finite landmark");
    const int px = static_cast<int>(std::floor(p.x)), py = static_cast<int>(std::floor(p.y));
    if (px - radius < 0 || py - radius < 0 || px + radius >= img.width || py + radius >= img.height) {
      std::ostringstream msg;
      msg << "read_canthus_temperature: window of radius " << radius << " at (" << p.x << ", " << p.y
          << ") leaves the " << img.width << "x" << img.height << " frame";
      throw DataError(msg.str());
    }
    for (int y = py - radius; y <= py + radius; ++y)
      for (int x = px - radius; x <= px + radius; ++x) best = std::max(best, frame.celsius(x, y));
  }
  return best;
}

void CompensationModel::validate() const {
  if (!std::isfinite(kappa)) throw ConfigError("compensation: kappa must be finite");
  if (!(min_distance_ft >= 0.0) || !(max_distance_ft > min_distance_ft)) {
    throw ConfigError("compensation: valid distance range must be non-empty and non-negative");
  }
}

Compensated compensate_temperature(double t_meas, double d, const CompensationModel& m) {
  if (!std::isfinite(d) || d < 0.0) throw DataError("compensate_temperature: distance must be >= 0, got " + std::to_string(d));
  return {t_meas + m.kappa * d, d < m.min_distance_ft || d > m.max_distance_ft};
}

CompensationModel fit_compensation(const std::vector<double>& d, const std::vector<double>& meas,
                                   const std::vector<double>& body) {
  if (d.empty() || d.size() != meas.size() || d.size() != body.size()) {
    throw DataError("fit_compensation: inputs must be non-empty and equally long");
  }
  double sdd = 0.0, sdy = 0.0;
  CompensationModel m{0.0, INFINITY, -INFINITY};
  for (std::size_t i = 0; i < d.size(); ++i) {
    sdd += d[i] * d[i];
    sdy += d[i] * (body[i] - meas[i]);
    m.min_distance_ft = std::min(m.min_distance_ft, d[i]);
    m.max_distance_ft = std::max(m.max_distance_ft, d[i]);
  }
  if (!(sdd > 0.0)) throw NumericError("fit_compensation: all distances are zero");
  m.kappa = sdy / sdd;
  m.validate();
  return m;
}

void ConfusionCounts::add(bool predicted, bool truth) {
  if (predicted && truth) ++tp;
  else if (predicted) ++fp;
  else if (truth) ++fn;
  else ++tn;
}

double accuracy(const ConfusionCounts& c) {
  if (c.tp < 0 || c.fp < 0 || c.tn < 0 || c.fn < 0) throw DataError("accuracy: negative count");
  if (c.total() == 0) throw DataError("accuracy: confusion matrix is empty");
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

std::string percent_truncated(double fraction) {
  // Small epsilon so exact tenths (e.g. 0.5 -> 50.0) survive binary rounding.
  const long tenths = static_cast<long>(std::floor(fraction * 1000.0 + 1e-9));
  return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10);
}

namespace {

bool parse_flag(const std::string& s, std::size_t line) {
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  throw DataError("eval csv line " + std::to_string(line) + ": bad flag '" + s + "'");
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && s[i] == ' ') ++i;
  return s.substr(i);
}

nlohmann::json box_json(const BBox& b) { return {b.x, b.y, b.w, b.h}; }
BBox box_from(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()};
}

}  // namespace

std::vector<EvalRow> parse_eval_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "record_id,predicted,truth") {
    throw DataError("eval csv: expected header record_id,predicted,truth");
  }
  std::vector<EvalRow> rows;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(trim(cell));
    if (f.size() != 3) throw DataError("eval csv line " + std::to_string(n) + ": expected 3 fields");
    rows.push_back({f[0], parse_flag(f[1], n), parse_flag(f[2], n)});
  }
  return rows;
}

ConfusionCounts confusion(const std::vector<EvalRow>& rows) {
  ConfusionCounts c;
  for (const auto& r : rows) c.add(r.predicted, r.truth);
  return c;
}

std::string record_json(const PersonRecord& r) {
  const nlohmann::ordered_json j{{"id", r.id},
                                 {"b_y", box_json(r.b_y)},
                                 {"b_x", box_json(r.b_x)},
                                 {"canthus", {r.canthus.x, r.canthus.y}},
                                 {"t_meas_c", r.t_meas},
                                 {"d_ft", r.distance_ft},
                                 {"o_ft", r.offset_ft},
                                 {"t_comp_c", r.t_comp},
                                 {"fever", r.fever},
                                 {"pose_extrapolated", r.pose_extrapolated},
                                 {"compensation_extrapolated", r.compensation_extrapolated},
                                 {"sane", r.sane}};
  return j.dump();
}

PersonRecord record_from_json(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    PersonRecord r;
    r.id = j.at("id").get<std::string>();
    r.b_y = box_from(j.at("b_y"));
    r.b_x = box_from(j.at("b_x"));
    r.canthus = {j.at("canthus").at(0).get<double>(), j.at("canthus").at(1).get<double>()};
    r.t_meas = j.at("t_meas_c").get<double>();
    r.distance_ft = j.at("d_ft").get<double>();
    r.offset_ft = j.at("o_ft").get<double>();
    r.t_comp = j.at("t_comp_c").get<double>();
    r.fever = j.at("fever").get<bool>();
    r.pose_extrapolated = j.at("pose_extrapolated").get<bool>();
    r.compensation_extrapolated = j.at("compensation_extrapolated").get<bool>();
    r.sane = j.at("sane").get<bool>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("screening record: ") + e.what());
  }
}

ScreenResult screen_frame_pair(const RgbImage& visual, const Gray16Image& thermal, const ScreeningBundle& b,
                               const std::string& frame_id) {
  b.compensation.validate();
  if (!b.synthesizer) throw ConfigError("screen_frame_pair: no synthesizer");
  const auto assoc = fusion::associate(visual, thermal, b.synthesizer, b.calib, b.detector, &b.regressor, b.associate);
  ScreenResult out;
  out.skipped = assoc.skipped;
  const ThermalFrame frame{thermal, b.thermal_calib};
  for (const auto& o : assoc.objects) {
    const int r = b.canthus_radius > 0
                      ? b.canthus_radius
                      : std::max(1, static_cast<int>(std::lround(o.b_x.w / static_cast<double>(b.associate.tile))));
    PersonRecord rec;
    rec.id = frame_id + ":" + std::to_string(o.index);
    rec.b_y = o.b_y;
    rec.b_x = o.b_x;
    rec.distance_ft = o.pose->distance_ft;
    rec.offset_ft = o.pose->offset_ft;
    rec.pose_extrapolated = o.pose->extrapolated;
    try {
      rec.t_meas = read_canthus_temperature(frame, o.thermal_points, r);
    } catch (const DataError& e) {
      out.skipped.push_back({o.index, o.face, e.what()});
      continue;
    }
    if (rec.distance_ft < 0.0) {
      out.skipped.push_back({o.index, o.face, "estimated distance is negative"});
      continue;
    }
    const double tl = frame.celsius(static_cast<int>(o.thermal_points[csgan::kLeftCanthus].x),
                                    static_cast<int>(o.thermal_points[csgan::kLeftCanthus].y));
    const double tr = frame.celsius(static_cast<int>(o.thermal_points[csgan::kRightCanthus].x),
                                    static_cast<int>(o.thermal_points[csgan::kRightCanthus].y));
    rec.canthus = o.thermal_points[tl >= tr ? csgan::kLeftCanthus : csgan::kRightCanthus];
    const auto c = compensate_temperature(rec.t_meas, rec.distance_ft, b.compensation);
    rec.t_comp = c.t_comp;
    rec.compensation_extrapolated = c.extrapolated;
    rec.fever = classify_fever(rec.t_comp, b.threshold_c);
    rec.sane = in_sanity_band(rec.t_meas);
    out.records.push_back(std::move(rec));
  }
  return out;
}

}  // namespace csfuse::screening
