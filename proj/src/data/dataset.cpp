#include "csfuse/data/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include "json.hpp"
#include <set>
#include <sstream>

#include "csfuse/core/error.hpp"
#include "csfuse/core/io.hpp"
#include "csfuse/data/tiles.hpp"

namespace csfuse::data {
namespace {

using nlohmann::json;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(where + ": not a number: '" + s + "'");
  }
}

json rig_to_json(const RigSpec& r) {
  return json{{"frame_w", r.frame_w},
              {"frame_h", r.frame_h},
              {"focal_px", r.focal_px},
              {"cx", r.cx},
              {"cy", r.cy},
              {"face_ft", r.face_ft},
              {"crop_scale", r.crop_scale},
              {"parallax_k", r.parallax_k},
              {"parallax_c0", r.parallax_c0},
              {"roll", r.roll},
              {"min_distance_ft", r.min_distance_ft},
              {"max_distance_ft", r.max_distance_ft},
              {"min_offset_ft", r.min_offset_ft},
              {"max_offset_ft", r.max_offset_ft},
              {"y_jitter_px", r.y_jitter_px},
              {"landmark_jitter", r.landmark_jitter},
              {"calib", {{"a", r.calib.a}, {"c", r.calib.c}}},
              {"ambient_c", r.ambient_c},
              {"kappa_c_per_ft", r.kappa_c_per_ft},
              {"skin_drop_c", r.skin_drop_c},
              {"thermal_mix", r.thermal_mix},
              {"thermal_blur_px", r.thermal_blur_px},
              {"canthus_spot_px", r.canthus_spot_px},
              {"fever_rate", r.fever_rate},
              {"healthy_mean_c", r.healthy_mean_c},
              {"healthy_sd_c", r.healthy_sd_c},
              {"fever_mean_c", r.fever_mean_c},
              {"fever_sd_c", r.fever_sd_c}};
}

RigSpec rig_from_json(const json& j) {
  RigSpec r;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("frame_w", r.frame_w);
  get("frame_h", r.frame_h);
  get("focal_px", r.focal_px);
  get("cx", r.cx);
  get("cy", r.cy);
  get("face_ft", r.face_ft);
  get("crop_scale", r.crop_scale);
  get("parallax_k", r.parallax_k);
  get("parallax_c0", r.parallax_c0);
  get("roll", r.roll);
  get("min_distance_ft", r.min_distance_ft);
  get("max_distance_ft", r.max_distance_ft);
  get("min_offset_ft", r.min_offset_ft);
  get("max_offset_ft", r.max_offset_ft);
  get("y_jitter_px", r.y_jitter_px);
  get("landmark_jitter", r.landmark_jitter);
  if (j.contains("calib")) {
    r.calib.a = j.at("calib").at("a").get<double>();
    r.calib.c = j.at("calib").at("c").get<double>();
  }
  get("ambient_c", r.ambient_c);
  get("kappa_c_per_ft", r.kappa_c_per_ft);
  get("skin_drop_c", r.skin_drop_c);
  get("thermal_mix", r.thermal_mix);
  get("thermal_blur_px", r.thermal_blur_px);
  get("canthus_spot_px", r.canthus_spot_px);
  get("fever_rate", r.fever_rate);
  get("healthy_mean_c", r.healthy_mean_c);
  get("healthy_sd_c", r.healthy_sd_c);
  get("fever_mean_c", r.fever_mean_c);
  get("fever_sd_c", r.fever_sd_c);
  return r;
}

std::string make_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%05zu", i);
  return buf;
}

}  // namespace

bool Manifest::has_pose_labels() const {
  return !rows.empty() && std::all_of(rows.begin(), rows.end(), [](const ManifestRow& r) {
    return r.distance_ft.has_value() && r.offset_ft.has_value();
  });
}

std::string rig_json(const RigSpec& rig) { return rig_to_json(rig).dump(2); }

std::vector<Person> sample_people(const DatasetSpec& spec) {
  Rng rng(spec.seed);
  std::vector<Person> people;
  people.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) people.push_back(sample_person(spec.rig, rng));
  return people;
}

Manifest generate_dataset(const fs::path& dir, const DatasetSpec& spec) {
  if (spec.n == 0) throw ConfigError("dataset size must be >= 1");
  Manifest m;
  m.root = dir;
  std::string truth = "id,body_temp_c,canthus_temp_c,fever\n";
  const std::vector<Person> people = sample_people(spec);
  for (std::size_t i = 0; i < people.size(); ++i) {
    const Person& p = people[i];
    const std::string id = make_id(i);
    ManifestRow row{id, fs::path("images") / (id + "_visual.ppm"), fs::path("images") / (id + "_thermal.pgm"),
                    p.distance_ft, p.offset_ft};
    write_ppm(dir / row.visual_path, render_visual({p}, spec.rig));
    write_pgm16(dir / row.thermal_path, render_thermal({p}, spec.rig));
    io::atomic_write(dir / "landmarks" / (id + "_visual.lmk.csv"), landmarks_csv(visual_landmarks(p, spec.rig)));
    io::atomic_write(dir / "landmarks" / (id + "_thermal.lmk.csv"), landmarks_csv(thermal_landmarks(p, spec.rig)));
    truth += id + "," + fmt(p.body_temp_c) + "," + fmt(canthus_temperature(p, spec.rig)) + "," +
             (p.fever ? "1" : "0") + "\n";
    m.rows.push_back(std::move(row));
  }
  io::atomic_write(dir / "manifest.csv", manifest_csv(m));
  io::atomic_write(dir / "truth.csv", truth);
  const json info{{"n", spec.n}, {"seed", spec.seed}, {"rig", rig_to_json(spec.rig)}};
  io::atomic_write(dir / "dataset.json", info.dump(2) + "\n");
  return m;
}

std::string manifest_csv(const Manifest& m) {
  std::string s = "id,visual_path,thermal_path,distance_ft,offset_ft\n";
  for (const auto& r : m.rows) {
    s += r.id + "," + r.visual_path.generic_string() + "," + r.thermal_path.generic_string() + "," +
         (r.distance_ft ? fmt(*r.distance_ft) : "") + "," + (r.offset_ft ? fmt(*r.offset_ft) : "") + "\n";
  }
  return s;
}

Manifest read_manifest(const fs::path& csv_path) {
  const auto lines = lines_of(io::read_file(csv_path));
  if (lines.empty() || lines[0] != "id,visual_path,thermal_path,distance_ft,offset_ft") {
    throw DataError(csv_path.string() + ": missing or unexpected manifest header");
  }
  Manifest m;
  m.root = csv_path.parent_path();
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string where = csv_path.string() + ":" + std::to_string(i + 1);
    const auto f = split(lines[i]);
    if (f.size() != 5) throw DataError(where + ": expected 5 columns, got " + std::to_string(f.size()));
    ManifestRow r{f[0], f[1], f[2], std::nullopt, std::nullopt};
    if (!f[3].empty()) r.distance_ft = parse_double(f[3], where);
    if (!f[4].empty()) r.offset_ft = parse_double(f[4], where);
    for (const fs::path& p : {r.visual_path, r.thermal_path}) {
      if (!fs::exists(m.resolve(p))) throw DataError(where + ": missing file " + m.resolve(p).string());
    }
    m.rows.push_back(std::move(r));
  }
  return m;
}

std::string landmarks_csv(const FeaturePoints& pts) {
  std::string s = "index,x,y\n";
  for (std::size_t j = 0; j < pts.size(); ++j) s += std::to_string(j) + "," + fmt(pts[j].x) + "," + fmt(pts[j].y) + "\n";
  return s;
}

FeaturePoints read_landmarks(const fs::path& path) {
  const auto lines = lines_of(io::read_file(path));
  if (lines.empty() || lines[0] != "index,x,y") throw DataError(path.string() + ": missing landmark header");
  FeaturePoints pts;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string where = path.string() + ":" + std::to_string(i + 1);
    const auto f = split(lines[i]);
    if (f.size() != 3) throw DataError(where + ": expected index,x,y");
    if (parse_double(f[0], where) != static_cast<double>(pts.size())) throw DataError(where + ": landmark index out of order");
    pts.push_back({parse_double(f[1], where), parse_double(f[2], where)});
  }
  return pts;
}

fs::path landmark_path(const Manifest& m, const std::string& id, const char* domain) {
  return m.root / "landmarks" / (id + "_" + domain + ".lmk.csv");
}

std::vector<TruthRow> read_truth(const fs::path& path) {
  const auto lines = lines_of(io::read_file(path));
  if (lines.empty() || lines[0] != "id,body_temp_c,canthus_temp_c,fever") throw DataError(path.string() + ": bad truth header");
  std::vector<TruthRow> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string where = path.string() + ":" + std::to_string(i + 1);
    const auto f = split(lines[i]);
    if (f.size() != 4) throw DataError(where + ": expected 4 columns");
    out.push_back({f[0], parse_double(f[1], where), parse_double(f[2], where), f[3] == "1"});
  }
  return out;
}

DatasetInfo read_dataset_info(const fs::path& dir) {
  json j;
  try {
    j = json::parse(io::read_file(dir / "dataset.json"));
  } catch (const json::exception& e) {
    throw DataError((dir / "dataset.json").string() + ": " + e.what());
  }
  DatasetInfo info;
  info.spec.n = j.value("n", std::size_t{0});
  info.spec.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("rig")) info.spec.rig = rig_from_json(j.at("rig"));
  return info;
}

csgan::PairedTiles load_training_tiles(const Manifest& m, std::size_t tile, double crop_scale, LoadReport* report) {
  std::vector<Tensor> vis, th;
  LoadReport rep;
  for (const auto& r : m.rows) {
    const RgbImage v = read_ppm(m.resolve(r.visual_path));
    const Gray16Image t = read_pgm(m.resolve(r.thermal_path));
    const fs::path lv = landmark_path(m, r.id, "visual"), lt = landmark_path(m, r.id, "thermal");
    if (fs::exists(lv) && fs::exists(lt)) {
      const auto boxes = detect_faces(v);
      if (boxes.empty()) {
        rep.skipped.push_back(r.id + ": no face found in visual frame");
        continue;
      }
      const BBox face = *std::max_element(boxes.begin(), boxes.end(),
                                          [](const BBox& a, const BBox& b) { return a.area() < b.area(); });
      const FeaturePoints pv = read_landmarks(lv), pt = read_landmarks(lt);
      if (pv.size() != pt.size() || pv.empty()) {
        rep.skipped.push_back(r.id + ": landmark counts differ across domains");
        continue;
      }
      Point2 shift;
      for (std::size_t j = 0; j < pv.size(); ++j) shift = shift + (1.0 / static_cast<double>(pv.size())) * (pt[j] - pv[j]);
      const BBox crop = crop_box(face, crop_scale);
      vis.push_back(rgb_tile(v, crop, tile));
      th.push_back(thermal_tile(t, BBox{crop.x + shift.x, crop.y + shift.y, crop.w, crop.h}, tile));
    } else {
      vis.push_back(rgb_tile(v, BBox{0, 0, static_cast<double>(v.width), static_cast<double>(v.height)}, tile));
      th.push_back(thermal_tile(t, BBox{0, 0, static_cast<double>(t.width), static_cast<double>(t.height)}, tile));
    }
    ++rep.used;
  }
  if (report) *report = rep;
  if (vis.empty()) throw DataError("no usable training pairs in manifest");
  return {csgan::replicate_channels(numcore::concat_batch(th)), numcore::concat_batch(vis)};
}

bool glob_match(std::string_view pat, std::string_view s) {
  std::size_t p = 0, i = 0, star = std::string_view::npos, mark = 0;
  while (i < s.size()) {
    if (p < pat.size() && (pat[p] == '?' || pat[p] == s[i])) {
      ++p;
      ++i;
    } else if (p < pat.size() && pat[p] == '*') {
      star = p++;
      mark = i;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      i = ++mark;
    } else {
      return false;
    }
  }
  while (p < pat.size() && pat[p] == '*') ++p;
  return p == pat.size();
}

Manifest load_paired_directory(const fs::path& visual_dir, const fs::path& thermal_dir, const std::string& pattern,
                               bool allow_partial, std::vector<std::string>* warnings) {
  auto scan = [&](const fs::path& dir) {
    if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
    std::map<std::string, fs::path> byStem;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (!e.is_regular_file() || !glob_match(pattern, e.path().filename().string())) continue;
      byStem[e.path().stem().string()] = fs::absolute(e.path());
    }
    return byStem;
  };
  const auto vis = scan(visual_dir), th = scan(thermal_dir);
  std::vector<std::string> orphans;
  Manifest m;
  m.root = fs::current_path();
  for (const auto& [stem, path] : vis) {
    const auto it = th.find(stem);
    if (it == th.end()) {
      orphans.push_back(path.string());
      continue;
    }
    m.rows.push_back({stem, path, it->second, std::nullopt, std::nullopt});
  }
  for (const auto& [stem, path] : th)
    if (!vis.count(stem)) orphans.push_back(path.string());
  std::vector<std::string> notes;
  if (vis.empty() && th.empty()) notes.push_back("no files matching '" + pattern + "' in either directory");
  if (!orphans.empty()) {
    std::string list;
    for (const auto& o : orphans) list += "\n  " + o;
    if (!allow_partial) throw DataError("unmatched files (use --allow-partial to skip):" + list);
    notes.push_back(std::to_string(orphans.size()) + " unmatched file(s) skipped:" + list);
  }
  // Frames of differing sizes are fine: every crop is resampled to the tile size.
  std::set<std::pair<int, int>> sizes;
  for (const auto& r : m.rows) {
    const RgbImage v = read_ppm(r.visual_path);
    sizes.insert({v.width, v.height});
  }
  if (sizes.size() > 1) notes.push_back("visual frames have " + std::to_string(sizes.size()) + " different sizes; all are resampled to the tile size");
  if (warnings) warnings->insert(warnings->end(), notes.begin(), notes.end());
  return m;
}

}  // namespace csfuse::data
