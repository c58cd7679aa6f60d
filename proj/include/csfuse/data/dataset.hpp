#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "csfuse/csgan/model.hpp"
#include "csfuse/data/rig.hpp"

namespace csfuse::data {

namespace fs = std::filesystem;

struct DatasetSpec {
  std::size_t n = 100;
  std::uint64_t seed = 0;
  RigSpec rig;
};

struct ManifestRow {
  std::string id;
  fs::path visual_path;   // relative to the manifest's directory unless absolute
  fs::path thermal_path;
  std::optional<double> distance_ft;
  std::optional<double> offset_ft;
};

struct Manifest {
  fs::path root;  // directory the relative paths resolve against
  std::vector<ManifestRow> rows;

  fs::path resolve(const fs::path& p) const { return p.is_absolute() ? p : root / p; }
  bool has_pose_labels() const;
};

struct TruthRow {
  std::string id;
  double body_temp_c = 0.0;
  double canthus_temp_c = 0.0;
  bool fever = false;
};

/// Per-dataset metadata stored next to the manifest.
struct DatasetInfo {
  DatasetSpec spec;
};

/// Renders `spec.n` single-person scenes into `dir`:
///   manifest.csv, truth.csv, dataset.json, images/<id>_{visual.ppm,thermal.pgm},
///   landmarks/<id>_{visual,thermal}.lmk.csv
Manifest generate_dataset(const fs::path& dir, const DatasetSpec& spec);

/// Samples the people of a dataset without rendering (same draws as generate_dataset).
std::vector<Person> sample_people(const DatasetSpec& spec);

std::string manifest_csv(const Manifest& m);
/// Throws DataError on malformed rows or missing files.
Manifest read_manifest(const fs::path& csv_path);

std::string landmarks_csv(const FeaturePoints& pts);
FeaturePoints read_landmarks(const fs::path& path);
fs::path landmark_path(const Manifest& m, const std::string& id, const char* domain);

std::vector<TruthRow> read_truth(const fs::path& path);

std::string rig_json(const RigSpec& rig);
DatasetInfo read_dataset_info(const fs::path& dir);

struct LoadReport {
  std::size_t used = 0;
  std::vector<std::string> skipped;  // "<id>: reason"
};

/// Visual tiles cropped at the detected face; thermal tiles at the same crop shifted by the
/// mean landmark displacement when landmark files exist, else whole frames.
csgan::PairedTiles load_training_tiles(const Manifest& m, std::size_t tile, double crop_scale,
                                       LoadReport* report = nullptr);

/// Pairs files by stem across two directories; `pattern` is a glob ('*', '?') on file names.
/// Unmatched files abort with DataError unless `allow_partial`; `warnings` collects notes.
Manifest load_paired_directory(const fs::path& visual_dir, const fs::path& thermal_dir, const std::string& pattern,
                               bool allow_partial, std::vector<std::string>* warnings = nullptr);

bool glob_match(std::string_view pattern, std::string_view name);

}  // namespace csfuse::data
