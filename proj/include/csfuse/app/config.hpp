#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "csfuse/csgan/model.hpp"
#include "csfuse/data/dataset.hpp"
#include "csfuse/fusion/calib.hpp"
#include "csfuse/mecsim/mecsim.hpp"
#include "csfuse/screening/screening.hpp"

namespace csfuse::app {

namespace fs = std::filesystem;

/// Everything a command needs; see README "Configuration" for the JSON schema.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string scale = "test";
  csgan::ModelSpec model = csgan::test_scale();
  csgan::TrainConfig train;
  csgan::LossWeights weights;
  double t_feat = 0.5;

  std::size_t n = 120;                     // gen-data scene count
  std::optional<fs::path> data_dir;        // gen-data output; default <out>/data
  std::optional<fs::path> visual_dir;      // generic paired directories instead of data_dir
  std::optional<fs::path> thermal_dir;
  std::string pattern = "*";

  fusion::CameraCalib calib;
  std::optional<screening::CompensationModel> compensation;  // else <out>/compensation.json
  double threshold_c = screening::kDefaultFeverThresholdC;
  int canthus_radius = 0;

  std::optional<fs::path> weights_path;    // default <out>/weights.csgw
  std::optional<fs::path> regressor_path;  // default <out>/regressor.json

  mecsim::Scenario scenario;
};

/// Strict parse: unknown keys, wrong types and invalid values are ConfigErrors.
/// `scale_override` ("", "test" or "paper") wins over the file's "scale".
ExperimentConfig parse_config(const std::string& json_text, const std::string& scale_override = "");

/// Canonical JSON of the resolved config (stable key order), hashed into run logs.
std::string config_json(const ExperimentConfig& cfg);

}  // namespace csfuse::app
