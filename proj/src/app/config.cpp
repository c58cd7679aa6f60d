#include "csfuse/app/config.hpp"

#include <algorithm>
#include <initializer_list>

#include "csfuse/core/error.hpp"
#include "json.hpp"

namespace csfuse::app {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void allow(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; })) {
      throw ConfigError(where + ": unknown key '" + it.key() + "'");
    }
  }
}

template <typename T>
void get(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void get_path(const json& j, const char* key, std::optional<fs::path>& out) {
  // null means unset, so config_json output parses back
  if (j.contains(key) && !j.at(key).is_null()) out = fs::path(j.at(key).get<std::string>());
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& scale_override) {
  ExperimentConfig c;
  try {
    const json j = text.empty() ? json::object() : json::parse(text);
    allow(j, {"seed", "scale", "model", "train", "data", "calib", "compensation", "screening", "paths", "scenario"},
          "config");
    get(j, "seed", c.seed);
    get(j, "scale", c.scale);
    if (!scale_override.empty()) c.scale = scale_override;
    if (c.scale == "test") c.model = csgan::test_scale();
    else if (c.scale == "paper") c.model = csgan::paper_scale();
    else throw ConfigError("config: scale must be 'test' or 'paper', got '" + c.scale + "'");

    if (j.contains("model")) {
      const auto& m = j.at("model");
      allow(m, {"base", "n_blocks", "tile", "disc_base", "disc_down", "phi_width"}, "model");
      get(m, "base", c.model.gen.base);
      get(m, "n_blocks", c.model.gen.n_blocks);
      get(m, "tile", c.model.gen.tile);
      get(m, "disc_base", c.model.disc.base);
      get(m, "disc_down", c.model.disc.n_down);
      get(m, "phi_width", c.model.phi_width);
      c.model.disc.tile = c.model.gen.tile;
    }
    if (c.model.gen.tile < 8 || c.model.gen.base == 0 || c.model.disc.base == 0 || c.model.phi_width == 0) {
      throw ConfigError("model: tile must be >= 8 and widths positive");
    }

    if (j.contains("train")) {
      const auto& t = j.at("train");
      allow(t, {"batch", "iterations", "lr", "beta1", "beta2", "eps", "lambda_cyc", "lambda_per", "lambda_feat", "t_feat",
                "decay_factor", "decay_patience", "decay_floor_ratio", "decay_interval"},
            "train");
      get(t, "batch", c.train.batch);
      get(t, "iterations", c.train.iterations);
      get(t, "lr", c.train.adam.lr);
      get(t, "beta1", c.train.adam.beta1);
      get(t, "beta2", c.train.adam.beta2);
      get(t, "eps", c.train.adam.eps);
      get(t, "lambda_cyc", c.weights.cyc);
      get(t, "lambda_per", c.weights.per);
      get(t, "lambda_feat", c.weights.feat);
      get(t, "t_feat", c.t_feat);
      get(t, "decay_factor", c.train.decay.factor);
      get(t, "decay_patience", c.train.decay.patience);
      get(t, "decay_floor_ratio", c.train.decay.floor_ratio);
      get(t, "decay_interval", c.train.decay.interval);
    }
    if (c.train.batch < 1) throw ConfigError("train: batch must be >= 1");
    if (!(c.train.adam.lr > 0.0)) throw ConfigError("train: lr must be > 0");
    if (!(c.train.decay.factor > 0.0 && c.train.decay.factor < 1.0)) throw ConfigError("train: decay_factor must lie in (0, 1)");
    if (!(c.weights.cyc > 0.0 && c.weights.per > 0.0 && c.weights.feat > 0.0)) {
      throw ConfigError("train: lambda values must be > 0");
    }
    if (!(c.t_feat > 0.0 && c.t_feat <= 1.0)) throw ConfigError("train: t_feat must lie in (0, 1]");

    if (j.contains("data")) {
      const auto& d = j.at("data");
      allow(d, {"n", "dir", "visual_dir", "thermal_dir", "pattern"}, "data");
      get(d, "n", c.n);
      get_path(d, "dir", c.data_dir);
      get_path(d, "visual_dir", c.visual_dir);
      get_path(d, "thermal_dir", c.thermal_dir);
      get(d, "pattern", c.pattern);
      if (c.visual_dir.has_value() != c.thermal_dir.has_value()) {
        throw ConfigError("data: visual_dir and thermal_dir go together");
      }
    }
    if (c.n < 1) throw ConfigError("data: n must be >= 1");

    if (j.contains("calib")) c.calib = fusion::calib_from_json(j.at("calib").dump());

    if (j.contains("compensation") && !j.at("compensation").is_null()) {
      const auto& k = j.at("compensation");
      allow(k, {"kappa", "min_distance_ft", "max_distance_ft"}, "compensation");
      screening::CompensationModel m;
      get(k, "kappa", m.kappa);
      get(k, "min_distance_ft", m.min_distance_ft);
      get(k, "max_distance_ft", m.max_distance_ft);
      m.validate();
      c.compensation = m;
    }
    if (j.contains("screening")) {
      const auto& s = j.at("screening");
      allow(s, {"threshold_c", "canthus_radius"}, "screening");
      get(s, "threshold_c", c.threshold_c);
      get(s, "canthus_radius", c.canthus_radius);
      if (!std::isfinite(c.threshold_c)) throw ConfigError("screening: threshold_c must be finite");
      if (c.canthus_radius < 0) throw ConfigError("screening: canthus_radius must be >= 0");
    }
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      allow(p, {"weights", "regressor"}, "paths");
      get_path(p, "weights", c.weights_path);
      get_path(p, "regressor", c.regressor_path);
    }
    if (j.contains("scenario")) c.scenario = mecsim::scenario_from_json(j.at("scenario").dump());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

std::string config_json(const ExperimentConfig& c) {
  auto opt_path = [](const std::optional<fs::path>& p) { return p ? ordered_json(p->generic_string()) : ordered_json(); };
  ordered_json j;
  j["seed"] = c.seed;
  j["scale"] = c.scale;
  j["model"] = {{"base", c.model.gen.base},        {"n_blocks", c.model.gen.n_blocks}, {"tile", c.model.gen.tile},
                {"disc_base", c.model.disc.base},  {"disc_down", c.model.disc.n_down},  {"phi_width", c.model.phi_width}};
  j["train"] = {{"batch", c.train.batch},
                {"iterations", c.train.iterations},
                {"lr", c.train.adam.lr},
                {"beta1", c.train.adam.beta1},
                {"beta2", c.train.adam.beta2},
                {"eps", c.train.adam.eps},
                {"lambda_cyc", c.weights.cyc},
                {"lambda_per", c.weights.per},
                {"lambda_feat", c.weights.feat},
                {"t_feat", c.t_feat},
                {"decay_factor", c.train.decay.factor},
                {"decay_patience", c.train.decay.patience},
                {"decay_floor_ratio", c.train.decay.floor_ratio},
                {"decay_interval", c.train.decay.interval}};
  j["data"] = {{"n", c.n},
               {"dir", opt_path(c.data_dir)},
               {"visual_dir", opt_path(c.visual_dir)},
               {"thermal_dir", opt_path(c.thermal_dir)},
               {"pattern", c.pattern}};
  j["calib"] = ordered_json::parse(fusion::calib_json(c.calib));
  j["compensation"] = c.compensation ? ordered_json{{"kappa", c.compensation->kappa},
                                                    {"min_distance_ft", c.compensation->min_distance_ft},
                                                    {"max_distance_ft", c.compensation->max_distance_ft}}
                                     : ordered_json();
  j["screening"] = {{"threshold_c", c.threshold_c}, {"canthus_radius", c.canthus_radius}};
  j["paths"] = {{"weights", opt_path(c.weights_path)}, {"regressor", opt_path(c.regressor_path)}};
  j["scenario"] = ordered_json::parse(mecsim::scenario_json(c.scenario));
  return j.dump(2) + "\n";
}

}  // namespace csfuse::app
