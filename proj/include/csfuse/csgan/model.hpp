#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "csfuse/csgan/landmarks.hpp"
#include "csfuse/csgan/losses.hpp"
#include "csfuse/csgan/network.hpp"
#include "csfuse/numcore/adam.hpp"
#include "csfuse/numcore/weights_io.hpp"

namespace csfuse::csgan {

struct ModelSpec {
  GeneratorSpec gen;
  DiscriminatorSpec disc;
  std::size_t phi_width = 8;
};

/// 64x64 tiles, 64/128/256 channels, 6 blocks.
ModelSpec paper_scale();
/// 16x16 tiles, 8/16/32 channels, 2 blocks.
ModelSpec test_scale();

struct CsganModel {
  ModelSpec spec;
  Network g_y;  // thermal -> visual
  Network g_x;  // visual -> thermal
  Network d_y;
  Network d_x;
  Network phi;  // fixed
  LossWeights weights;
  double t_feat = 0.5;
  LandmarkDetector detector;
};

/// Seeded initialization; throws ConfigError for non-positive λ or t_feat outside (0, 1].
CsganModel make_model(const ModelSpec& spec, LandmarkDetector detector, std::uint64_t seed, LossWeights weights = {},
                      double t_feat = 0.5);

/// Thermal tiles arrive with one channel; the generators take three.
Tensor replicate_channels(const Tensor& single, std::size_t channels = 3);

Tensor synthesize_visual(const CsganModel& model, const Tensor& thermal_tiles);

struct LrDecay {
  double factor = 0.5;
  std::size_t patience = 10;
  double floor_ratio = 0.01;  // floor = initial lr * floor_ratio
  std::size_t interval = 10;  // iterations per running-mean evaluation
};

struct TrainConfig {
  std::size_t batch = 4;
  std::size_t iterations = 500;
  numcore::AdamConfig adam;
  std::uint64_t seed = 0;
  LrDecay decay;
};

struct LossReport {
  std::size_t iteration = 0;
  double l_adv_d = 0.0;
  double l_adv_g = 0.0;
  double l_cyc = 0.0;
  double l_per = 0.0;
  double l_feat = 0.0;
  double m_ratio = 0.0;
  double lr = 0.0;
};

/// Paired tiles, thermal already replicated to the generator's channel count; values in [-1, 1].
struct PairedTiles {
  Tensor thermal;
  Tensor visual;

  std::size_t size() const { return thermal.shape().n; }
};

PairedTiles gather(const PairedTiles& data, std::span<const std::size_t> indices);

struct GeneratorObjective {
  double total = 0.0;
  double l_adv = 0.0;
  double l_cyc = 0.0;
  double l_per = 0.0;
  double l_feat = 0.0;
  FeatureLossResult feat;
  Network grad_g_y;  // filled when gradients are requested
  Network grad_g_x;
};

/// Weighted generator objective on a batch (x = thermal, y = visual) with the
/// discriminators held fixed.
GeneratorObjective generator_objective(const CsganModel& model, const Tensor& x, const Tensor& y, bool want_grads);

struct Optimizers {
  numcore::AdamState g_y, g_x, d_y, d_x;
};

Optimizers make_optimizers(CsganModel& model, const numcore::AdamConfig& cfg);
void set_learning_rate(Optimizers& opt, double lr);

/// One alternating update: both discriminators, then both generators.
/// Throws NumericError naming the first non-finite component.
LossReport train_step(CsganModel& model, const PairedTiles& batch, Optimizers& opt);

struct TrainResult {
  std::vector<LossReport> history;
  double final_lr = 0.0;
};

using ProgressFn = std::function<void(const LossReport&)>;

TrainResult train(CsganModel& model, const PairedTiles& data, const TrainConfig& cfg, const ProgressFn& progress = {});

std::string history_csv(const std::vector<LossReport>& history);

std::vector<numcore::NamedArray> model_arrays(const CsganModel& model);
/// Loads parameters into a model of matching architecture; throws DataError on any mismatch.
void load_model_arrays(CsganModel& model, const std::vector<numcore::NamedArray>& arrays);

}  // namespace csfuse::csgan
