#pragma once

#include <span>

#include "csfuse/csgan/landmarks.hpp"
#include "csfuse/csgan/network.hpp"

namespace csfuse::csgan {

enum class AdversarialRole { Discriminator, Generator };

struct LossWeights {
  double cyc = 10.0;
  double per = 4.0;
  double feat = 7.0;
};

/// Least-squares adversarial loss.
/// Discriminator: ½[mean((D(real)-1)²) + mean(D(fake)²)]. Generator: mean((D(fake)-1)²);
/// `real` is ignored for the generator role and may be empty.
double adversarial_loss(const Tensor& real, const Tensor& fake, AdversarialRole role);

struct AdversarialGrads {
  double value = 0.0;
  Tensor real;
  Tensor fake;
};
AdversarialGrads adversarial_loss_grad(const Tensor& real, const Tensor& fake, AdversarialRole role);

/// mean|a - b| with its subgradient w.r.t. a (sign(0) = 0).
double l1_loss(const Tensor& a, const Tensor& b, Tensor* grad_a = nullptr);

/// mean|x_rec - x| + mean|y_rec - y|.
double cyclical_loss(const Tensor& x, const Tensor& x_rec, const Tensor& y, const Tensor& y_rec);

/// mean((φ(synth) - φ(real))²) over all feature elements; gradient w.r.t. synth when requested.
double perceptual_loss(const Network& phi, const Tensor& real, const Tensor& synth, Tensor* grad_synth = nullptr);

struct FeatureLossResult {
  double value = 0.0;
  double m_ratio = 0.0;
  std::size_t featureless = 0;  // synth misses plus pairs excluded for mismatch
  std::size_t included = 0;
  bool gated = false;
};

/// Per-image landmark sets; std::nullopt-like "none" is an empty vector.
FeatureLossResult feature_preserving_loss(std::span<const FeaturePoints> real, std::span<const FeaturePoints> synth,
                                          double t_feat, std::vector<std::vector<Point2>>* grad_synth = nullptr);

/// Runs the detector on both batches and back-propagates into `grad_synth` (same shape as synth).
FeatureLossResult feature_preserving_loss(const Tensor& real_batch, const Tensor& synth_batch,
                                          const LandmarkDetector& det, double t_feat, Tensor* grad_synth = nullptr);

double total_objective(double l_adv, double l_cyc, double l_per, double l_feat, const LossWeights& w);

}  // namespace csfuse::csgan
