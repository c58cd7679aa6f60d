#include <gtest/gtest.h>

#include <cmath>

#include "csfuse/core/error.hpp"
#include "csfuse/csgan/model.hpp"
#include "csfuse/data/rig.hpp"
#include "csfuse/data/templates.hpp"
#include "csfuse/data/tiles.hpp"
#include "csfuse/numcore/gradcheck.hpp"
#include "net_support.hpp"
#include "test_support.hpp"

using namespace csfuse;
using namespace csfuse::csgan;
using namespace testsupport;

namespace {

void zero_convs(Sequential& s) {
  for (auto& l : s.layers)
    if (l.kind == numcore::LayerKind::Conv) {
      l.weight.fill(0.0);
      l.bias.fill(0.0);
    }
}

DualBrb random_brb(std::uint64_t seed) {
  Rng rng(seed);
  DualBrb b = make_dual_brb("brb", 4, 2, rng, 0.3);
  std::mt19937_64 r(seed + 1);
  std::normal_distribution<double> nd(0.0, 0.3);
  // Norm affine parameters away from identity so they are exercised too.
  for (auto* s : {&b.g, &b.f, &b.h})
    for (auto& l : s->layers)
      if (l.kind == numcore::LayerKind::InstanceNorm) {
        for (double& v : l.weight.data()) v = 1.0 + nd(r);
        for (double& v : l.bias.data()) v = nd(r);
      }
  return b;
}

CsganModel small_model(std::uint64_t seed) {
  return make_model(test_scale(), data::make_detector(data::RigSpec{}, 16), seed);
}

}  // namespace

TEST(DualBrb, ZeroHIsExactIdentity) {
  DualBrb b = random_brb(1);
  zero_convs(b.h);
  std::mt19937_64 rng(2);
  const Tensor x = random_tensor(Shape{1, 4, 8, 8}, rng);
  EXPECT_EQ(dual_brb_forward(b, x), x);
}

TEST(DualBrb, ZeroFPassesGThroughInnerSkip) {
  DualBrb b = random_brb(3);
  zero_convs(b.f);
  std::mt19937_64 rng(4);
  const Tensor x = random_tensor(Shape{1, 4, 8, 8}, rng);
  const Tensor expect = numcore::forward(b.h, numcore::forward(b.g, x)) + x;
  EXPECT_LE(max_abs_diff(dual_brb_forward(b, x), expect), 1e-12);
}

TEST(DualBrb, ShapesAreWellTyped) {
  Rng rng(5);
  const DualBrb b = make_dual_brb("b", 6, 3, rng);
  EXPECT_EQ(b.channels(), 6u);
  EXPECT_EQ(b.bottleneck(), 3u);
  std::mt19937_64 r(6);
  const Tensor x = random_tensor(Shape{2, 6, 5, 7}, r);
  EXPECT_EQ(dual_brb_forward(b, x).shape(), x.shape());
}

TEST(DualBrb, BackwardMatchesFiniteDifferences) {
  DualBrb b = random_brb(7);
  std::mt19937_64 rng(8);
  Tensor x = random_away_from_zero(Shape{1, 4, 8, 8}, rng);
  DualBrbTape tape;
  const Tensor y = dual_brb_forward(b, x, &tape);
  const Tensor r = random_tensor(y.shape(), rng);
  DualBrb pg{b.name, numcore::zeros_like(b.g), numcore::zeros_like(b.f), numcore::zeros_like(b.h)};
  const Tensor gx = dual_brb_backward(b, tape, r, &pg);
  auto f = [&] { return dot(r, dual_brb_forward(b, x)); };
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); i += 5) worst = std::max(worst, rel_err(gx[i], central_diff(x, i, 1e-5, f)));
  for (auto [s, g] : {std::pair{&b.g, &pg.g}, std::pair{&b.f, &pg.f}, std::pair{&b.h, &pg.h}}) {
    Tensor& w = s->layers.back().weight;
    const Tensor& gw = g->layers.back().weight;
    for (std::size_t i = 0; i < w.size(); i += 3) worst = std::max(worst, rel_err(gw[i], central_diff(w, i, 1e-5, f)));
  }
  EXPECT_LE(worst, 1e-4);
}

TEST(Network, GeneratorPreservesTileShape) {
  Rng rng(9);
  const auto g = make_generator(GeneratorSpec{3, 4, 1, 16}, rng);
  std::mt19937_64 r(10);
  const Tensor x = random_tensor(Shape{2, 3, 16, 16}, r);
  const Tensor y = forward(g, x);
  EXPECT_EQ(y.shape(), x.shape());
  for (double v : y.data()) EXPECT_LE(std::abs(v), 1.0);
}

TEST(Network, GeneratorRejectsWrongTile) {
  EXPECT_THROW(check_generator_input(GeneratorSpec{3, 4, 1, 16}, Tensor(Shape{1, 3, 32, 32})), ShapeError);
  EXPECT_THROW(check_generator_input(GeneratorSpec{3, 4, 1, 16}, Tensor(Shape{1, 1, 16, 16})), ShapeError);
}

TEST(Losses, ObjectiveWithUnitComponentsIsTwentyTwo) {
  EXPECT_EQ(total_objective(1.0, 1.0, 1.0, 1.0, LossWeights{10.0, 4.0, 7.0}), 22.0);
}

TEST(Losses, ObjectiveIsLinearInEachComponent) {
  const LossWeights w{10.0, 4.0, 7.0};
  const double base = total_objective(0.3, 0.2, 0.1, 0.4, w);
  EXPECT_NEAR(total_objective(1.3, 0.2, 0.1, 0.4, w) - base, 1.0, 1e-12);
  EXPECT_NEAR(total_objective(0.3, 1.2, 0.1, 0.4, w) - base, 10.0, 1e-12);
  EXPECT_NEAR(total_objective(0.3, 0.2, 1.1, 0.4, w) - base, 4.0, 1e-12);
  EXPECT_NEAR(total_objective(0.3, 0.2, 0.1, 1.4, w) - base, 7.0, 1e-12);
}

TEST(Losses, FeatureLossHandComputedCase) {
  const std::vector<FeaturePoints> real{{{1, 1}, {5, 2}}};
  const std::vector<FeaturePoints> synth{{{4, 5}, {8, 6}}};
  const auto r = feature_preserving_loss(real, synth, 0.5);
  EXPECT_EQ(r.value, 10.0);
  EXPECT_FALSE(r.gated);
}

TEST(Losses, FeatureLossGateIsExactlyZero) {
  const std::vector<FeaturePoints> real{{{1, 1}}, {{2, 2}}};
  const std::vector<FeaturePoints> synth{{{4, 5}}, {}};
  const auto r = feature_preserving_loss(real, synth, 0.5);
  EXPECT_DOUBLE_EQ(r.m_ratio, 0.5);
  EXPECT_TRUE(r.gated);
  EXPECT_EQ(r.value, 0.0);
  EXPECT_FALSE(feature_preserving_loss(real, synth, 0.6).gated);
}

TEST(Losses, AdversarialOptimaAreZero) {
  const Tensor ones(Shape{2, 1, 3, 3}, 1.0), zeros(Shape{2, 1, 3, 3}, 0.0);
  EXPECT_EQ(adversarial_loss(ones, zeros, AdversarialRole::Discriminator), 0.0);
  EXPECT_EQ(adversarial_loss(Tensor(), ones, AdversarialRole::Generator), 0.0);
  EXPECT_DOUBLE_EQ(adversarial_loss(zeros, ones, AdversarialRole::Discriminator), 1.0);
}

TEST(Losses, AdversarialGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  Tensor real = random_tensor(Shape{2, 1, 3, 3}, rng), fake = random_tensor(Shape{2, 1, 3, 3}, rng);
  for (auto role : {AdversarialRole::Discriminator, AdversarialRole::Generator}) {
    const auto g = adversarial_loss_grad(real, fake, role);
    auto f = [&] { return adversarial_loss(real, fake, role); };
    for (std::size_t i = 0; i < fake.size(); ++i) EXPECT_LE(rel_err(g.fake[i], central_diff(fake, i, 1e-6, f)), 1e-6);
  }
}

TEST(Losses, CyclicalLossOfPerfectReconstructionIsZero) {
  std::mt19937_64 rng(12);
  const Tensor x = random_tensor(Shape{1, 3, 4, 4}, rng), y = random_tensor(Shape{1, 3, 4, 4}, rng);
  EXPECT_EQ(cyclical_loss(x, x, y, y), 0.0);
  EXPECT_DOUBLE_EQ(l1_loss(Tensor(Shape{1, 1, 1, 2}, 1.0), Tensor(Shape{1, 1, 1, 2}, -0.5)), 1.5);
}

TEST(Losses, PerceptualGradientMatchesFiniteDifferences) {
  Rng prng(13);
  const Network phi = make_perceptual_net(3, 4, prng);
  std::mt19937_64 rng(14);
  const Tensor real = random_tensor(Shape{1, 3, 8, 8}, rng);
  Tensor synth = random_away_from_zero(Shape{1, 3, 8, 8}, rng);
  EXPECT_EQ(perceptual_loss(phi, real, real), 0.0);
  Tensor g;
  perceptual_loss(phi, real, synth, &g);
  auto f = [&] { return perceptual_loss(phi, real, synth); };
  double worst = 0.0;
  for (std::size_t i = 0; i < synth.size(); i += 7) worst = std::max(worst, rel_err(g[i], central_diff(synth, i, 1e-5, f)));
  EXPECT_LE(worst, 1e-4);
}

TEST(Model, RejectsInvalidWeightsAndGate) {
  const auto det = data::make_detector(data::RigSpec{}, 16);
  EXPECT_THROW(make_model(test_scale(), det, 1, LossWeights{0.0, 4.0, 7.0}), ConfigError);
  EXPECT_THROW(make_model(test_scale(), det, 1, LossWeights{}, 0.0), ConfigError);
  EXPECT_THROW(make_model(test_scale(), det, 1, LossWeights{}, 1.5), ConfigError);
  EXPECT_NO_THROW(make_model(test_scale(), det, 1, LossWeights{}, 1.0));
}

TEST(Model, SeededInitIsDeterministic) {
  EXPECT_EQ(flatten(small_model(5).g_y), flatten(small_model(5).g_y));
  EXPECT_NE(flatten(small_model(5).g_y), flatten(small_model(6).g_y));
}

TEST(Model, ArraysRoundTripThroughCheckpoint) {
  const auto a = small_model(21);
  auto b = small_model(22);
  load_model_arrays(b, numcore::decode_weights(numcore::encode_weights(model_arrays(a))));
  EXPECT_EQ(flatten(b.g_y), flatten(a.g_y));
  EXPECT_EQ(flatten(b.d_x), flatten(a.d_x));
  auto arrays = model_arrays(a);
  arrays.pop_back();
  EXPECT_THROW(load_model_arrays(b, arrays), DataError);
}

TEST(Model, GeneratorObjectiveGradientMatchesFiniteDifferences) {
  auto model = small_model(31);
  std::mt19937_64 rng(32);
  const Tensor x = replicate_channels(smooth_batch(2, 1, 16, rng));
  const Tensor y = smooth_batch(2, 3, 16, rng);
  auto loss = [&](std::span<const double> p, std::vector<double>* grad) {
    assign(model.g_y, p);
    const auto o = generator_objective(model, x, y, grad != nullptr);
    if (grad) *grad = flatten(o.grad_g_y);
    return o.total;
  };
  // Small step: ReLU kinks sit close to the untrained activations.
  const auto p0 = flatten(model.g_y);
  const auto rep = numcore::grad_check_directional(loss, p0, 1e-7, 6, 33);
  EXPECT_LE(rep.max_relative_error, 1e-3) << "analytic " << rep.analytic << " numeric " << rep.numeric;
}

TEST(Model, TrainingIsDeterministic) {
  std::mt19937_64 rng(41);
  PairedTiles data{replicate_channels(smooth_batch(6, 1, 16, rng)), smooth_batch(6, 3, 16, rng)};
  TrainConfig cfg;
  cfg.iterations = 3;
  cfg.seed = 9;
  auto a = small_model(1), b = small_model(1);
  const auto ha = train(a, data, cfg).history, hb = train(b, data, cfg).history;
  EXPECT_EQ(history_csv(ha), history_csv(hb));
  EXPECT_EQ(numcore::encode_weights(model_arrays(a)), numcore::encode_weights(model_arrays(b)));
  EXPECT_EQ(history_csv(ha).substr(0, history_csv(ha).find('\n')), "iteration,l_adv_D,l_adv_G,l_cyc,l_per,l_feat,mRatio,lr");
  EXPECT_EQ(ha.size(), 3u);
}

TEST(Model, PerceptualNetIsNeverUpdated) {
  std::mt19937_64 rng(42);
  PairedTiles data{replicate_channels(smooth_batch(4, 1, 16, rng)), smooth_batch(4, 3, 16, rng)};
  auto m = small_model(2);
  const auto phi = flatten(m.phi), gy = flatten(m.g_y);
  TrainConfig cfg;
  cfg.iterations = 2;
  train(m, data, cfg);
  EXPECT_EQ(flatten(m.phi), phi);
  EXPECT_NE(flatten(m.g_y), gy);
}

TEST(Model, NonFiniteBatchIsRejected) {
  std::mt19937_64 rng(43);
  PairedTiles data{replicate_channels(smooth_batch(4, 1, 16, rng)), smooth_batch(4, 3, 16, rng)};
  data.visual[5] = std::numeric_limits<double>::quiet_NaN();
  auto m = small_model(3);
  auto opt = make_optimizers(m, numcore::AdamConfig{});
  EXPECT_THROW(train_step(m, data, opt), NumericError);
}

TEST(Landmarks, DetectorFindsCanonicalFace) {
  const data::RigSpec rig;
  for (std::size_t T : {16u, 64u}) {
    const auto det = data::make_detector(rig, T);
    const auto face = data::canonical_face();
    const auto img = data::render_face_tile(face, T, rig.crop_scale, rig);
    const auto d = detect(det, data::rgb_tile(img, BBox{0, 0, double(T), double(T)}, T));
    ASSERT_TRUE(d.found) << "T=" << T;
    const auto truth = data::face_tile_landmarks(face, T, rig.crop_scale);
    for (std::size_t j = 0; j < truth.size(); ++j) EXPECT_LE(norm(d.points()[j] - truth[j]), 1.0) << "T=" << T << " j=" << j;
  }
}

TEST(Landmarks, FlatTileHasNoFeatures) {
  const auto det = data::make_detector(data::RigSpec{}, 16);
  EXPECT_FALSE(detect(det, Tensor(Shape{1, 3, 16, 16}, 0.2)).found);
}
