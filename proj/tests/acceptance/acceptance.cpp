// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

#include "csfuse/app/commands.hpp"
#include "csfuse/core/io.hpp"
#include "csfuse/csgan/model.hpp"
#include "csfuse/data/dataset.hpp"
#include "csfuse/data/rig.hpp"
#include "csfuse/data/templates.hpp"
#include "csfuse/fusion/associate.hpp"
#include "csfuse/fusion/regressor.hpp"
#include "csfuse/mecsim/mecsim.hpp"
#include "csfuse/numcore/gradcheck.hpp"
#include "csfuse/numcore/layers.hpp"
#include "csfuse/screening/screening.hpp"
#include "net_support.hpp"
#include "temp_dir.hpp"
#include "test_support.hpp"

using namespace csfuse;
using testsupport::TempDir;
using numcore::Tensor;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

constexpr std::size_t kTile = 16;

// ---- 1. gradients

double layer_fd_error(const numcore::Layer& proto, std::uint64_t seed) {
  using namespace testsupport;
  numcore::Layer layer = proto;
  std::mt19937_64 rng(seed);
  // Norm affine parameters off identity so they are exercised.
  if (layer.kind == numcore::LayerKind::InstanceNorm) {
    layer.weight = random_tensor(layer.weight.shape(), rng, 0.5, 1.5);
    layer.bias = random_tensor(layer.bias.shape(), rng);
  }
  Tensor x = random_away_from_zero(numcore::Shape{1, 4, 8, 8}, rng);
  const Tensor y = numcore::layer_forward(layer, x);
  const Tensor r = random_tensor(y.shape(), rng);
  const auto g = numcore::layer_backward(layer, x, r);
  auto f = [&] { return dot(r, numcore::layer_forward(layer, x)); };
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, rel_err(g.input[i], central_diff(x, i, 1e-5, f)));
  if (!layer.weight.empty())
    for (std::size_t i = 0; i < layer.weight.size(); ++i)
      worst = std::max(worst, rel_err(g.weight[i], central_diff(layer.weight, i, 1e-5, f)));
  if (!layer.bias.empty())
    for (std::size_t i = 0; i < layer.bias.size(); ++i)
      worst = std::max(worst, rel_err(g.bias[i], central_diff(layer.bias, i, 1e-5, f)));
  return worst;
}

double dual_brb_fd_error() {
  using namespace testsupport;
  csgan::Rng lrng(7);
  csgan::DualBrb b = csgan::make_dual_brb("brb", 4, 2, lrng, 0.3);
  std::mt19937_64 rng(8);
  Tensor x = random_away_from_zero(numcore::Shape{1, 4, 8, 8}, rng);
  csgan::DualBrbTape tape;
  const Tensor y = csgan::dual_brb_forward(b, x, &tape);
  const Tensor r = random_tensor(y.shape(), rng);
  csgan::DualBrb pg{b.name, numcore::zeros_like(b.g), numcore::zeros_like(b.f), numcore::zeros_like(b.h)};
  const Tensor gx = csgan::dual_brb_backward(b, tape, r, &pg);
  auto f = [&] { return dot(r, csgan::dual_brb_forward(b, x)); };
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, rel_err(gx[i], central_diff(x, i, 1e-5, f)));
  for (auto [s, g] : {std::pair{&b.g, &pg.g}, std::pair{&b.f, &pg.f}, std::pair{&b.h, &pg.h}})
    for (std::size_t l = 0; l < s->layers.size(); ++l) {
      numcore::Tensor& w = s->layers[l].weight;
      for (std::size_t i = 0; i < w.size(); ++i)
        worst = std::max(worst, rel_err(g->layers[l].weight[i], central_diff(w, i, 1e-5, f)));
    }
  return worst;
}

Outcome criterion_gradients() {
  numcore::Rng rng(1);
  const std::vector<numcore::Layer> layers{
      numcore::make_conv("conv", 4, 3, 3, 2, 1, rng, 0.3),
      numcore::make_transpose_conv("tconv", 4, 3, 3, 2, 1, 1, rng, 0.3),
      numcore::make_instance_norm("norm", 4),
      numcore::make_relu(),
      numcore::make_leaky_relu(),
      numcore::make_tanh()};
  double worst_layer = 0.0;
  std::string worst_name;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const double e = layer_fd_error(layers[i], 10 + i);
    if (e >= worst_layer) {
      worst_layer = e;
      worst_name = numcore::to_string(layers[i].kind);
    }
  }
  const double brb = dual_brb_fd_error();

  auto model = csgan::make_model(csgan::test_scale(), data::make_detector(data::RigSpec{}, kTile), 31);
  std::mt19937_64 r(32);
  const Tensor x = csgan::replicate_channels(testsupport::smooth_batch(2, 1, kTile, r));
  const Tensor y = testsupport::smooth_batch(2, 3, kTile, r);
  auto loss = [&](std::span<const double> p, std::vector<double>* grad) {
    testsupport::assign(model.g_y, p);
    const auto o = csgan::generator_objective(model, x, y, grad != nullptr);
    if (grad) *grad = testsupport::flatten(o.grad_g_y);
    return o.total;
  };
  const auto rep = numcore::grad_check_directional(loss, testsupport::flatten(model.g_y), 1e-7, 8, 33);
  const bool pass = worst_layer <= 1e-4 && brb <= 1e-4 && rep.max_relative_error <= 1e-3;
  return {pass, fmt("layers max rel err %.2e (", worst_layer) + worst_name +
                    fmt("), Dual-BRB %.2e, generator objective %.2e over 8 directions", brb, rep.max_relative_error)};
}

// ---- 2. Dual-BRB algebra

Outcome criterion_dual_brb() {
  std::mt19937_64 rng(2);
  const Tensor x = testsupport::random_tensor(numcore::Shape{1, 4, 8, 8}, rng);
  auto zero = [](numcore::Sequential& s) {
    for (auto& l : s.layers)
      if (l.kind == numcore::LayerKind::Conv) {
        l.weight.fill(0.0);
        l.bias.fill(0.0);
      }
  };
  csgan::Rng lrng(3);
  csgan::DualBrb a = csgan::make_dual_brb("a", 4, 2, lrng, 0.3);
  zero(a.h);
  const bool identity = csgan::dual_brb_forward(a, x) == x;
  csgan::DualBrb b = csgan::make_dual_brb("b", 4, 2, lrng, 0.3);
  zero(b.f);
  const Tensor expect = numcore::forward(b.h, numcore::forward(b.g, x)) + x;
  const double diff = numcore::max_abs_diff(csgan::dual_brb_forward(b, x), expect);
  return {identity && diff <= 1e-12,
          std::string("zero-H output ") + (identity ? "bit-identical to input" : "NOT identical") +
              fmt("; zero-F max |diff| vs H(G(x)) + x = %.2e", diff)};
}

// ---- 3. loss identities

Outcome criterion_losses() {
  const double total = csgan::total_objective(1, 1, 1, 1, csgan::LossWeights{10, 4, 7});
  const std::vector<FeaturePoints> real{{{0, 0}, {2, 2}}}, synth{{{3, 4}, {5, 6}}};
  const auto fpl = csgan::feature_preserving_loss(real, synth, 0.5);
  const std::vector<FeaturePoints> real2{{{0, 0}}, {{0, 0}}}, synth2{{{3, 4}}, {}};
  const auto gated = csgan::feature_preserving_loss(real2, synth2, 0.5);
  const bool pass = total == 22.0 && fpl.value == 10.0 && gated.value == 0.0 && gated.gated;
  return {pass, fmt("objective(1,1,1,1) = %.17g; FPL (3,4) x2 = %.17g; gated FPL at mRatio 0.5 = %.17g", total,
                    fpl.value, gated.value)};
}

// ---- 4. toy training

Outcome criterion_training() {
  TempDir dir("acc_train");
  const data::RigSpec rig;
  const auto m = data::generate_dataset(dir.path(), data::DatasetSpec{120, 7, rig});
  const auto tiles = data::load_training_tiles(m, kTile, rig.crop_scale);
  const auto det = data::make_detector(rig, kTile);
  auto model = csgan::make_model(csgan::test_scale(), det, 7);
  csgan::TrainConfig cfg;
  cfg.iterations = 500;
  cfg.seed = 7;
  const auto hist = csgan::train(model, tiles, cfg).history;
  // Averages over the first and last 20 iterations smooth out batch-to-batch noise.
  double first = 0, last = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    first += hist[i].l_cyc / 20;
    last += hist[hist.size() - 1 - i].l_cyc / 20;
  }
  auto detect_rate = [&](const csgan::PairedTiles& t) {
    const auto s = csgan::synthesize_visual(model, t.thermal);
    std::size_t found = 0;
    for (std::size_t i = 0; i < t.size(); ++i) found += csgan::detect(det, s, i).found ? 1 : 0;
    return static_cast<double>(found) / static_cast<double>(t.size());
  };
  const double train_rate = detect_rate(tiles);
  TempDir held("acc_held");
  const auto hm = data::generate_dataset(held.path(), data::DatasetSpec{60, 99, rig});
  const double held_rate = detect_rate(data::load_training_tiles(hm, kTile, rig.crop_scale));
  const bool pass = last <= 0.5 * first && train_rate >= 0.9;
  return {pass, fmt("cyclical loss %.4f -> %.4f (ratio %.3f); landmarks found on %.1f%% of synthesized tiles", first,
                    last, last / first, 100 * train_rate) +
                    fmt(" (held-out scenes %.1f%%)", 100 * held_rate)};
}

// ---- 5. regressor

Outcome criterion_regressor() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2, 2);
  std::vector<std::vector<double>> z(50, std::vector<double>(8));
  std::vector<double> t;
  const std::vector<double> w{0.5, 1, -2, 3, 0.25, -0.75, 1.5, 2.5, -1};
  for (auto& row : z) {
    double s = w[0];
    for (std::size_t k = 0; k < 8; ++k) s += w[k + 1] * (row[k] = u(rng));
    t.push_back(s);
  }
  const auto fit = fusion::fit_regressor(z, t);
  double coef_err = 0;
  for (std::size_t k = 0; k < w.size(); ++k) coef_err = std::max(coef_err, std::abs(fit.coef[k] - w[k]));

  const data::RigSpec rig;
  const fusion::CameraCalib calib;
  const fusion::AssociateOptions opt{kTile, rig.crop_scale, {}};
  data::Rng prng(7);
  std::vector<std::vector<double>> zs[2];
  std::vector<double> ds[2], os[2];
  for (int i = 0; i < 600; ++i) {
    const auto p = data::sample_person(rig, prng);
    const auto vis = data::render_visual({p}, rig);
    const auto zi = fusion::labelled_disparity_vector(vis, data::visual_landmarks(p, rig),
                                                      data::thermal_landmarks(p, rig), calib, opt);
    if (!zi) continue;
    const int s = i < 400 ? 0 : 1;
    zs[s].push_back(*zi);
    ds[s].push_back(p.distance_ft);
    os[s].push_back(p.offset_ft);
  }
  const auto model = fusion::fit_pose_regressor(zs[0], ds[0], os[0]);
  double ed = 0, eo = 0;
  for (std::size_t i = 0; i < zs[1].size(); ++i) {
    const auto e = fusion::estimate_position(zs[1][i], model);
    ed += std::abs(e.distance_ft - ds[1][i]);
    eo += std::abs(e.offset_ft - os[1][i]);
  }
  ed /= double(zs[1].size());
  eo /= double(zs[1].size());
  const bool pass = coef_err <= 1e-9 && ed <= 0.5 && eo <= 0.7;
  return {pass, fmt("noiseless max |coef err| %.1e; held-out (%.0f scenes, 4-15 ft) MAE distance %.3f ft, offset %.3f ft",
                    coef_err, double(zs[1].size()), ed, eo)};
}

// ---- 6. adaptive search

Outcome criterion_search() {
  const data::RigSpec rig;
  const fusion::CameraCalib calib;
  const auto det = data::make_detector(rig, kTile);
  const fusion::AssociateOptions opt{kTile, rig.crop_scale, {}};
  long ok = 0, faces = 0, skipped = 0;
  for (int s = 0; s < 100; ++s) {
    data::Rng rng(1000 + s);
    const int n = 1 + static_cast<int>(rng() % 3);
    std::vector<data::Person> ppl;
    for (int k = 0; k < n; ++k) ppl.push_back(data::sample_person(rig, rng));
    const double shift = std::uniform_real_distribution<double>(16, 40)(rng);
    const auto vis = data::render_visual(ppl, rig);
    const auto a =
        fusion::associate(vis, data::shifted_gray(vis, shift), fusion::identity_synthesizer(), calib, det, nullptr, opt);
    faces += long(a.objects.size() + a.skipped.size());
    skipped += long(a.skipped.size());
    for (const auto& o : a.objects) ok += std::abs(o.disparity - shift) <= calib.sweep_step_px ? 1 : 0;
  }
  // Skipped faces count as misses.
  const double rate = double(ok) / double(faces);
  return {rate >= 0.95, fmt("%.0f/%.0f objects within one sweep step (%.1f%%; %.0f skipped count as misses)", double(ok),
                            double(faces), 100 * rate, double(skipped))};
}

// ---- 7. screening evaluation

Outcome criterion_accuracy() {
  const double cloud = screening::accuracy({6, 2, 110, 24}), edge = screening::accuracy({7, 1, 133, 1});
  const bool pass = std::abs(100 * cloud - 81.6) <= 0.1 && std::abs(100 * edge - 98.5) <= 0.1;
  return {pass, "cloud " + screening::percent_truncated(cloud) + "% (" + fmt("%.4f", 100 * cloud) + "), edge " +
                    screening::percent_truncated(edge) + "% (" + fmt("%.4f", 100 * edge) + ")"};
}

// ---- 8. simulator

Outcome criterion_simulator() {
  const mecsim::PersonFlow flow;
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  const auto c = mecsim::compare_deployments(mecsim::edge_profile(), mecsim::cloud_profile(), flow, 0.15, 600.0, seeds);
  bool conserved = true;
  for (const auto* runs : {&c.runs_a, &c.runs_b})
    for (const auto& m : *runs)
      conserved = conserved && m.frames_generated == m.frames_processed + m.frames_dropped &&
                  m.persons_arrived == m.persons_screened + m.persons_missed;
  bool monotone = true;
  double prev = 1e18;
  for (double rtt : {1.0, 50.0, 100.0, 150.0, 200.0}) {
    auto p = mecsim::edge_profile();
    p.rtt_ms = rtt;
    double tp = 0;
    for (auto s : seeds) {
      const auto m = mecsim::simulate(p, flow, 0.15, 600.0, s);
      tp += m.throughput_per_min / double(seeds.size());
      conserved = conserved && m.frames_generated == m.frames_processed + m.frames_dropped;
    }
    monotone = monotone && tp <= prev;
    prev = tp;
  }
  const bool pass = c.ratio.mean >= 4.0 && c.ratio.mean <= 5.5 && c.accuracy_a.mean > c.accuracy_b.mean && conserved &&
                    monotone;
  return {pass, fmt("throughput edge %.1f/min, cloud %.1f/min, ratio %.2f", c.throughput_a.mean, c.throughput_b.mean,
                    c.ratio.mean) +
                    fmt("; accuracy edge %.1f%%, cloud %.1f%%", 100 * c.accuracy_a.mean, 100 * c.accuracy_b.mean) +
                    "; conservation " + (conserved ? "holds" : "BROKEN") + "; RTT sweep " +
                    (monotone ? "monotone" : "NOT monotone")};
}

// ---- 9. determinism

Outcome criterion_determinism() {
  const char* config = R"({
  "seed": 11,
  "data": {"n": 12},
  "train": {"iterations": 30},
  "scenario": {"duration_s": 120, "seeds": [1, 2]}
})";
  TempDir a("acc_det_a"), b("acc_det_b");
  std::vector<std::string> mismatched;
  bool ran = true;
  for (auto* d : {&a, &b}) {
    csfuse::io::atomic_write(*d / "config.json", config);
    for (const char* cmd : {"gen-data", "train", "simulate"}) {
      std::ostringstream out, err;
      const int code = app::run_command({cmd, "--config", (*d / "config.json").string(), "--out", (*d / "o").string()},
                                        out, err);
      if (code != 0) {
        ran = false;
        mismatched.push_back(std::string(cmd) + " exit " + std::to_string(code));
      }
    }
  }
  long compared = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(a / "o")) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), a / "o");
    ++compared;
    if (!std::filesystem::exists(b / "o" / rel.string()) ||
        io::read_file(e.path()) != io::read_file(b / "o" / rel.string()))
      mismatched.push_back(rel.generic_string());
  }
  std::string detail = fmt("%.0f output files compared across two gen-data/train/simulate runs", double(compared));
  for (const auto& m : mismatched) detail += "; differs: " + m;
  return {ran && mismatched.empty() && compared > 0, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient correctness", criterion_gradients}, {"Dual-BRB algebra", criterion_dual_brb},
      {"loss identities", criterion_losses},         {"toy training", criterion_training},
      {"pose regressor", criterion_regressor},        {"adaptive search", criterion_search},
      {"screening evaluation", criterion_accuracy},  {"MEC simulator", criterion_simulator},
      {"determinism", criterion_determinism}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %zu %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
