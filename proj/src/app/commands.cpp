#include "csfuse/app/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "csfuse/app/config.hpp"
#include "csfuse/core/error.hpp"
#include "csfuse/core/io.hpp"
#include "csfuse/data/templates.hpp"
#include "csfuse/data/tiles.hpp"
#include "csfuse/numcore/weights_io.hpp"
#include "json.hpp"

namespace csfuse::app {

namespace {

using nlohmann::ordered_json;

struct Options {
  std::string command;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string scale;
  bool allow_partial = false;
  std::string input;
};

/// Collects outputs and notes; written as <out>/<command>.log. No wall-clock data, so
/// identical runs produce identical logs.
class RunLog {
 public:
  RunLog(fs::path out, std::string command, const ExperimentConfig& cfg, const std::string& config_text)
      : out_(std::move(out)), command_(std::move(command)) {
    lines_.push_back("command " + command_);
    lines_.push_back("config_fnv1a64 " + io::hex64(io::fnv1a64(config_text)));
    lines_.push_back("seed " + std::to_string(cfg.seed));
    lines_.push_back("scale " + cfg.scale);
  }

  void write(const std::string& name, const std::string& bytes) {
    io::atomic_write(out_ / name, bytes);
    lines_.push_back("output " + name + " fnv1a64 " + io::hex64(io::fnv1a64(bytes)));
  }
  void note(const std::string& s) { lines_.push_back("note " + s); }

  void finish() {
    std::string text;
    for (const auto& l : lines_) text += l + "\n";
    io::atomic_write(out_ / (command_ + ".log"), text);
  }

 private:
  fs::path out_;
  std::string command_;
  std::vector<std::string> lines_;
};

struct Context {
  Options opt;
  ExperimentConfig cfg;
  fs::path out;
  std::ostream& cout;
  std::ostream& cerr;
  RunLog log;

  fs::path data_dir() const { return cfg.data_dir ? *cfg.data_dir : out / "data"; }
  fs::path weights_path() const { return cfg.weights_path ? *cfg.weights_path : out / "weights.csgw"; }
  fs::path regressor_path() const { return cfg.regressor_path ? *cfg.regressor_path : out / "regressor.json"; }
  std::size_t tile() const { return cfg.model.gen.tile; }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

data::RigSpec dataset_rig(const fs::path& dir) {
  return fs::exists(dir / "dataset.json") ? data::read_dataset_info(dir).spec.rig : data::RigSpec{};
}

data::Manifest load_manifest(Context& ctx) {
  if (ctx.cfg.visual_dir) {
    std::vector<std::string> warnings;
    auto m = data::load_paired_directory(*ctx.cfg.visual_dir, *ctx.cfg.thermal_dir, ctx.cfg.pattern,
                                         ctx.opt.allow_partial, &warnings);
    for (const auto& w : warnings) {
      ctx.cerr << "warning: " << w << "\n";
      ctx.log.note(w);
    }
    return m;
  }
  const fs::path csv = ctx.data_dir() / "manifest.csv";
  if (!fs::exists(csv)) throw DataError("no manifest at " + csv.string() + " (run gen-data or set data.dir)");
  return data::read_manifest(csv);
}

data::RigSpec manifest_rig(const Context& ctx) {
  return ctx.cfg.visual_dir ? data::RigSpec{} : dataset_rig(ctx.data_dir());
}

csgan::CsganModel load_model(Context& ctx, const data::RigSpec& rig) {
  auto model = csgan::make_model(ctx.cfg.model, data::make_detector(rig, ctx.tile()), ctx.cfg.seed, ctx.cfg.weights,
                                 ctx.cfg.t_feat);
  const fs::path p = ctx.weights_path();
  if (!fs::exists(p)) throw DataError("no weights at " + p.string() + " (run train or set paths.weights)");
  csgan::load_model_arrays(model, numcore::load_weights(p));
  return model;
}

// ---------------------------------------------------------------------------------------------

int cmd_gen_data(Context& ctx) {
  data::DatasetSpec spec;
  spec.n = ctx.cfg.n;
  spec.seed = ctx.cfg.seed;
  const fs::path dir = ctx.data_dir();
  const auto m = data::generate_dataset(dir, spec);
  for (const char* f : {"manifest.csv", "truth.csv", "dataset.json"}) {
    ctx.log.note(std::string(f) + " fnv1a64 " + io::hex64(io::fnv1a64(io::read_file(dir / f))));
  }
  ctx.cout << "generated " << m.rows.size() << " pairs in " << dir.string() << "\n";
  return kOk;
}

int cmd_train(Context& ctx) {
  const auto manifest = load_manifest(ctx);
  const auto rig = manifest_rig(ctx);
  data::LoadReport report;
  const auto tiles = data::load_training_tiles(manifest, ctx.tile(), rig.crop_scale, &report);
  for (const auto& s : report.skipped) {
    ctx.cerr << "warning: skipped " << s << "\n";
    ctx.log.note("skipped " + s);
  }
  const auto det = data::make_detector(rig, ctx.tile());
  auto model = csgan::make_model(ctx.cfg.model, det, ctx.cfg.seed, ctx.cfg.weights, ctx.cfg.t_feat);
  auto tc = ctx.cfg.train;
  tc.seed = ctx.cfg.seed;
  const auto res = csgan::train(model, tiles, tc, [&](const csgan::LossReport& r) {
    if (r.iteration % 100 == 0) {
      ctx.cout << "iter " << r.iteration << " cyc " << fmt("%.4f", r.l_cyc) << " feat " << fmt("%.3f", r.l_feat)
               << " lr " << fmt("%.2e", r.lr) << "\n";
    }
  });
  const auto synth = csgan::synthesize_visual(model, tiles.thermal);
  std::size_t found = 0;
  for (std::size_t i = 0; i < tiles.size(); ++i) found += csgan::detect(det, synth, i).found ? 1 : 0;
  ctx.log.write("weights.csgw", numcore::encode_weights(csgan::model_arrays(model)));
  ctx.log.write("history.csv", csgan::history_csv(res.history));
  const double rate = static_cast<double>(found) / static_cast<double>(tiles.size());
  ctx.log.note("pairs " + std::to_string(tiles.size()) + " synth_detect_rate " + fmt("%.4f", rate));
  ctx.cout << "trained on " << tiles.size() << " pairs; landmarks found on " << found << "/" << tiles.size()
           << " synthesized tiles\n";
  return kOk;
}

int cmd_synth(Context& ctx) {
  if (ctx.opt.input.empty()) throw ConfigError("synth needs --input <thermal.pgm>");
  const auto rig = manifest_rig(ctx);
  const auto model = load_model(ctx, rig);
  const Gray16Image img = read_pgm(ctx.opt.input);
  const BBox whole{0, 0, static_cast<double>(img.width), static_cast<double>(img.height)};
  const auto out = csgan::synthesize_visual(model, csgan::replicate_channels(data::thermal_tile(img, whole, ctx.tile())));
  const auto [lo, hi] = std::minmax_element(out.data().begin(), out.data().end());
  ctx.log.write("synth.ppm", encode_ppm(data::tile_to_rgb(out)));
  ctx.cout << "synthesized " << ctx.tile() << "x" << ctx.tile() << " tile, values in [" << fmt("%.4f", *lo) << ", "
           << fmt("%.4f", *hi) << "]\n";
  return kOk;
}

int cmd_fit_pose(Context& ctx) {
  const auto manifest = load_manifest(ctx);
  if (!manifest.has_pose_labels()) throw DataError("fit-pose needs distance/offset labels on every manifest row");
  const auto rig = manifest_rig(ctx);
  std::map<std::string, data::TruthRow> truth;
  const fs::path truth_csv = ctx.data_dir() / "truth.csv";
  if (!ctx.cfg.visual_dir && fs::exists(truth_csv)) {
    for (const auto& t : data::read_truth(truth_csv)) truth[t.id] = t;
  }
  fusion::AssociateOptions ao;
  ao.tile = ctx.tile();
  ao.crop_scale = rig.crop_scale;
  std::vector<std::vector<double>> z;
  std::vector<double> d, o, kd, meas, body;
  std::size_t skipped = 0;
  for (const auto& r : manifest.rows) {
    const auto lv = data::landmark_path(manifest, r.id, "visual"), lt = data::landmark_path(manifest, r.id, "thermal");
    if (!fs::exists(lv) || !fs::exists(lt)) throw DataError("fit-pose: landmark files missing for " + r.id);
    const auto pv = data::read_landmarks(lv), pt = data::read_landmarks(lt);
    const auto visual = read_ppm(manifest.resolve(r.visual_path));
    const auto zz = fusion::labelled_disparity_vector(visual, pv, pt, ctx.cfg.calib, ao);
    if (!zz) {
      ++skipped;
      ctx.log.note("skipped " + r.id + ": no detected face contains the landmarks");
      continue;
    }
    z.push_back(*zz);
    d.push_back(*r.distance_ft);
    o.push_back(*r.offset_ft);
    if (auto it = truth.find(r.id); it != truth.end()) {
      const screening::ThermalFrame frame{read_pgm(manifest.resolve(r.thermal_path)), rig.calib};
      kd.push_back(*r.distance_ft);
      meas.push_back(screening::read_canthus_temperature(frame, pt, 1));
      body.push_back(it->second.body_temp_c);
    }
  }
  if (skipped) ctx.cerr << "warning: " << skipped << " pairs skipped (no face found)\n";
  auto model = fusion::fit_pose_regressor(z, d, o);
  model.tile = ctx.tile();
  double ed = 0.0, eo = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const auto e = fusion::estimate_position(z[i], model);
    ed += std::abs(e.distance_ft - d[i]) / static_cast<double>(z.size());
    eo += std::abs(e.offset_ft - o[i]) / static_cast<double>(z.size());
  }
  ctx.log.write("regressor.json", fusion::regressor_json(model));
  ctx.cout << "regressor on " << z.size() << " pairs: train MAE distance " << fmt("%.3f", ed) << " ft, offset "
           << fmt("%.3f", eo) << " ft\n";
  if (!kd.empty()) {
    const auto comp = screening::fit_compensation(kd, meas, body);
    const ordered_json cj{{"kappa", comp.kappa},
                          {"min_distance_ft", comp.min_distance_ft},
                          {"max_distance_ft", comp.max_distance_ft}};
    ctx.log.write("compensation.json", cj.dump(2) + "\n");
    ctx.cout << "compensation kappa " << fmt("%.4f", comp.kappa) << " C/ft\n";
  }
  return kOk;
}

screening::CompensationModel load_compensation(const Context& ctx) {
  if (ctx.cfg.compensation) return *ctx.cfg.compensation;
  const fs::path p = ctx.out / "compensation.json";
  if (!fs::exists(p)) throw DataError("no compensation model: set config 'compensation' or run fit-pose");
  try {
    const auto j = nlohmann::json::parse(io::read_file(p));
    screening::CompensationModel m{j.at("kappa").get<double>(), j.at("min_distance_ft").get<double>(),
                                   j.at("max_distance_ft").get<double>()};
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(p.string() + ": " + e.what());
  }
}

int cmd_screen(Context& ctx) {
  const auto manifest = load_manifest(ctx);
  const auto rig = manifest_rig(ctx);
  const auto model = load_model(ctx, rig);
  screening::ScreeningBundle b;
  b.calib = ctx.cfg.calib;
  b.detector = data::make_detector(rig, ctx.tile());
  b.synthesizer = fusion::csgan_synthesizer(model);
  const fs::path rp = ctx.regressor_path();
  if (!fs::exists(rp)) throw DataError("no regressor at " + rp.string() + " (run fit-pose or set paths.regressor)");
  b.regressor = fusion::regressor_from_json(io::read_file(rp));
  if (b.regressor.tile != 0 && b.regressor.tile != ctx.tile()) {
    throw ConfigError("regressor was fitted at tile " + std::to_string(b.regressor.tile) + ", model uses " +
                      std::to_string(ctx.tile()));
  }
  b.compensation = load_compensation(ctx);
  b.thermal_calib = rig.calib;
  b.threshold_c = ctx.cfg.threshold_c;
  b.canthus_radius = ctx.cfg.canthus_radius;
  b.associate.tile = ctx.tile();
  b.associate.crop_scale = rig.crop_scale;

  std::map<std::string, bool> truth;
  const fs::path truth_csv = ctx.data_dir() / "truth.csv";
  if (!ctx.cfg.visual_dir && fs::exists(truth_csv)) {
    for (const auto& t : data::read_truth(truth_csv)) truth[t.id] = t.fever;
  }

  std::string jsonl, eval = "record_id,predicted,truth\n";
  screening::ConfusionCounts cc;
  std::size_t records = 0, skipped = 0;
  for (const auto& r : manifest.rows) {
    const auto res = screening::screen_frame_pair(read_ppm(manifest.resolve(r.visual_path)),
                                                  read_pgm(manifest.resolve(r.thermal_path)), b, r.id);
    for (const auto& s : res.skipped) {
      ++skipped;
      ctx.log.note("skipped " + r.id + ":" + std::to_string(s.index) + " " + s.reason);
    }
    for (const auto& rec : res.records) {
      ++records;
      jsonl += screening::record_json(rec) + "\n";
      if (auto it = truth.find(r.id); it != truth.end()) {
        eval += rec.id + "," + (rec.fever ? "1" : "0") + "," + (it->second ? "1" : "0") + "\n";
        cc.add(rec.fever, it->second);
      }
    }
  }
  ctx.log.write("records.jsonl", jsonl);
  ctx.cout << "screened " << manifest.rows.size() << " frame pairs: " << records << " records, " << skipped
           << " skipped\n";
  if (cc.total() > 0) {
    ctx.log.write("eval.csv", eval);
    ctx.cout << "accuracy " << screening::percent_truncated(screening::accuracy(cc)) << "% (TP " << cc.tp << " FP "
             << cc.fp << " TN " << cc.tn << " FN " << cc.fn << ")\n";
  }
  return kOk;
}

int cmd_simulate(Context& ctx) {
  const auto& s = ctx.cfg.scenario;
  for (const auto& p : s.profiles) {
    const auto m = mecsim::simulate(p, s.flow, s.fever_rate, s.duration_s, ctx.cfg.seed);
    ctx.log.write(p.name + "_metrics.json", mecsim::metrics_json(m));
    ctx.log.write(p.name + "_latency.csv", mecsim::latency_histogram_csv(m.latencies_ms));
    ctx.cout << p.name << ": throughput " << fmt("%.1f", m.throughput_per_min) << " persons/min, accuracy "
             << screening::percent_truncated(m.accuracy) << "%, frames " << m.frames_processed << "/"
             << m.frames_generated << " processed\n";
  }
  return kOk;
}

int cmd_compare(Context& ctx) {
  const auto& s = ctx.cfg.scenario;
  if (s.profiles.size() < 2) throw ConfigError("compare needs two profiles in the scenario");
  const auto c = mecsim::compare_deployments(s.profiles[0], s.profiles[1], s.flow, s.fever_rate, s.duration_s, s.seeds);
  const auto table = mecsim::comparison_table(c);
  auto spread = [](const mecsim::Spread& x) { return ordered_json{{"mean", x.mean}, {"min", x.min}, {"max", x.max}}; };
  const ordered_json j{{"a", c.name_a},
                       {"b", c.name_b},
                       {"seeds", s.seeds},
                       {"throughput_a", spread(c.throughput_a)},
                       {"throughput_b", spread(c.throughput_b)},
                       {"throughput_ratio", spread(c.ratio)},
                       {"accuracy_a", spread(c.accuracy_a)},
                       {"accuracy_b", spread(c.accuracy_b)},
                       {"accuracy_gap", spread(c.accuracy_gap)}};
  ctx.log.write("compare.json", j.dump(2) + "\n");
  ctx.log.write("compare.txt", table);
  ctx.cout << table;
  return kOk;
}

int cmd_eval(Context& ctx) {
  if (ctx.opt.input.empty()) throw ConfigError("eval needs --input <records.csv>");
  const auto rows = screening::parse_eval_csv(io::read_file(ctx.opt.input));
  const auto c = screening::confusion(rows);
  const double acc = screening::accuracy(c);
  const ordered_json j{{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}, {"accuracy", acc}};
  ctx.log.write("eval.json", j.dump(2) + "\n");
  ctx.cout << "accuracy " << screening::percent_truncated(acc) << "% (" << (c.tp + c.tn) << "/" << c.total() << "; TP "
           << c.tp << " FP " << c.fp << " TN " << c.tn << " FN " << c.fn << ")\n";
  return kOk;
}

const std::map<std::string, int (*)(Context&)> kCommands{
    {"gen-data", cmd_gen_data}, {"train", cmd_train},       {"synth", cmd_synth},     {"fit-pose", cmd_fit_pose},
    {"screen", cmd_screen},     {"simulate", cmd_simulate}, {"compare", cmd_compare}, {"eval", cmd_eval}};

const std::map<std::string, const char*> kHelp{
    {"gen-data", "render a synthetic paired dataset"},
    {"train", "train CS-GAN on a dataset"},
    {"synth", "synthesize a visual tile from a thermal image"},
    {"fit-pose", "fit the depth/offset regressor and temperature compensation"},
    {"screen", "screen every frame pair of a dataset"},
    {"simulate", "run the deployment simulator for each scenario profile"},
    {"compare", "compare the first two scenario profiles over the seed list"},
    {"eval", "confusion matrix and accuracy from a record CSV"}};

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App cli{"csfuse: cross-spectral fever screening toolkit", "csfuse"};
  cli.require_subcommand(1, 1);
  Options opt;
  std::uint64_t seed = 0;
  std::vector<CLI::App*> subs;
  for (const auto& [name, help] : kHelp) {
    auto* s = cli.add_subcommand(name, help);
    s->add_option("--config", opt.config_path, "experiment config JSON");
    s->add_option("--seed", seed, "seed (overrides the config)");
    s->add_option("--out", opt.out, "output directory")->capture_default_str();
    s->add_option("--scale", opt.scale, "model scale")->check(CLI::IsMember({"test", "paper"}));
    s->add_flag("--allow-partial", opt.allow_partial, "tolerate unmatched files in paired directories");
    if (name == "synth" || name == "eval") s->add_option("--input", opt.input, "input file")->required();
    subs.push_back(s);
  }

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    cli.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return cli.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return cli.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    cli.exit(e, out, err);
    return kConfigError;
  }
  for (auto* s : subs) {
    if (s->parsed()) {
      opt.command = s->get_name();
      if (s->count("--seed")) opt.seed = seed;
    }
  }

  std::string text;
  if (!opt.config_path.empty()) {
    if (!fs::exists(opt.config_path)) throw ConfigError("config file not found: " + opt.config_path);
    text = io::read_file(opt.config_path);
  }
  ExperimentConfig cfg = parse_config(text, opt.scale);
  if (opt.seed) cfg.seed = *opt.seed;
  const fs::path outdir = opt.out;
  fs::create_directories(outdir);
  Context ctx{opt, cfg, outdir, out, err, RunLog(outdir, opt.command, cfg, config_json(cfg))};
  const int rc = kCommands.at(opt.command)(ctx);
  ctx.log.finish();
  return rc;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumericError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const ShapeError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace csfuse::app
