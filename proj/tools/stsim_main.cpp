// stsim: dataset generation, training, evaluation and inspection.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <thread>

#include "stsim/config.hpp"
#include "stsim/evaluation.hpp"
#include "stsim/image_io.hpp"
#include "stsim/tensor_io.hpp"

namespace fs = std::filesystem;
using namespace stsim;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  std::string out;
};

fs::path output_dir(const Common& c, const std::string& command) {
  if (!c.out.empty()) return c.out;
  const char* env = std::getenv("STSIM_OUT");
  return fs::path(env && *env ? env : "stsim_out") / command;
}

// Creates `dir` and proves it is writable before any work starts.
void prepare_output(const fs::path& dir, bool must_be_empty) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw UsageError("cannot create output directory " + dir.string());
  if (must_be_empty && !fs::is_empty(dir)) throw UsageError("output directory is not empty: " + dir.string());
  const fs::path probe = dir / ".write_probe";
  {
    std::ofstream f(probe);
    if (!f || !(f << "x")) throw UsageError("output directory is not writable: " + dir.string());
  }
  fs::remove(probe);
}

void require_config(const std::string& path) {
  if (!path.empty() && !fs::is_regular_file(path)) throw UsageError("config file not found: " + path);
}

std::string config_hash(const std::string& path) { return path.empty() ? "defaults" : file_sha256(path); }

void copy_config(const std::string& path, const fs::path& dir) {
  if (!path.empty()) fs::copy_file(path, dir / "config.ini", fs::copy_options::overwrite_existing);
}

Manifest base_manifest(const std::string& command, const Common& c) {
  Manifest m;
  m["command"] = command;
  m["tool_version"] = kToolVersion;
  m["config"] = c.config.empty() ? "" : fs::absolute(c.config).string();
  m["config_sha256"] = config_hash(c.config);
  return m;
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::string scenario;
  std::optional<std::size_t> episodes;
  std::optional<std::size_t> resolution;
};

struct EpisodeSummary {
  bool resting = false, fell_off = false, unresolved = false;
  bool energy_violation = false;
  std::optional<InclineOutcome> observed, analytic;
  bool near_boundary = false;
};

int cmd_generate(const Common& c, const GenerateArgs& g) {
  require_config(c.config);
  ScenarioConfig cfg;
  if (!c.config.empty()) {
    cfg = load_scenario_config(c.config);
    if (!g.scenario.empty() && scenario_kind_from_string(g.scenario) != cfg.kind) {
      throw UsageError("--scenario disagrees with the config file");
    }
  } else {
    cfg = ScenarioConfig::defaults(scenario_kind_from_string(g.scenario.empty() ? "freefall" : g.scenario));
  }
  if (c.seed) cfg.seed = *c.seed;
  if (g.episodes) cfg.episodes = *g.episodes;
  if (g.resolution) cfg.sensor.resolution = *g.resolution;
  cfg.validate();
  if (c.workers < 1) throw UsageError("--workers must be >= 1");

  const fs::path root = output_dir(c, "generate");
  prepare_output(root, true);

  const std::size_t n = cfg.episodes;
  std::vector<EpisodeSummary> summary(n);
  std::vector<std::exception_ptr> errors(c.workers);
  auto work = [&](std::size_t w) {
    try {
      for (std::size_t i = w * n / c.workers; i < (w + 1) * n / c.workers; ++i) {
        const EpisodeSetup setup = sample_episode(cfg, i);
        EpisodeOptions options = cfg.options;
        options.plane_friction = setup.plane_friction;
        const EpisodeResult r = run_episode(setup.scenario, setup.body, cfg.sensor, options);
        // Physics-only sweeps have no frames worth storing.
        if (options.render) write_episode(r.record, root, i);
        EpisodeSummary& s = summary[i];
        s.resting = r.record.rest.resting;
        s.fell_off = r.record.rest.fell_off;
        s.unresolved = r.record.rest.unresolved;
        s.energy_violation = r.diagnostics.energy_violations > 0;
        // The Coulomb threshold describes sliding blocks; round shapes roll.
        if (cfg.kind == ScenarioKind::kIncline && setup.body.shape.kind == ShapeKind::kBox) {
          const double mu = contact_friction(setup.body, SupportPlane{setup.plane_friction, cfg.sensor.half_size});
          const double theta = setup.scenario.incline_angle;
          s.observed = observed_incline_outcome(r.record);
          s.analytic = incline_outcome(mu, theta);
          s.near_boundary = std::abs(mu - std::tan(theta)) < 0.02;
        }
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < c.workers; ++w) pool.emplace_back(work, w);
  work(0);
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  Manifest sm;
  std::size_t rest = 0, fell = 0, unres = 0, viol = 0;
  std::size_t stick = 0, slide = 0, a_stick = 0, compared = 0, agree = 0, band = 0;
  for (const EpisodeSummary& s : summary) {
    rest += s.resting;
    fell += s.fell_off;
    unres += s.unresolved;
    viol += s.energy_violation;
    if (!s.observed) continue;
    stick += *s.observed == InclineOutcome::kStick;
    slide += *s.observed == InclineOutcome::kSlide;
    a_stick += *s.analytic == InclineOutcome::kStick;
    if (s.near_boundary) {
      ++band;
      continue;
    }
    ++compared;
    agree += *s.observed == *s.analytic;
  }
  sm["scenario"] = to_string(cfg.kind);
  sm["episodes"] = std::to_string(n);
  sm["resting"] = std::to_string(rest);
  sm["fell_off"] = std::to_string(fell);
  sm["unresolved"] = std::to_string(unres);
  sm["energy_violation_episodes"] = std::to_string(viol);
  if (cfg.kind == ScenarioKind::kIncline) {
    sm["box_stick"] = std::to_string(stick);
    sm["box_slide"] = std::to_string(slide);
    sm["box_analytic_stick"] = std::to_string(a_stick);
    sm["box_boundary_band"] = std::to_string(band);
    sm["box_compared"] = std::to_string(compared);
    sm["box_agree"] = std::to_string(agree);
  }
  write_manifest(root / "summary", sm);

  Manifest m = base_manifest("generate", c);
  m["scenario"] = to_string(cfg.kind);
  m["seed"] = std::to_string(cfg.seed);
  m["episodes"] = std::to_string(n);
  m["resolution"] = std::to_string(cfg.sensor.resolution);
  m["workers"] = std::to_string(c.workers);
  m["episode_files"] = cfg.options.render ? "written" : "none (render = false)";
  write_manifest(root / "manifest", m);
  copy_config(c.config, root);

  for (const auto& [k, v] : sm) std::cout << k << " = " << v << '\n';
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string data;
  std::string resume;
  std::optional<std::size_t> epochs;
  std::string modalities;
  std::string mode;
  bool suite = false;
};

struct SuiteEntry {
  std::string dir;
  ModalitySet modalities;
  PairMode mode;
};

std::string row_slug(std::size_t row) {
  static const char* names[] = {"visual_only", "tactile_only", "mvae_pose", "mvae_no_pose"};
  return names[row];
}

std::vector<SuiteEntry> suite_entries() {
  std::vector<SuiteEntry> out;
  const auto rows = table_rows();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.push_back({row_slug(r) + "/final", rows[r].modalities, PairMode::final_step()});
    out.push_back({row_slug(r) + "/fixed", rows[r].modalities, PairMode::fixed_step(1)});
  }
  return out;
}

void write_ids(const fs::path& path, const std::vector<std::string>& ids) {
  std::ofstream f(path);
  for (const auto& id : ids) f << id << '\n';
  if (!f) throw std::runtime_error("cannot write " + path.string());
}

std::vector<std::string> read_ids(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::string> ids;
  for (std::string line; std::getline(f, line);) {
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

std::vector<EpochStats> read_curve_csv(const fs::path& path) {
  std::vector<EpochStats> curve;
  std::ifstream f(path);
  std::string line;
  if (!f || !std::getline(f, line)) return curve;
  while (std::getline(f, line)) {
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream is(line);
    EpochStats s;
    std::string fields[6];
    is >> s.epoch;
    for (auto& x : fields) is >> x;
    double* dst[] = {&s.beta, &s.train_loss, &s.val_loss, &s.val_visual_bce, &s.val_tactile_bce, &s.val_pose_mse};
    for (int i = 0; i < 6; ++i) *dst[i] = std::strtod(fields[i].c_str(), nullptr);
    curve.push_back(s);
  }
  return curve;
}

std::size_t condition_dim(const std::vector<EpisodeTensors>& eps, const TrainConfig& cfg) {
  if (!cfg.conditioned) return 0;
  const auto d = static_cast<std::size_t>(eps.front().condition.size());
  if (d == 0) throw UsageError("conditioned training needs perturbation episodes");
  return d;
}

void train_one(const Common& c, const TrainArgs& t, TrainConfig cfg, const fs::path& out,
               const std::optional<Checkpoint>& resume) {
  const fs::path data = t.data;
  const std::vector<std::string> ids = list_episodes(data);
  const Split sp = split(ids, cfg.train_fraction, cfg.seed);
  const auto train_set = load_prepared(data, sp.train, cfg);
  const auto val_set = load_prepared(data, sp.val, cfg);

  TrainState state = resume ? resume->state : initial_state(cfg, condition_dim(train_set, cfg));
  std::vector<EpochStats> curve;
  if (resume) curve = read_curve_csv(fs::path(t.resume) / "curve.csv");
  const auto fresh = train(state, train_set, val_set, cfg);
  curve.insert(curve.end(), fresh.begin(), fresh.end());

  fs::create_directories(out);
  Manifest extra = base_manifest("train", c);
  extra["data"] = fs::absolute(data).string();
  if (fs::exists(data / "manifest")) extra["data_manifest_sha256"] = file_sha256(data / "manifest");
  extra["train_episodes"] = std::to_string(sp.train.size());
  extra["val_episodes"] = std::to_string(sp.val.size());
  if (resume) extra["resumed_from"] = fs::absolute(t.resume).string();
  save_checkpoint(out, state, cfg, extra);
  write_curve_csv(out / "curve.csv", curve);
  write_ids(out / "train_ids", sp.train);
  write_ids(out / "val_ids", sp.val);
  if (!c.config.empty()) copy_config(c.config, out);

  const EpochStats& last = curve.back();
  std::printf("%s: epochs %zu  train %.6g  val %.6g\n", out.string().c_str(), last.epoch, last.train_loss,
              last.val_loss);
}

int cmd_train(const Common& c, const TrainArgs& args) {
  require_config(c.config);
  if (args.suite && !args.resume.empty()) throw UsageError("--suite and --resume are exclusive");

  TrainArgs t = args;
  std::optional<Checkpoint> resume;
  TrainConfig cfg;
  if (!t.resume.empty()) {
    if (!fs::exists(fs::path(t.resume) / "manifest")) throw UsageError("no checkpoint at " + t.resume);
    resume = load_checkpoint(t.resume);
    cfg = resume->config;
    // Default to the dataset the checkpoint was trained on.
    if (t.data.empty() && resume->manifest.count("data")) t.data = resume->manifest.at("data");
  } else if (!c.config.empty()) {
    cfg = load_train_config(c.config);
  }
  if (t.data.empty()) throw UsageError("--data is required");
  if (list_episodes(t.data).size() < 2) throw UsageError("dataset needs at least two episodes: " + t.data);
  if (c.seed) cfg.seed = *c.seed;
  if (t.epochs) cfg.epochs = *t.epochs;
  if (!t.modalities.empty()) cfg.modalities = parse_modalities(t.modalities);
  if (!t.mode.empty()) cfg.mode = parse_pair_mode(t.mode);
  cfg.validate();
  if (resume && (cfg.modalities != resume->config.modalities || cfg.mode.kind != resume->config.mode.kind || cfg.mode.k != resume->config.mode.k)) {
    throw UsageError("a resumed run cannot change modalities or pairing mode");
  }

  const fs::path out = output_dir(c, "train");
  prepare_output(out, true);
  if (!t.suite) {
    train_one(c, t, cfg, out, resume);
    return 0;
  }
  Manifest m = base_manifest("train-suite", c);
  m["seed"] = std::to_string(cfg.seed);
  m["data"] = fs::absolute(t.data).string();
  for (const SuiteEntry& e : suite_entries()) {
    TrainConfig row = cfg;
    row.modalities = e.modalities;
    row.mode = e.mode;
    train_one(c, t, row, out / e.dir, std::nullopt);
    m["model." + e.dir] = modalities_to_string(e.modalities) + " " + to_string(e.mode);
  }
  write_manifest(out / "manifest", m);
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string models;
  std::string data;
  std::size_t strips = 4;
  std::string multi = "rollout";
};

bool is_checkpoint(const fs::path& p) { return fs::exists(p / "model.tns") && fs::exists(p / "manifest"); }

std::string fmt_opt(const std::optional<double>& v) {
  if (!v) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", *v);
  return buf;
}

int cmd_eval(const Common& c, const EvalArgs& e) {
  const fs::path models = e.models;
  if (models.empty() || !fs::is_directory(models)) throw std::runtime_error("no checkpoint directory at " + e.models);
  const bool single = is_checkpoint(models);
  std::vector<std::pair<std::string, fs::path>> found;  // (suite entry, dir)
  if (single) {
    found.emplace_back("", models);
  } else {
    for (const SuiteEntry& s : suite_entries()) {
      if (is_checkpoint(models / s.dir)) found.emplace_back(s.dir, models / s.dir);
    }
  }
  if (found.empty()) throw std::runtime_error("no checkpoints under " + e.models);

  const fs::path out = output_dir(c, "eval");
  prepare_output(out, true);

  // Every model is scored on the validation split of the first checkpoint.
  const Checkpoint first = load_checkpoint(found.front().second);
  const fs::path data = e.data.empty() ? fs::path(first.manifest.at("data")) : fs::path(e.data);
  const std::vector<std::string> val_ids = read_ids(found.front().second / "val_ids");
  const std::vector<std::string> train_ids = read_ids(found.front().second / "train_ids");

  std::ofstream scores(out / "scores.csv");
  scores << "model,protocol,visual_bce,tactile_bce,pose_mse,pairs,prior_only\n";
  std::vector<TableRow> rows = table_rows();
  std::optional<Checkpoint> strip_model;
  std::vector<EpisodeTensors> strip_val;
  std::string scenario;

  for (const auto& [entry, dir] : found) {
    Checkpoint ck = load_checkpoint(dir);
    if (read_ids(dir / "val_ids") != val_ids) {
      std::cerr << "warning: " << dir.string() << " was trained on a different split\n";
    }
    const auto val = load_prepared(data, val_ids, ck.config);
    if (scenario.empty() && !val.empty()) scenario = to_string(val.front().kind);
    const bool fixed = ck.config.mode.kind == PairKind::kFixedStep;
    const Protocol protocol =
        !fixed ? Protocol::kFinalStep : (e.multi == "stride" ? Protocol::kStride : Protocol::kRollout);
    const EvalScores s = evaluate(ck.state.model, val, protocol, fixed ? ck.config.mode.k : 1);
    scores << (entry.empty() ? dir.filename().string() : entry) << ',' << (fixed ? e.multi : "final_step") << ','
           << fmt_opt(s.visual_bce) << ',' << fmt_opt(s.tactile_bce) << ',' << fmt_opt(s.pose_mse) << ','
           << s.pairs << ',' << s.prior_only << '\n';

    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].modalities != ck.config.modalities) continue;
      (fixed ? rows[r].visual_multi : rows[r].visual_final) = s.visual_bce;
      (fixed ? rows[r].tactile_multi : rows[r].tactile_final) = s.tactile_bce;
    }
    const bool preferred = !fixed && ck.config.modalities == kAllModalities;
    if (!fixed && (!strip_model || preferred)) {
      strip_val = val;
      strip_model = std::move(ck);
    }
  }
  if (single) {
    std::erase_if(rows, [&](const TableRow& r) { return r.modalities != first.config.modalities; });
  }

  MetricsTable table{scenario, rows};
  {
    std::ofstream f(out / "metrics.csv");
    f << table.csv();
    std::ofstream t(out / "metrics.txt");
    t << table.text();
  }
  std::cout << table.text();

  {
    const TrainConfig& cfg = first.config;
    const auto train_set = load_prepared(data, train_ids, cfg);
    const auto val = load_prepared(data, val_ids, cfg);
    std::ofstream b(out / "baselines.csv");
    b << "baseline,visual_bce,tactile_bce\n";
    b << "dataset_mean_final_frame," << mean_image_bce(train_set, val, Modality::kVisual) << ','
      << mean_image_bce(train_set, val, Modality::kTactile) << '\n';
  }

  std::size_t written = 0;
  if (strip_model && e.strips > 0) {
    fs::create_directories(out / "strips");
    for (std::size_t i = 0; i < strip_val.size() && written < e.strips; ++i, ++written) {
      const RgbImage strip = prediction_strip(strip_model->state.model, strip_val[i], 0);
      write_png(out / "strips" / ("strip_" + strip_val[i].id + ".png"), strip);
    }
  }

  Manifest m = base_manifest("eval", c);
  m["models"] = fs::absolute(models).string();
  m["data"] = fs::absolute(data).string();
  m["val_episodes"] = std::to_string(val_ids.size());
  m["strips"] = std::to_string(written);
  m["multi_step"] = e.multi;
  m["seed"] = first.manifest.count("seed") ? first.manifest.at("seed") : "";
  write_manifest(out / "manifest", m);
  return 0;
}

// ---------------------------------------------------------------- inspect

int cmd_inspect(const std::string& target) {
  const fs::path p = target;
  if (!fs::exists(p)) throw std::runtime_error("nothing at " + target);
  if (fs::exists(p / "meta") && fs::exists(p / "frames.tns")) {
    const EpisodeRecord rec = read_episode(p);
    std::ifstream meta(p / "meta");
    std::cout << meta.rdbuf();
    std::size_t touching = 0;
    for (const Frame& f : rec.frames) touching += f.contact_active;
    std::cout << "# frames in contact: " << touching << " of " << rec.frames.size() << '\n';
    return 0;
  }
  if (is_checkpoint(p)) {
    const Checkpoint ck = load_checkpoint(p);
    for (const auto& [k, v] : ck.manifest) std::cout << k << " = " << v << '\n';
    const auto curve = read_curve_csv(p / "curve.csv");
    if (!curve.empty()) {
      std::printf("# last epoch %zu: train %.6g val %.6g\n", curve.back().epoch, curve.back().train_loss,
                  curve.back().val_loss);
    }
    return 0;
  }
  const auto ids = list_episodes(p);
  std::cout << "episodes = " << ids.size() << '\n';
  for (const char* name : {"summary", "manifest"}) {
    if (!fs::exists(p / name)) continue;
    std::cout << "# " << name << '\n';
    for (const auto& [k, v] : read_manifest(p / name)) std::cout << k << " = " << v << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------- render-demo

int cmd_render_demo(const Common& c) {
  require_config(c.config);
  const ScenarioConfig cfg = c.config.empty() ? ScenarioConfig::defaults(ScenarioKind::kFreefall)
                                              : load_scenario_config(c.config);
  const fs::path out = output_dir(c, "render-demo");
  prepare_output(out, true);

  const double g = 9.81;
  const std::pair<const char*, Shape> shapes[] = {
      {"sphere", Shape::sphere(0.015)},
      {"box", Shape::box({0.015, 0.01, 0.008})},
      {"capsule", Shape::capsule(0.008, 0.015)},
      {"cylinder", Shape::cylinder(0.012, 0.02)},
  };
  for (const auto& [name, shape] : shapes) {
    RigidBody body = RigidBody::make(shape, 0.1);
    body.color = shape_color(shape.kind);
    double lift = 0.0;
    switch (shape.kind) {
      case ShapeKind::kSphere: lift = shape.radius; break;
      case ShapeKind::kBox: lift = shape.half_extents.z(); break;
      case ShapeKind::kCapsule:
        body.orientation = Eigen::AngleAxisd(std::numbers::pi / 2.0, Eigen::Vector3d::UnitX());
        lift = shape.radius;
        break;
      case ShapeKind::kCylinder: lift = shape.half_length; break;
    }
    body.position = {0.0, 0.0, lift};
    const VisualRender vis = render_visual(&body, cfg.sensor);
    const TactileRender tac = render_tactile_frame(&body, body.mass * g, cfg.sensor);
    write_png(out / (std::string(name) + "_visual.png"), vis.image);
    write_png(out / (std::string(name) + "_tactile.png"), tac.image);
    write_png(out / (std::string(name) + "_contact.png"), tac.contact);
  }
  write_png(out / "flat_tactile.png",
            render_flat(cfg.sensor.resolution, cfg.sensor.resolution, cfg.sensor.phong));
  Manifest m = base_manifest("render-demo", c);
  m["resolution"] = std::to_string(cfg.sensor.resolution);
  write_manifest(out / "manifest", m);
  std::cout << "wrote " << out.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------- gradcheck

int cmd_gradcheck(const Common& c, std::size_t samples) {
  ModelConfig mc;
  mc.image_side = 4;
  mc.latent_dim = 4;
  mc.hidden = {16, 8};
  mc.seed = c.seed.value_or(1);
  MvaeModel model(mc);
  Rng rng(mc.seed + 101);
  const Eigen::Index B = 3;
  Batch batch;
  for (std::size_t i = 0; i < kModalityCount; ++i) {
    const auto d = static_cast<Eigen::Index>(mc.modality_dim(static_cast<Modality>(i)));
    batch.input[i] = Eigen::MatrixXd(d, B);
    batch.target[i] = Eigen::MatrixXd(d, B);
    for (Eigen::Index k = 0; k < d * B; ++k) {
      batch.input[i](k) = rng.uniform();
      batch.target[i](k) = rng.uniform();
    }
  }
  batch.available = {kAllModalities, bit(Modality::kVisual) | bit(Modality::kPose), bit(Modality::kTactile)};
  batch.condition = Eigen::MatrixXd(0, B);
  const Eigen::MatrixXd noise = sample_noise(rng, mc.latent_dim, static_cast<std::size_t>(B));
  const GradCheckResult r = gradient_check(model, batch, 0.5, noise, samples, 1e-5, mc.seed);
  std::printf("parameters %zu  checked %zu  max relative error %.3e (index %zu)\n", model.parameter_count(),
              r.checked, r.max_relative_error, r.worst_index);
  return r.max_relative_error < 1e-4 ? 0 : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Visuotactile sensor simulator and multimodal VAE"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "INI configuration file");
    sub->add_option("--seed", common.seed, "Override the configured seed");
    sub->add_option("--workers", common.workers, "Worker threads (generation only)")->check(CLI::PositiveNumber);
    sub->add_option("--out", common.out, "Output directory (default: $STSIM_OUT/<command>)");
  };

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Simulate episodes into a dataset directory");
  add_common(generate);
  generate->add_option("--scenario", gen.scenario, "freefall | incline | perturb (without --config)");
  generate->add_option("--episodes", gen.episodes, "Override the episode count");
  generate->add_option("--resolution", gen.resolution, "Override the sensor resolution");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model, or the full comparison suite");
  add_common(train_cmd);
  train_cmd->add_option("--data", tr.data, "Dataset directory");
  train_cmd->add_option("--resume", tr.resume, "Checkpoint to continue from");
  train_cmd->add_option("--epochs", tr.epochs, "Override the epoch count");
  train_cmd->add_option("--modalities", tr.modalities, "e.g. visual,tactile,pose or all");
  train_cmd->add_option("--mode", tr.mode, "final_step | fixed_step[:k]");
  train_cmd->add_flag("--suite", tr.suite, "Train every table row as final-step and fixed-step models");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Score checkpoints on the validation split");
  add_common(eval);
  eval->add_option("--models", ev.models, "Checkpoint or suite directory")->required();
  eval->add_option("--data", ev.data, "Dataset directory (default: from the checkpoint)");
  eval->add_option("--strips", ev.strips, "Number of prediction strips to write");
  eval->add_option("--multi-step", ev.multi, "Fixed-step protocol: rollout (recursive) or stride (single step)")
      ->check(CLI::IsMember({"rollout", "stride"}));

  std::string target;
  auto* inspect = app.add_subcommand("inspect", "Print an episode, dataset or checkpoint summary");
  inspect->add_option("path", target, "Episode, dataset or checkpoint directory")->required();

  auto* demo = app.add_subcommand("render-demo", "Render each primitive resting on the gel");
  add_common(demo);

  std::size_t samples = 200;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the model gradient");
  add_common(gradcheck);
  gradcheck->add_option("--samples", samples, "Parameters to check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*generate) return cmd_generate(common, gen);
    if (*train_cmd) return cmd_train(common, tr);
    if (*eval) return cmd_eval(common, ev);
    if (*inspect) return cmd_inspect(target);
    if (*demo) return cmd_render_demo(common);
    if (*gradcheck) return cmd_gradcheck(common, samples);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
