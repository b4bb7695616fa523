// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Criteria 8-10 drive the stsim command-line tool.
//
//   stsim_acceptance <work_dir> [criterion ...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stsim/config.hpp"
#include "stsim/evaluation.hpp"
#include "stsim/gel_compliance.hpp"
#include "stsim/heightfield.hpp"
#include "stsim/scenario_config.hpp"
#include "stsim/tactile_render.hpp"

namespace fs = std::filesystem;
using namespace stsim;

namespace {

fs::path g_work;
const fs::path kCli = STSIM_CLI_PATH;
const fs::path kConfigs = fs::path(STSIM_SOURCE_DIR) / "configs";

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

void run_cli(const std::string& args) {
  const std::string cmd = kCli.string() + " " + args + " > /dev/null";
  if (std::system(cmd.c_str()) != 0) throw std::runtime_error("command failed: " + cmd);
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream f(p);
  if (!f) throw std::runtime_error("missing " + p.string());
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(f, line);) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

HeightMap from_function(std::size_t w, std::size_t h, double pitch, auto f, double thickness) {
  Grid<double> g(w, h);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) g(x, y) = f(x * pitch, y * pitch);
  return clip_depth(g, pitch, thickness);
}

double angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

// ------------------------------------------------------------------------

Outcome renderer() {
  PhongParams p;  // published constants
  p.lights = {LightSource{{0, 0, 1}, {1, 1, 1}, {1, 1, 1}}};
  const HeightMap flat{Grid<double>(8, 8, 0.0)};
  const TactileImage img = render_tactile(flat, normals_from_gradient(flat), p, DarkeningParams{});
  bool head_on = true;
  for (float v : img.values()) head_on = head_on && v == 1.0f;

  PhongParams q = p;
  q.lights[0].direction = Eigen::Vector3d(0.6, 0, 0.8);
  q.k_ambient = 0.0;
  q.k_diffuse = 0.5;
  q.k_specular = 0.5;
  q.view = Eigen::AngleAxisd(std::acos(0.8), Eigen::Vector3d::UnitY()) * reflect(q.lights[0].direction, {0, 0, 1});
  double err = 0.0;
  for (double v : phong_pixel({0, 0, 1}, q)) err = std::max(err, std::abs(v - 0.56384));
  return {head_on && err < 1e-9,
          std::string("head-on clamps to 1.0: ") + (head_on ? "yes" : "no") + fmt(", oblique |err| = %.2e", err)};
}

Outcome normals() {
  const double pitch = 2e-4, radius = 0.02, press = 0.003;
  const std::size_t n = 128;
  const double c = 0.5 * pitch * (n - 1);
  const HeightMap h = from_function(
      n, n, pitch,
      [&](double x, double y) {
        const double r2 = (x - c) * (x - c) + (y - c) * (y - c);
        return r2 < radius * radius ? std::max(0.0, press - radius + std::sqrt(radius * radius - r2)) : 0.0;
      },
      kDefaultGelThickness);
  const int r = kDefaultNormalRadius;
  const NormalField cov = normals_from_covariance(h, r);
  const double rim = std::sqrt(radius * radius - (radius - press) * (radius - press));
  double worst = 0.0;
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      const double dx = x * pitch - c, dy = y * pitch - c;
      if (std::hypot(dx, dy) + (r + 1) * pitch * std::sqrt(2.0) >= rim) continue;
      const Eigen::Vector3d truth(dx, dy, std::sqrt(radius * radius - dx * dx - dy * dy));
      worst = std::max(worst, angle(cov.normals(x, y), truth.normalized()));
    }

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double affine = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const double a = u(rng), b = u(rng);
    const HeightMap f = from_function(11, 9, 1e-3, [&](double x, double y) { return 2.0 + a * x + b * y; }, 10.0);
    const NormalField g = normals_from_gradient(f), cv = normals_from_covariance(f, 2);
    for (std::size_t y = 1; y + 1 < 9; ++y)
      for (std::size_t x = 1; x + 1 < 11; ++x) affine = std::max(affine, angle(g.normals(x, y), cv.normals(x, y)));
  }
  const double deg = worst * 180.0 / std::numbers::pi;
  return {deg < 2.0 && affine < 1e-4, fmt("sphere cap max error %.3f deg, affine disagreement %.2e rad", deg, affine)};
}

Outcome compliance() {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> gap(-0.001, 0.004), load(0.01, 2.0);
  std::bernoulli_distribution absent(0.2);
  double worst = 0.0;
  std::size_t cases = 0;
  while (cases < 100) {
    Grid<double> clearance(16, 12);
    for (auto& v : clearance.values()) v = absent(rng) ? std::numeric_limits<double>::infinity() : gap(rng);
    clearance(8, 6) = 0.0;
    SpringField k;
    k.stiffness = 200.0 + 100.0 * static_cast<double>(cases % 9);
    const double w = load(rng);
    ContactSolution s;
    try {
      s = solve_equilibrium(clearance, w, k);
    } catch (const SaturationError&) {
      continue;
    }
    if (s.clipped_pixels > 0) continue;  // clipped springs are outside the balance law
    double f = 0.0;
    for (double v : s.force.values()) f += v;
    worst = std::max(worst, std::abs(f - w) / w);
    ++cases;
  }

  Grid<double> flat(20, 20, std::numeric_limits<double>::infinity());
  std::size_t n = 0;
  for (std::size_t y = 4; y < 14; ++y)
    for (std::size_t x = 3; x < 15; ++x, ++n) flat(x, y) = 0.0;
  SpringField k;
  const double w = 0.3;
  const ContactSolution s = solve_equilibrium(flat, w, k);
  double dev = 0.0;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    if (flat[i] == 0.0) dev = std::max(dev, std::abs(s.depth.depth[i] - w / (n * k.stiffness)) / (w / (n * k.stiffness)));
  }
  return {worst < 1e-6 && dev < 1e-6,
          fmt("max relative force residual %.2e over 100 cases, flat indenter depth deviation %.2e", worst, dev)};
}

Outcome incline() {
  ScenarioConfig cfg = load_scenario_config(kConfigs / "incline_grid.ini");
  const std::size_t n = cfg.incline_grid * cfg.incline_grid;
  std::size_t compared = 0, agree = 0, band = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const EpisodeSetup setup = sample_episode(cfg, i);
    EpisodeOptions options = cfg.options;
    options.plane_friction = setup.plane_friction;
    const EpisodeResult r = run_episode(setup.scenario, setup.body, cfg.sensor, options);
    const double mu = contact_friction(setup.body, SupportPlane{setup.plane_friction, cfg.sensor.half_size});
    const double theta = setup.scenario.incline_angle;
    if (std::abs(mu - std::tan(theta)) < 0.02) {
      ++band;
      continue;
    }
    ++compared;
    agree += observed_incline_outcome(r.record) == incline_outcome(mu, theta);
  }
  return {compared > 0 && agree == compared,
          fmt("%.0f/%.0f grid cells agree with the Coulomb oracle (%.0f in the excluded band)", double(agree),
              double(compared), double(band))};
}

Outcome energy() {
  ScenarioConfig cfg = ScenarioConfig::defaults(ScenarioKind::kFreefall);
  cfg.options.render = false;
  const std::size_t n = 1000;
  std::size_t violating = 0, resting = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const EpisodeResult r = simulate_episode(cfg, i);
    violating += r.diagnostics.energy_violations > 0;
    resting += r.record.rest.resting;
  }
  return {violating == 0 && resting >= 990,
          fmt("%.0f episodes with an energy increase, %.0f/1000 reached rest", double(violating), double(resting))};
}

Outcome poe() {
  auto belief = [](double m, double v) {
    GaussianBelief b;
    b.mean = Eigen::VectorXd::Constant(1, m);
    b.var = Eigen::VectorXd::Constant(1, v);
    return b;
  };
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> mu(-3, 3), var(0.2, 3.0);
  std::uniform_int_distribution<int> count(1, 3);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<GaussianBelief> experts;
    for (int k = count(rng); k > 0; --k) experts.push_back(belief(mu(rng), var(rng)));
    const GaussianBelief f = poe_fuse(experts, 1);
    const int n = 200001;
    const double lo = -12, dx = 24.0 / (n - 1);
    double z = 0, m1 = 0, m2 = 0;
    for (int i = 0; i < n; ++i) {
      const double x = lo + i * dx;
      double logp = -0.5 * x * x;
      for (const auto& e : experts) logp -= 0.5 * (x - e.mean[0]) * (x - e.mean[0]) / e.var[0];
      const double p = std::exp(logp);
      z += p;
      m1 += p * x;
      m2 += p * x * x;
    }
    const double mean = m1 / z;
    worst = std::max({worst, std::abs(mean - f.mean[0]), std::abs(m2 / z - mean * mean - f.var[0])});
  }
  const GaussianBelief one = poe_fuse({belief(2, 1)}, 1);
  const GaussianBelief two = poe_fuse({belief(2, 1), belief(4, 1)}, 1);
  const double exact = std::max({std::abs(one.mean[0] - 1), std::abs(one.var[0] - 0.5), std::abs(two.mean[0] - 2),
                                 std::abs(two.var[0] - 1.0 / 3.0)});
  return {worst < 1e-6 && exact < 1e-12, fmt("quadrature max deviation %.2e, analytic examples %.2e", worst, exact)};
}

Outcome gradient() {
  ModelConfig c;
  c.image_side = 4;
  c.latent_dim = 4;
  c.hidden = {16, 8};
  c.condition_dim = 3;
  c.seed = 1;
  const MvaeModel model(c);
  const std::size_t B = 6;
  Rng rng(11);
  Batch b;
  for (std::size_t i = 0; i < kModalityCount; ++i) {
    const auto d = static_cast<Eigen::Index>(c.modality_dim(static_cast<Modality>(i)));
    b.input[i] = Eigen::MatrixXd(d, B);
    b.target[i] = Eigen::MatrixXd(d, B);
    for (Eigen::Index k = 0; k < b.input[i].size(); ++k) {
      b.input[i](k) = rng.uniform();
      b.target[i](k) = rng.uniform();
    }
  }
  for (std::size_t j = 0; j < B; ++j) b.available.push_back(j % 2 ? kAllModalities : bit(Modality::kVisual) | bit(Modality::kPose));
  b.condition = Eigen::MatrixXd(3, B);
  for (Eigen::Index k = 0; k < b.condition.size(); ++k) b.condition(k) = rng.uniform();
  const Eigen::MatrixXd noise = sample_noise(rng, c.latent_dim, B);
  const GradCheckResult r = gradient_check(model, b, 0.5, noise, 200, 1e-5, 7);
  const bool ok = model.parameter_count() <= 5000 && r.checked >= 200 && r.max_relative_error < 1e-4;
  return {ok, fmt("%.0f parameters, %.0f checked, max relative error %.2e", double(model.parameter_count()),
                  double(r.checked), r.max_relative_error)};
}

// The seeded two-shape toy dataset shared by criteria 8 and 9.
fs::path toy_data() {
  const fs::path data = g_work / "toy";
  if (!fs::exists(data / "manifest")) {
    fs::remove_all(data);
    run_cli("generate --config " + (kConfigs / "toy_data.ini").string() + " --out " + data.string());
  }
  return data;
}

Outcome learning() {
  const fs::path data = toy_data(), dir = g_work / "learning";
  fs::remove_all(dir);
  run_cli("train --config " + (kConfigs / "toy_train.ini").string() + " --data " + data.string() + " --out " +
          dir.string());
  const auto curve = read_csv(dir / "curve.csv");
  std::size_t col = 0;
  while (col < curve[0].size() && curve[0][col] != "val_visual_bce") ++col;
  if (col == curve[0].size()) throw std::runtime_error("curve.csv has no val_visual_bce column");
  const double first = std::stod(curve[1][col]), last = std::stod(curve.back()[col]);

  const Checkpoint ck = load_checkpoint(dir);
  auto ids = [&](const char* name) {
    std::vector<std::string> v;
    std::ifstream f(dir / name);
    for (std::string s; f >> s;) v.push_back(s);
    return v;
  };
  const auto train_set = load_prepared(data, ids("train_ids"), ck.config);
  const auto val_set = load_prepared(data, ids("val_ids"), ck.config);
  const EvalScores cross = evaluate(ck.state.model, val_set, Protocol::kFinalStep, 1, bit(Modality::kVisual));
  const double baseline = mean_image_bce(train_set, val_set, Modality::kTactile);
  const bool ok = last < 0.5 * first && cross.tactile_bce && *cross.tactile_bce < baseline;
  return {ok, fmt("val visual BCE %.4f -> %.4f (ratio %.3f)", first, last, last / first) +
                  fmt("; visual->tactile BCE %.4f vs mean-image baseline %.4f", cross.tactile_bce.value_or(NAN),
                      baseline)};
}

Outcome table() {
  const fs::path data = toy_data();
  fs::remove_all(g_work / "suite");
  fs::remove_all(g_work / "eval");
  run_cli("train --suite --config " + (kConfigs / "toy_train.ini").string() + " --data " + data.string() + " --out " +
          (g_work / "suite").string());
  run_cli("eval --models " + (g_work / "suite").string() + " --out " + (g_work / "eval").string());
  const auto rows = read_csv(g_work / "eval" / "metrics.csv");
  bool shape = rows.size() == 5 && rows[0].size() == 6;
  for (const auto& r : rows) shape = shape && r.size() == 6;
  if (!shape) return {false, "freefall metrics table is not 4 rows x 4 metric columns"};
  auto cell = [&](const std::string& model, std::size_t col) {
    for (const auto& r : rows)
      if (r[1] == model) return std::stod(r[col]);
    throw std::runtime_error("no row " + model);
  };
  const double mm_tac = cell("MVAE w/ pose", 5), uni_tac = cell("VAE-tactile only", 5);
  const double vis_final = cell("MVAE w/ pose", 3), vis_multi = cell("MVAE w/ pose", 2);

  // The other two scenarios only need the table emitted in full.
  std::string others;
  bool emitted = true;
  for (const char* kind : {"incline", "perturb"}) {
    const fs::path data = g_work / (std::string("table_") + kind), models = data.string() + "_suite",
                   out = data.string() + "_eval";
    for (const auto& p : {data, models, out}) fs::remove_all(p);
    std::ofstream(g_work / "tiny_train.ini") << "[train]\nepochs = 2\nhidden = 16, 8\nimage_side = 8\nconditioned = "
                                              << (std::string(kind) == "perturb" ? "true" : "false") << "\n";
    run_cli(std::string("generate --scenario ") + kind + " --episodes 12 --resolution 16 --seed 5 --out " + data.string());
    run_cli("train --suite --config " + (g_work / "tiny_train.ini").string() + " --data " + data.string() + " --out " +
            models.string());
    run_cli("eval --models " + models.string() + " --strips 0 --out " + out.string());
    const auto t = read_csv(out / "metrics.csv");
    const bool full = t.size() == 5 && t[1].size() == 6 && t[1][0] == kind;
    emitted = emitted && full;
    others += std::string(", ") + kind + (full ? " table ok" : " table malformed");
  }
  const bool ok = emitted && mm_tac <= 1.05 * uni_tac && vis_final <= vis_multi;
  return {ok, fmt("MVAE tactile final %.4f vs 1.05 x unimodal %.4f; visual final %.4f vs multi-step %.4f", mm_tac,
                  1.05 * uni_tac, vis_final, vis_multi) +
                  others};
}

Outcome determinism() {
  const fs::path a = g_work / "det_a", b = g_work / "det_b";
  for (const auto& p : {a, b}) fs::remove_all(p);
  fs::create_directories(a);
  fs::create_directories(b);
  const std::string gen = "generate --scenario perturb --episodes 16 --resolution 16 --seed 9 --out ";
  run_cli(gen + (a / "data").string() + " --workers 1");
  run_cli(gen + (b / "data").string() + " --workers 2");

  std::size_t files = 0, differing = 0;
  for (const auto& e : fs::recursive_directory_iterator(a / "data")) {
    if (!e.is_regular_file() || e.path().parent_path() == a / "data") continue;  // episode files only
    ++files;
    const fs::path other = b / "data" / fs::relative(e.path(), a / "data");
    differing += !fs::exists(other) || slurp(e.path()) != slurp(other);
  }

  std::ofstream(g_work / "det_train.ini") << "[train]\nepochs = 3\nhidden = 24, 12\nimage_side = 8\nconditioned = true\n";
  for (const auto& p : {a, b}) {
    run_cli("train --config " + (g_work / "det_train.ini").string() + " --data " + (p / "data").string() + " --out " +
            (p / "model").string());
  }
  const bool curves = slurp(a / "model" / "curve.csv") == slurp(b / "model" / "curve.csv") &&
                      !slurp(a / "model" / "curve.csv").empty();
  const bool weights = slurp(a / "model" / "model.tns") == slurp(b / "model" / "model.tns");
  return {files > 0 && differing == 0 && curves && weights,
          fmt("%.0f episode files compared, %.0f differ; loss curves ", double(files), double(differing)) +
              (curves ? "identical" : "differ") + (weights ? ", weights identical" : ", weights differ")};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: stsim_acceptance <work_dir> [criterion ...]\n";
    return 2;
  }
  g_work = fs::absolute(argv[1]);
  fs::create_directories(g_work);
  std::set<int> only;
  for (int i = 2; i < argc; ++i) only.insert(std::stoi(argv[i]));

  const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
      {"renderer correctness", renderer},  {"normal estimation", normals},   {"compliance balance", compliance},
      {"incline stick/slip", incline},     {"energy dissipation", energy},  {"PoE oracle", poe},
      {"gradient check", gradient},        {"learning signal", learning},   {"table structure", table},
      {"determinism", determinism}};

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed ? 1 : 0;
}
