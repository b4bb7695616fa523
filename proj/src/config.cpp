#include "stsim/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <functional>
#include <memory>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace stsim {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw InvalidInput("config key '" + key + "': '" + v + "' is not a number");
  }
}

std::size_t to_size(const std::string& key, const std::string& v) {
  if (v.empty() || !std::all_of(v.begin(), v.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw InvalidInput("config key '" + key + "': '" + v + "' is not a non-negative integer");
  }
  return std::stoull(v);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InvalidInput("config key '" + key + "': '" + v + "' is not a boolean");
}

using Setter = std::function<void(const std::string& key, const std::string& value)>;

void apply(const IniMap& ini, const std::map<std::string, Setter>& setters, const std::set<std::string>& sections) {
  for (const auto& [key, value] : ini) {
    const std::string section = key.substr(0, key.find('.'));
    if (!sections.count(section)) continue;
    auto it = setters.find(key);
    if (it == setters.end()) throw InvalidInput("unknown config key '" + key + "'");
    it->second(key, value);
  }
}

}  // namespace

IniMap read_ini(const fs::path& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ptree_error& e) {
    throw InvalidInput("cannot parse config " + path.string() + ": " + e.what());
  }
  IniMap out;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      out[section] = trim(body.data());
      continue;
    }
    for (const auto& [key, value] : body) out[section + "." + key] = trim(value.data());
  }
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(s)) out.push_back(to_size("list", item));
  return out;
}

ModalitySet parse_modalities(const std::string& s) {
  ModalitySet m = 0;
  for (const auto& item : split_list(s)) {
    if (item == "visual") m |= bit(Modality::kVisual);
    else if (item == "tactile") m |= bit(Modality::kTactile);
    else if (item == "pose") m |= bit(Modality::kPose);
    else if (item == "all") m |= kAllModalities;
    else throw InvalidInput("unknown modality '" + item + "'");
  }
  if (m == 0) throw InvalidInput("modality list is empty");
  return m;
}

std::string modalities_to_string(ModalitySet s) {
  std::string out;
  for (std::size_t i = 0; i < kModalityCount; ++i) {
    if (!has(s, static_cast<Modality>(i))) continue;
    if (!out.empty()) out += ',';
    out += to_string(static_cast<Modality>(i));
  }
  return out;
}

PairMode parse_pair_mode(const std::string& s) {
  if (s == "final_step") return PairMode::final_step();
  if (s == "fixed_step") return PairMode::fixed_step(1);
  const std::string prefix = "fixed_step:";
  if (s.rfind(prefix, 0) == 0) {
    const std::size_t k = to_size("mode", s.substr(prefix.size()));
    if (k == 0) throw InvalidInput("fixed_step stride must be >= 1");
    return PairMode::fixed_step(k);
  }
  throw InvalidInput("unknown pair mode '" + s + "' (final_step | fixed_step[:k])");
}

std::string to_string(PairMode mode) {
  return mode.kind == PairKind::kFinalStep ? "final_step" : "fixed_step:" + std::to_string(mode.k);
}

ScenarioConfig scenario_config_from_ini(const IniMap& ini) {
  auto kind_it = ini.find("scenario.kind");
  const ScenarioKind kind = kind_it == ini.end() ? ScenarioKind::kFreefall : scenario_kind_from_string(kind_it->second);
  ScenarioConfig c = ScenarioConfig::defaults(kind);
  auto d = [](double& field) { return [&field](const std::string& k, const std::string& v) { field = to_double(k, v); }; };
  auto z = [](std::size_t& field) { return [&field](const std::string& k, const std::string& v) { field = to_size(k, v); }; };

  std::map<std::string, Setter> s;
  s["scenario.kind"] = [](const std::string&, const std::string&) {};
  s["scenario.episodes"] = z(c.episodes);
  s["scenario.seed"] = [&c](const std::string& k, const std::string& v) { c.seed = to_size(k, v); };
  s["scenario.shapes"] = [&c](const std::string&, const std::string& v) {
    c.shapes.clear();
    for (const auto& item : split_list(v)) c.shapes.push_back(shape_kind_from_string(item));
  };
  s["scenario.size_min"] = d(c.size_min);
  s["scenario.size_max"] = d(c.size_max);
  s["scenario.box_height_ratio"] = d(c.box_height_ratio);
  s["scenario.cylinder_aspect"] = d(c.cylinder_aspect);
  s["scenario.capsule_aspect"] = d(c.capsule_aspect);
  s["scenario.mass_min"] = d(c.mass_min);
  s["scenario.mass_max"] = d(c.mass_max);
  s["scenario.friction_min"] = d(c.friction_min);
  s["scenario.friction_max"] = d(c.friction_max);
  s["scenario.restitution_min"] = d(c.restitution_min);
  s["scenario.restitution_max"] = d(c.restitution_max);
  s["scenario.spawn_height_min"] = d(c.spawn_height_min);
  s["scenario.spawn_height_max"] = d(c.spawn_height_max);
  s["scenario.spawn_xy_fraction"] = d(c.spawn_xy_fraction);
  s["scenario.lateral_speed_max"] = d(c.lateral_speed_max);
  s["scenario.incline_min"] = d(c.incline_min);
  s["scenario.incline_max"] = d(c.incline_max);
  s["scenario.incline_grid"] = z(c.incline_grid);
  s["scenario.grid_mu_min"] = d(c.grid_mu_min);
  s["scenario.grid_mu_max"] = d(c.grid_mu_max);
  s["scenario.grid_theta_min"] = d(c.grid_theta_min);
  s["scenario.grid_theta_max"] = d(c.grid_theta_max);
  s["scenario.perturb_min"] = d(c.perturb_min);
  s["scenario.perturb_max"] = d(c.perturb_max);
  s["scenario.perturb_duration"] = d(c.perturb_duration);

  s["sensor.half_size"] = d(c.sensor.half_size);
  s["sensor.resolution"] = z(c.sensor.resolution);
  s["sensor.gel_thickness"] = d(c.sensor.springs.gel_thickness);
  s["sensor.spring_stiffness"] = d(c.sensor.springs.stiffness);
  s["sensor.k_ambient"] = d(c.sensor.phong.k_ambient);
  s["sensor.k_diffuse"] = d(c.sensor.phong.k_diffuse);
  s["sensor.k_specular"] = d(c.sensor.phong.k_specular);
  s["sensor.shininess"] = d(c.sensor.phong.shininess);
  s["sensor.max_attenuation"] = d(c.sensor.darkening.max_attenuation);
  s["sensor.normal_method"] = [&c](const std::string& k, const std::string& v) {
    if (v == "covariance") c.sensor.normal_method = NormalMethod::kCovariance;
    else if (v == "gradient") c.sensor.normal_method = NormalMethod::kGradient;
    else throw InvalidInput("config key '" + k + "': unknown normal method '" + v + "'");
  };
  s["sensor.normal_radius"] = [&c](const std::string& k, const std::string& v) {
    c.sensor.normal_radius = static_cast<int>(to_size(k, v));
  };
  s["sensor.visual_range"] = d(c.sensor.visual_range);
  s["sensor.visual_floor"] = d(c.sensor.visual_floor);

  s["episode.dt"] = d(c.options.dt);
  s["episode.max_frames"] = z(c.options.max_frames);
  s["episode.capture_stride"] = z(c.options.capture_stride);
  s["episode.render"] = [&c](const std::string& k, const std::string& v) { c.options.render = to_bool(k, v); };
  s["episode.plane_friction"] = d(c.options.plane_friction);
  s["episode.rest_linear"] = d(c.options.rest_linear);
  s["episode.rest_angular"] = d(c.options.rest_angular);
  s["episode.rest_window"] = z(c.options.rest_window);
  s["episode.solver_iterations"] = [&c](const std::string& k, const std::string& v) {
    c.options.physics.solver_iterations = static_cast<int>(to_size(k, v));
  };

  apply(ini, s, {"scenario", "sensor", "episode"});
  c.validate();
  return c;
}

ScenarioConfig load_scenario_config(const fs::path& path) { return scenario_config_from_ini(read_ini(path)); }

TrainConfig train_config_from_ini(const IniMap& ini) {
  TrainConfig c;
  auto d = [](double& field) { return [&field](const std::string& k, const std::string& v) { field = to_double(k, v); }; };
  auto z = [](std::size_t& field) { return [&field](const std::string& k, const std::string& v) { field = to_size(k, v); }; };
  auto b = [](bool& field) { return [&field](const std::string& k, const std::string& v) { field = to_bool(k, v); }; };

  std::map<std::string, Setter> s;
  s["train.epochs"] = z(c.epochs);
  s["train.batch_size"] = z(c.batch_size);
  s["train.learning_rate"] = d(c.learning_rate);
  s["train.anneal_epochs"] = d(c.anneal_epochs);
  s["train.lambda_visual"] = d(c.lambda[0]);
  s["train.lambda_tactile"] = d(c.lambda[1]);
  s["train.lambda_pose"] = d(c.lambda[2]);
  s["train.seed"] = [&c](const std::string& k, const std::string& v) { c.seed = to_size(k, v); };
  s["train.latent_dim"] = z(c.latent_dim);
  s["train.hidden"] = [&c](const std::string&, const std::string& v) { c.hidden = parse_size_list(v); };
  s["train.mode"] = [&c](const std::string&, const std::string& v) { c.mode = parse_pair_mode(v); };
  s["train.conditioned"] = b(c.conditioned);
  s["train.modalities"] = [&c](const std::string&, const std::string& v) { c.modalities = parse_modalities(v); };
  s["train.image_side"] = z(c.image_side);
  s["train.train_fraction"] = d(c.train_fraction);
  s["train.crop"] = b(c.crop);
  s["train.crop_pad"] = z(c.crop_pad);

  apply(ini, s, {"train"});
  c.validate();
  return c;
}

TrainConfig load_train_config(const fs::path& path) { return train_config_from_ini(read_ini(path)); }

std::string sha256_hex(const std::string& bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw NumericalError("SHA-256 computation failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

std::string file_sha256(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

void write_manifest(const fs::path& path, const Manifest& m) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  for (const auto& [k, v] : m) out << k << " = " << v << '\n';
}

Manifest read_manifest(const fs::path& path) {
  const IniMap ini = read_ini(path);
  return Manifest(ini.begin(), ini.end());
}

}  // namespace stsim
