#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stsim/rigid_scene.hpp"

namespace stsim {

/// Sampling ranges and physics/render settings for one data-collection
/// scenario. Angles are in radians.
struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::kFreefall;
  std::size_t episodes = 200;
  std::uint64_t seed = 1;

  std::vector<ShapeKind> shapes{ShapeKind::kSphere, ShapeKind::kBox};
  double size_min = 0.012;  // characteristic half-size, meters
  double size_max = 0.02;
  double box_height_ratio = 0.5;     // box half-height / half-width
  double cylinder_aspect = 1.5;      // cylinder half-height / radius
  double capsule_aspect = 1.5;       // capsule half-segment / radius
  double mass_min = 0.05;
  double mass_max = 0.15;
  double friction_min = 0.4;
  double friction_max = 0.8;
  double restitution_min = 0.1;
  double restitution_max = 0.3;

  // freefall
  double spawn_height_min = 0.01;  // gap between the lowest body point and the gel
  double spawn_height_max = 0.05;
  double spawn_xy_fraction = 0.3;  // of the sensor half-size
  double lateral_speed_max = 0.0;

  // incline
  double incline_min = 0.0;
  double incline_max = 1.0471975511965976;
  std::size_t incline_grid = 0;  // > 0: sweep an n x n (mu, theta) grid instead of sampling
  double grid_mu_min = 0.05;
  double grid_mu_max = 1.5;
  double grid_theta_min = 0.03;
  double grid_theta_max = 1.0471975511965976;

  // perturb
  double perturb_min = 2.0;   // m/s^2
  double perturb_max = 12.0;
  double perturb_duration = 0.1;

  SensorRig sensor;
  EpisodeOptions options;

  static ScenarioConfig defaults(ScenarioKind kind);
  void validate() const;
};

struct EpisodeSetup {
  Scenario scenario;
  RigidBody body;
  double plane_friction = 0.5;
};

/// Deterministic per-episode seed derived from the config seed.
std::uint64_t episode_seed(std::uint64_t base_seed, std::size_t index);

/// Draws the scenario and initial body state for episode `index`.
EpisodeSetup sample_episode(const ScenarioConfig& cfg, std::size_t index);

/// Samples and runs episode `index` with the config's sensor and options.
EpisodeResult simulate_episode(const ScenarioConfig& cfg, std::size_t index);

/// Palette colour used for a shape in the visual channel.
Rgb shape_color(ShapeKind kind);

}  // namespace stsim
