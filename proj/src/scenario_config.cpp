#include "stsim/scenario_config.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace stsim {

ScenarioConfig ScenarioConfig::defaults(ScenarioKind kind) {
  ScenarioConfig c;
  c.kind = kind;
  switch (kind) {
    case ScenarioKind::kFreefall:
      c.episodes = 200;
      c.shapes = {ShapeKind::kSphere, ShapeKind::kBox};
      break;
    case ScenarioKind::kIncline:
      c.episodes = 300;
      c.shapes = {ShapeKind::kBox, ShapeKind::kSphere};
      c.box_height_ratio = 0.25;
      c.friction_min = 0.2;
      c.friction_max = 1.0;
      c.incline_min = 0.05;
      break;
    case ScenarioKind::kPerturb:
      c.episodes = 300;
      c.shapes = {ShapeKind::kCylinder};
      c.cylinder_aspect = 3.0;
      c.size_min = 0.012;
      c.size_max = 0.016;
      break;
  }
  return c;
}

void ScenarioConfig::validate() const {
  if (shapes.empty()) throw InvalidInput("scenario config needs at least one shape");
  if (!(size_min > 0.0 && size_max >= size_min)) throw InvalidInput("invalid object size range");
  if (!(mass_min > 0.0 && mass_max >= mass_min)) throw InvalidInput("invalid mass range");
  if (!(friction_min >= 0.0 && friction_max >= friction_min)) throw InvalidInput("invalid friction range");
  if (!(restitution_min >= 0.0 && restitution_max >= restitution_min && restitution_max < 1.0)) {
    throw InvalidInput("invalid restitution range");
  }
  if (incline_min < 0.0 || incline_max > std::numbers::pi / 3.0 + 1e-12 || incline_max < incline_min) {
    throw InvalidInput("incline range must lie within [0, pi/3]");
  }
  if (perturb_min < 0.0 || perturb_max < perturb_min) throw InvalidInput("invalid perturbation range");
  if (sensor.resolution < 3) throw InvalidInput("sensor resolution must be >= 3");
  if (!(sensor.half_size > 0.0)) throw InvalidInput("sensor half-size must be positive");
}

std::uint64_t episode_seed(std::uint64_t base_seed, std::size_t index) {
  // splitmix64 finaliser
  std::uint64_t z = base_seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Rgb shape_color(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::kSphere: return {1.0, 0.0, 0.0};
    case ShapeKind::kBox: return {0.0, 0.0, 1.0};
    case ShapeKind::kCapsule: return {0.0, 1.0, 0.0};
    case ShapeKind::kCylinder: return {1.0, 1.0, 0.0};
  }
  return {1.0, 1.0, 1.0};
}

namespace {

double lerp(double a, double b, double t) { return a + (b - a) * t; }

Shape make_shape(const ScenarioConfig& cfg, ShapeKind kind, double size) {
  switch (kind) {
    case ShapeKind::kSphere: return Shape::sphere(size);
    case ShapeKind::kBox: return Shape::box({size, size, size * cfg.box_height_ratio});
    case ShapeKind::kCapsule: return Shape::capsule(size, size * cfg.capsule_aspect);
    case ShapeKind::kCylinder: return Shape::cylinder(size, size * cfg.cylinder_aspect);
  }
  return Shape::sphere(size);
}

// Distance from the centre of mass to the lowest point of the body.
double support_below(const RigidBody& b) {
  const Eigen::Matrix3d r = b.orientation.toRotationMatrix();
  const Shape& s = b.shape;
  const Eigen::Vector3d axis = r.col(2);
  switch (s.kind) {
    case ShapeKind::kSphere: return s.radius;
    case ShapeKind::kBox:
      return std::abs(r(2, 0)) * s.half_extents.x() + std::abs(r(2, 1)) * s.half_extents.y() +
             std::abs(r(2, 2)) * s.half_extents.z();
    case ShapeKind::kCapsule: return s.radius + s.half_length * std::abs(axis.z());
    case ShapeKind::kCylinder:
      return s.half_length * std::abs(axis.z()) + s.radius * std::sqrt(std::max(0.0, 1.0 - axis.z() * axis.z()));
  }
  return s.bounding_radius();
}

Eigen::Quaterniond uniform_rotation(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double u1 = u(rng);
  const double u2 = u(rng);
  const double u3 = u(rng);
  const double a = std::sqrt(1.0 - u1);
  const double b = std::sqrt(u1);
  const double t2 = 2.0 * std::numbers::pi * u2;
  const double t3 = 2.0 * std::numbers::pi * u3;
  Eigen::Quaterniond q(b * std::cos(t3), a * std::sin(t2), a * std::cos(t2), b * std::sin(t3));
  q.normalize();
  return q;
}

Eigen::Quaterniond yaw(double angle) { return Eigen::Quaterniond(Eigen::AngleAxisd(angle, Eigen::Vector3d::UnitZ())); }

}  // namespace

EpisodeSetup sample_episode(const ScenarioConfig& cfg, std::size_t index) {
  cfg.validate();
  EpisodeSetup setup;
  const std::uint64_t seed = episode_seed(cfg.seed, index);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lerp(lo, hi, u(rng)); };

  Scenario& sc = setup.scenario;
  sc.kind = cfg.kind;
  sc.seed = seed;
  sc.perturb_duration = cfg.perturb_duration;

  const bool grid = cfg.kind == ScenarioKind::kIncline && cfg.incline_grid > 0;
  ShapeKind kind = cfg.shapes[static_cast<std::size_t>(u(rng) * static_cast<double>(cfg.shapes.size())) %
                              cfg.shapes.size()];
  if (grid) kind = ShapeKind::kBox;
  const double size = uniform(cfg.size_min, cfg.size_max);
  const double mass = uniform(cfg.mass_min, cfg.mass_max);
  RigidBody body = RigidBody::make(make_shape(cfg, kind, size), mass);
  body.friction = uniform(cfg.friction_min, cfg.friction_max);
  body.restitution = uniform(cfg.restitution_min, cfg.restitution_max);
  body.color = shape_color(kind);
  setup.plane_friction = cfg.options.plane_friction;

  const double hs = cfg.sensor.half_size;
  switch (cfg.kind) {
    case ScenarioKind::kFreefall: {
      body.orientation = uniform_rotation(rng);
      const double span = cfg.spawn_xy_fraction * hs;
      body.position = {uniform(-span, span), uniform(-span, span), 0.0};
      body.position.z() = support_below(body) + uniform(cfg.spawn_height_min, cfg.spawn_height_max);
      if (cfg.lateral_speed_max > 0.0) {
        const double speed = uniform(0.0, cfg.lateral_speed_max);
        const double dir = uniform(0.0, 2.0 * std::numbers::pi);
        body.linear_velocity = {speed * std::cos(dir), speed * std::sin(dir), 0.0};
      }
      break;
    }
    case ScenarioKind::kIncline: {
      if (grid) {
        const std::size_t n = cfg.incline_grid;
        const std::size_t i = (index / n) % n;
        const std::size_t j = index % n;
        const double ti = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
        const double tj = n > 1 ? static_cast<double>(j) / static_cast<double>(n - 1) : 0.0;
        sc.incline_angle = lerp(cfg.grid_theta_min, cfg.grid_theta_max, ti);
        body.friction = lerp(cfg.grid_mu_min, cfg.grid_mu_max, tj);
        setup.plane_friction = body.friction;
      } else {
        sc.incline_angle = uniform(cfg.incline_min, cfg.incline_max);
      }
      Eigen::Quaterniond q = yaw(uniform(0.0, 2.0 * std::numbers::pi));
      if (kind == ShapeKind::kCapsule) {
        q = q * Eigen::Quaterniond(Eigen::AngleAxisd(std::numbers::pi / 2.0, Eigen::Vector3d::UnitX()));
      }
      body.orientation = q;
      body.position = {0.4 * hs, uniform(-0.2 * hs, 0.2 * hs), 0.0};
      body.position.z() = support_below(body);
      break;
    }
    case ScenarioKind::kPerturb: {
      sc.perturb_magnitude = uniform(cfg.perturb_min, cfg.perturb_max);
      sc.perturb_direction = uniform(0.0, 2.0 * std::numbers::pi);
      body.orientation = yaw(uniform(0.0, 2.0 * std::numbers::pi));
      body.position = {uniform(-0.1 * hs, 0.1 * hs), uniform(-0.1 * hs, 0.1 * hs), 0.0};
      body.position.z() = support_below(body);
      break;
    }
  }
  setup.body = body;
  return setup;
}

EpisodeResult simulate_episode(const ScenarioConfig& cfg, std::size_t index) {
  const EpisodeSetup setup = sample_episode(cfg, index);
  EpisodeOptions options = cfg.options;
  options.plane_friction = setup.plane_friction;
  return run_episode(setup.scenario, setup.body, cfg.sensor, options);
}

}  // namespace stsim
