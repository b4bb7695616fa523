#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stsim/core.hpp"
#include "stsim/episode.hpp"
#include "stsim/gel_compliance.hpp"
#include "stsim/heightfield.hpp"
#include "stsim/tactile_render.hpp"

namespace stsim {

enum class ShapeKind { kSphere, kBox, kCapsule, kCylinder };

std::string to_string(ShapeKind kind);
ShapeKind shape_kind_from_string(const std::string& name);

/// Convex primitive in its body frame, centred at the origin. Capsules and
/// cylinders are aligned with the body z axis.
struct Shape {
  ShapeKind kind = ShapeKind::kSphere;
  Eigen::Vector3d half_extents = Eigen::Vector3d::Constant(0.02);  // box
  double radius = 0.02;                                             // sphere, capsule, cylinder
  double half_length = 0.02;  // capsule segment / cylinder half-height

  static Shape sphere(double radius);
  static Shape box(const Eigen::Vector3d& half_extents);
  static Shape capsule(double radius, double half_length);
  static Shape cylinder(double radius, double half_height);

  double bounding_radius() const;
  /// Principal moments for a solid body of the given mass.
  Eigen::Vector3d inertia_diagonal(double mass) const;
  /// Dimensions as stored in episode metadata.
  std::array<double, 3> dims() const;

  /// Parameter interval [t_in, t_out] of the line origin + t * dir (body
  /// frame) inside the shape, or nullopt when the line misses it.
  std::optional<std::pair<double, double>> line_interval(const Eigen::Vector3d& origin,
                                                         const Eigen::Vector3d& dir) const;
};

struct RigidBody {
  Shape shape;
  double mass = 0.1;
  Eigen::Vector3d inertia = Eigen::Vector3d::Constant(1e-5);  // body-frame principal moments
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d linear_velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d angular_velocity = Eigen::Vector3d::Zero();  // world frame
  Rgb color{0.8, 0.2, 0.2};
  double friction = 0.5;
  double restitution = 0.2;
  double linear_damping = 0.04;   // fraction of velocity lost per second
  double angular_damping = 0.04;

  /// Builds a body with analytic inertia for the shape.
  static RigidBody make(const Shape& shape, double mass);

  void validate() const;
  Eigen::Matrix3d world_inverse_inertia() const;
  PoseVector pose() const;
};

/// The gel surface: the plane z = 0 of the sensor frame, normal +z, limited to
/// the square |x|, |y| <= half_size.
struct SupportPlane {
  double friction = 0.5;
  double half_size = 0.075;
};

struct PhysicsParams {
  Eigen::Vector3d gravity{0.0, 0.0, -9.81};  // expressed in the sensor frame
  int solver_iterations = 40;
  double restitution_threshold = 0.05;  // m/s; slower impacts are inelastic
  double baumgarte = 0.2;
  double penetration_slop = 1e-5;
  double speculative_margin = 2e-3;
};

/// Coulomb coefficient used at a body/plane contact (geometric mean).
double contact_friction(const RigidBody& body, const SupportPlane& plane);

struct StepResult {
  RigidBody body;
  double normal_impulse = 0.0;          // summed over contact points, N s
  double max_friction_ratio = 0.0;      // max over points of |tangent impulse| / (mu * normal impulse)
  std::size_t contact_points = 0;
  bool energy_limited = false;          // dissipation guard rescaled the velocity
};

/// Mechanical energy: kinetic plus potential of the gravity field.
double mechanical_energy(const RigidBody& body, const Eigen::Vector3d& gravity);

/// One semi-implicit Euler step with impulse contact against the plane.
StepResult step(const RigidBody& body, const SupportPlane& plane, const PhysicsParams& physics,
                double dt, const Eigen::Vector3d& external_accel = Eigen::Vector3d::Zero());

enum class InclineOutcome { kStick, kSlide };

/// Coulomb threshold: stick iff mu >= tan(theta).
InclineOutcome incline_outcome(double mu, double theta);

struct SpeedSample {
  double linear = 0.0;
  double angular = 0.0;
};

inline constexpr double kRestLinearThreshold = 1e-3;
inline constexpr double kRestAngularThreshold = 1e-2;
inline constexpr std::size_t kRestWindow = 30;

/// True iff the last `window` samples are all below both thresholds.
bool detect_rest(std::span<const SpeedSample> history, double lin_thresh = kRestLinearThreshold,
                 double ang_thresh = kRestAngularThreshold, std::size_t window = kRestWindow);

struct Scenario {
  ScenarioKind kind = ScenarioKind::kFreefall;
  double incline_angle = 0.0;      // incline only
  double perturb_magnitude = 0.0;  // m/s^2, perturb only
  double perturb_direction = 0.0;  // rad
  double perturb_duration = 0.1;   // s
  double gravity = 9.81;
  std::uint64_t seed = 0;

  void validate() const;
  /// Gravity in the sensor frame. Inclines tilt the sensor about its y axis,
  /// so objects slide toward -x.
  Eigen::Vector3d gravity_vector() const;
  /// (magnitude, cos phi, sin phi) for perturb scenarios, empty otherwise.
  std::vector<float> condition() const;
};

struct SensorRig {
  double half_size = 0.075;
  std::size_t resolution = 64;
  SpringField springs;
  PhongParams phong = default_phong();
  DarkeningParams darkening;
  NormalMethod normal_method = NormalMethod::kCovariance;
  int normal_radius = kDefaultNormalRadius;
  Rgb background{0.0, 0.0, 0.0};
  double visual_range = 0.1;   // distance at which visual shading reaches its floor
  double visual_floor = 0.25;

  double pitch() const { return 2.0 * half_size / static_cast<double>(resolution); }
  /// Sensor-frame (x, y) of the centre of pixel (px, py). Row 0 is y = -half_size.
  Eigen::Vector2d pixel_center(std::size_t px, std::size_t py) const;
};

/// Lowest height of the body above each pixel along the sensor normal; +inf
/// where the body does not cover the pixel.
Grid<double> clearance_field(const RigidBody& body, const SensorRig& sensor);

struct VisualRender {
  RgbImage image;
  Mask mask;
};

/// Orthographic view through the transparent skin: body colour shaded by
/// distance to the sensor (touching = full brightness) over the background.
VisualRender render_visual(const RigidBody* body, const SensorRig& sensor);

struct TactileRender {
  TactileImage image;
  Mask contact;
  std::size_t clipped_pixels = 0;
  bool load_saturated = false;
};

/// Compliance solve for `normal_load` followed by shading of the indentation.
TactileRender render_tactile_frame(const RigidBody* body, double normal_load, const SensorRig& sensor);

struct EpisodeOptions {
  double dt = 1.0 / 240.0;
  std::size_t max_frames = 1200;   // physics steps
  std::size_t capture_stride = 8;  // physics steps between captured frames
  bool render = true;
  double rest_linear = kRestLinearThreshold;
  double rest_angular = kRestAngularThreshold;
  std::size_t rest_window = kRestWindow;
  PhysicsParams physics;
  double plane_friction = 0.5;
};

struct EpisodeDiagnostics {
  std::size_t steps = 0;
  std::size_t energy_violations = 0;   // steps where energy rose (no external drive)
  double worst_energy_increase = 0.0;  // relative
  std::size_t energy_limited_steps = 0;
  double max_friction_ratio = 0.0;
  std::size_t saturated_frames = 0;
};

struct EpisodeResult {
  EpisodeRecord record;
  EpisodeDiagnostics diagnostics;
};

/// Integrates the scenario until rest, fall-off or the step limit. Frames are
/// captured every `capture_stride` steps plus the terminal step.
/// Simulated incline outcome: the object came to rest within `tolerance`
/// meters (along the slope axis) of where it started.
InclineOutcome observed_incline_outcome(const EpisodeRecord& rec, double tolerance = 1e-3);

EpisodeResult run_episode(const Scenario& scenario, const RigidBody& body, const SensorRig& sensor,
                          const EpisodeOptions& options);

}  // namespace stsim
