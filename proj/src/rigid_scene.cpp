#include "stsim/rigid_scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace stsim {

std::string to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::kSphere: return "sphere";
    case ShapeKind::kBox: return "box";
    case ShapeKind::kCapsule: return "capsule";
    case ShapeKind::kCylinder: return "cylinder";
  }
  return "sphere";
}

ShapeKind shape_kind_from_string(const std::string& name) {
  if (name == "sphere") return ShapeKind::kSphere;
  if (name == "box") return ShapeKind::kBox;
  if (name == "capsule") return ShapeKind::kCapsule;
  if (name == "cylinder") return ShapeKind::kCylinder;
  throw InvalidInput("unknown shape '" + name + "'");
}

// ---------------------------------------------------------------------------
// Shapes

Shape Shape::sphere(double radius) {
  Shape s;
  s.kind = ShapeKind::kSphere;
  s.radius = radius;
  return s;
}

Shape Shape::box(const Eigen::Vector3d& half_extents) {
  Shape s;
  s.kind = ShapeKind::kBox;
  s.half_extents = half_extents;
  return s;
}

Shape Shape::capsule(double radius, double half_length) {
  Shape s;
  s.kind = ShapeKind::kCapsule;
  s.radius = radius;
  s.half_length = half_length;
  return s;
}

Shape Shape::cylinder(double radius, double half_height) {
  Shape s;
  s.kind = ShapeKind::kCylinder;
  s.radius = radius;
  s.half_length = half_height;
  return s;
}

double Shape::bounding_radius() const {
  switch (kind) {
    case ShapeKind::kSphere: return radius;
    case ShapeKind::kBox: return half_extents.norm();
    case ShapeKind::kCapsule: return radius + half_length;
    case ShapeKind::kCylinder: return std::hypot(radius, half_length);
  }
  return radius;
}

Eigen::Vector3d Shape::inertia_diagonal(double mass) const {
  switch (kind) {
    case ShapeKind::kSphere: return Eigen::Vector3d::Constant(0.4 * mass * radius * radius);
    case ShapeKind::kBox: {
      const Eigen::Vector3d d = 2.0 * half_extents;
      return Eigen::Vector3d(d.y() * d.y() + d.z() * d.z(), d.x() * d.x() + d.z() * d.z(),
                             d.x() * d.x() + d.y() * d.y()) *
             (mass / 12.0);
    }
    case ShapeKind::kCylinder: {
      const double h = 2.0 * half_length;
      const double r2 = radius * radius;
      const double axial = 0.5 * mass * r2;
      const double lateral = mass * (3.0 * r2 + h * h) / 12.0;
      return {lateral, lateral, axial};
    }
    case ShapeKind::kCapsule: {
      const double h = 2.0 * half_length;
      const double r = radius;
      const double v_cyl = std::numbers::pi * r * r * h;
      const double v_sph = 4.0 / 3.0 * std::numbers::pi * r * r * r;
      const double m_cyl = mass * v_cyl / (v_cyl + v_sph);
      const double m_sph = mass - m_cyl;
      const double axial = 0.5 * m_cyl * r * r + 0.4 * m_sph * r * r;
      const double lateral = m_cyl * (r * r / 4.0 + h * h / 12.0) +
                             m_sph * (0.4 * r * r + h * h / 4.0 + 3.0 * h * r / 8.0);
      return {lateral, lateral, axial};
    }
  }
  return Eigen::Vector3d::Ones();
}

std::array<double, 3> Shape::dims() const {
  switch (kind) {
    case ShapeKind::kSphere: return {radius, 0.0, 0.0};
    case ShapeKind::kBox: return {half_extents.x(), half_extents.y(), half_extents.z()};
    case ShapeKind::kCapsule:
    case ShapeKind::kCylinder: return {radius, half_length, 0.0};
  }
  return {0.0, 0.0, 0.0};
}

namespace {

using Interval = std::optional<std::pair<double, double>>;

Interval sphere_interval(const Eigen::Vector3d& o, const Eigen::Vector3d& d, double r) {
  const double a = d.squaredNorm();
  const double b = o.dot(d);
  const double c = o.squaredNorm() - r * r;
  const double disc = b * b - a * c;
  if (disc < 0.0) return std::nullopt;
  const double s = std::sqrt(disc);
  return std::make_pair((-b - s) / a, (-b + s) / a);
}

// Slab |coordinate(axis)| <= h.
Interval slab_interval(double o, double d, double h) {
  if (d == 0.0) {
    if (std::abs(o) > h) return std::nullopt;
    return std::make_pair(-std::numeric_limits<double>::infinity(),
                          std::numeric_limits<double>::infinity());
  }
  double t0 = (-h - o) / d;
  double t1 = (h - o) / d;
  if (t0 > t1) std::swap(t0, t1);
  return std::make_pair(t0, t1);
}

// Infinite cylinder x^2 + y^2 <= r^2 about the body z axis.
Interval infinite_cylinder_interval(const Eigen::Vector3d& o, const Eigen::Vector3d& d, double r) {
  const double a = d.x() * d.x() + d.y() * d.y();
  const double c = o.x() * o.x() + o.y() * o.y() - r * r;
  if (a < 1e-18) {
    if (c > 0.0) return std::nullopt;
    return std::make_pair(-std::numeric_limits<double>::infinity(),
                          std::numeric_limits<double>::infinity());
  }
  const double b = o.x() * d.x() + o.y() * d.y();
  const double disc = b * b - a * c;
  if (disc < 0.0) return std::nullopt;
  const double s = std::sqrt(disc);
  return std::make_pair((-b - s) / a, (-b + s) / a);
}

Interval intersect(Interval a, Interval b) {
  if (!a || !b) return std::nullopt;
  const double lo = std::max(a->first, b->first);
  const double hi = std::min(a->second, b->second);
  if (lo > hi) return std::nullopt;
  return std::make_pair(lo, hi);
}

Interval unite(Interval a, Interval b) {
  if (!a) return b;
  if (!b) return a;
  return std::make_pair(std::min(a->first, b->first), std::max(a->second, b->second));
}

}  // namespace

std::optional<std::pair<double, double>> Shape::line_interval(const Eigen::Vector3d& o,
                                                              const Eigen::Vector3d& d) const {
  switch (kind) {
    case ShapeKind::kSphere: return sphere_interval(o, d, radius);
    case ShapeKind::kBox: {
      Interval acc = slab_interval(o.x(), d.x(), half_extents.x());
      acc = intersect(acc, slab_interval(o.y(), d.y(), half_extents.y()));
      return intersect(acc, slab_interval(o.z(), d.z(), half_extents.z()));
    }
    case ShapeKind::kCylinder:
      return intersect(infinite_cylinder_interval(o, d, radius), slab_interval(o.z(), d.z(), half_length));
    case ShapeKind::kCapsule: {
      // Convex union of the finite core cylinder and the two end spheres.
      const Eigen::Vector3d axis(0.0, 0.0, half_length);
      Interval core = intersect(infinite_cylinder_interval(o, d, radius), slab_interval(o.z(), d.z(), half_length));
      core = unite(core, sphere_interval(o - axis, d, radius));
      return unite(core, sphere_interval(o + axis, d, radius));
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Bodies

RigidBody RigidBody::make(const Shape& shape, double mass) {
  RigidBody b;
  b.shape = shape;
  b.mass = mass;
  b.inertia = shape.inertia_diagonal(mass);
  return b;
}

void RigidBody::validate() const {
  if (!(mass > 0.0)) throw InvalidInput("body mass must be positive");
  if (!(inertia.minCoeff() > 0.0)) throw InvalidInput("body inertia must be positive");
  if (std::abs(orientation.norm() - 1.0) > 1e-9) throw InvalidInput("body orientation must be a unit quaternion");
  if (!(restitution >= 0.0 && restitution < 1.0)) throw InvalidInput("restitution must lie in [0, 1)");
  if (!(friction >= 0.0)) throw InvalidInput("friction must be non-negative");
}

Eigen::Matrix3d RigidBody::world_inverse_inertia() const {
  const Eigen::Matrix3d r = orientation.toRotationMatrix();
  return r * inertia.cwiseInverse().asDiagonal() * r.transpose();
}

PoseVector RigidBody::pose() const {
  return {static_cast<float>(position.x()), static_cast<float>(position.y()),
          static_cast<float>(position.z()), static_cast<float>(orientation.w()),
          static_cast<float>(orientation.x()), static_cast<float>(orientation.y()),
          static_cast<float>(orientation.z())};
}

double contact_friction(const RigidBody& body, const SupportPlane& plane) {
  return std::sqrt(body.friction * plane.friction);
}

double mechanical_energy(const RigidBody& body, const Eigen::Vector3d& gravity) {
  const Eigen::Matrix3d r = body.orientation.toRotationMatrix();
  const Eigen::Vector3d w_body = r.transpose() * body.angular_velocity;
  const double rot = 0.5 * w_body.dot(body.inertia.cwiseProduct(w_body));
  const double lin = 0.5 * body.mass * body.linear_velocity.squaredNorm();
  return lin + rot - body.mass * gravity.dot(body.position);
}

namespace {

// Body-frame points that can touch a plane below the body.
std::vector<Eigen::Vector3d> contact_candidates(const RigidBody& body) {
  std::vector<Eigen::Vector3d> pts;
  const Shape& s = body.shape;
  const Eigen::Vector3d down_body = body.orientation.conjugate() * Eigen::Vector3d(0.0, 0.0, -1.0);
  switch (s.kind) {
    case ShapeKind::kSphere:
      pts.push_back(s.radius * down_body);
      break;
    case ShapeKind::kBox:
      for (int i = 0; i < 8; ++i) {
        pts.emplace_back((i & 1 ? 1.0 : -1.0) * s.half_extents.x(), (i & 2 ? 1.0 : -1.0) * s.half_extents.y(),
                         (i & 4 ? 1.0 : -1.0) * s.half_extents.z());
      }
      break;
    case ShapeKind::kCapsule:
      pts.push_back(Eigen::Vector3d(0.0, 0.0, s.half_length) + s.radius * down_body);
      pts.push_back(Eigen::Vector3d(0.0, 0.0, -s.half_length) + s.radius * down_body);
      break;
    case ShapeKind::kCylinder: {
      constexpr int kRim = 12;
      const Eigen::Vector2d radial(down_body.x(), down_body.y());
      for (double cap : {-s.half_length, s.half_length}) {
        for (int k = 0; k < kRim; ++k) {
          const double a = 2.0 * std::numbers::pi * k / kRim;
          pts.emplace_back(s.radius * std::cos(a), s.radius * std::sin(a), cap);
        }
        if (radial.norm() > 1e-9) {
          const Eigen::Vector2d u = radial.normalized() * s.radius;
          pts.emplace_back(u.x(), u.y(), cap);
        }
      }
      break;
    }
  }
  return pts;
}

struct ContactPoint {
  Eigen::Vector3d r;  // from centre of mass, world frame
  double gap = 0.0;
  double target = 0.0;  // desired post-solve normal velocity lower bound
  Eigen::Vector3d ang_n, ang_t1, ang_t2;  // I^-1 (r x axis)
  Eigen::Vector3d rxn, rxt1, rxt2;
  double mass_n = 0.0, mass_t1 = 0.0, mass_t2 = 0.0;  // inverse effective masses
  double lambda_n = 0.0, lambda_t1 = 0.0, lambda_t2 = 0.0;
};

bool finite_state(const RigidBody& b) {
  return b.position.allFinite() && b.linear_velocity.allFinite() && b.angular_velocity.allFinite() &&
         b.orientation.coeffs().allFinite();
}

// Exact rotation by omega * dt: keeps the body-frame angular velocity fixed.
void integrate_orientation(RigidBody& b, double dt) {
  const double speed = b.angular_velocity.norm();
  if (speed > 0.0) {
    const Eigen::Quaterniond dq(Eigen::AngleAxisd(speed * dt, b.angular_velocity / speed));
    b.orientation = dq * b.orientation;
  }
  b.orientation.normalize();
}

double lowest_supported_point(const RigidBody& b, const std::vector<Eigen::Vector3d>& local,
                              const SupportPlane& plane) {
  double lowest = std::numeric_limits<double>::infinity();
  for (const Eigen::Vector3d& p : local) {
    const Eigen::Vector3d w = b.position + b.orientation * p;
    if (std::abs(w.x()) > plane.half_size || std::abs(w.y()) > plane.half_size) continue;
    lowest = std::min(lowest, w.z());
  }
  return lowest;
}

}  // namespace

StepResult step(const RigidBody& body, const SupportPlane& plane, const PhysicsParams& physics,
                double dt, const Eigen::Vector3d& external_accel) {
  if (!(dt > 0.0 && dt <= 0.01)) throw InvalidInput("time step must lie in (0, 0.01]");
  body.validate();
  if (!finite_state(body)) throw NumericalError("step rejected: body state is not finite");

  const Eigen::Vector3d& g = physics.gravity;
  const bool driven = external_accel.squaredNorm() > 0.0;
  const double energy_before = mechanical_energy(body, g);
  const double mu = contact_friction(body, plane);

  StepResult out;
  RigidBody b = body;
  const Eigen::Vector3d v_start = body.linear_velocity;
  const Eigen::Vector3d w_start = body.angular_velocity;
  b.linear_velocity += (g + external_accel) * dt;
  b.linear_velocity *= std::pow(1.0 - b.linear_damping, dt);
  b.angular_velocity *= std::pow(1.0 - b.angular_damping, dt);

  const Eigen::Matrix3d inv_inertia = b.world_inverse_inertia();
  const double inv_mass = 1.0 / b.mass;
  const Eigen::Vector3d n = Eigen::Vector3d::UnitZ();
  const Eigen::Vector3d t1 = Eigen::Vector3d::UnitX();
  const Eigen::Vector3d t2 = Eigen::Vector3d::UnitY();

  const std::vector<Eigen::Vector3d> local = contact_candidates(b);
  std::vector<ContactPoint> contacts;
  for (const Eigen::Vector3d& p : local) {
    const Eigen::Vector3d r = b.orientation * p;
    const Eigen::Vector3d w = b.position + r;
    if (std::abs(w.x()) > plane.half_size || std::abs(w.y()) > plane.half_size) continue;
    const Eigen::Vector3d vp = b.linear_velocity + b.angular_velocity.cross(r);
    if (w.z() > physics.speculative_margin + vp.norm() * dt) continue;
    ContactPoint c;
    c.r = r;
    c.gap = w.z();
    c.rxn = r.cross(n);
    c.rxt1 = r.cross(t1);
    c.rxt2 = r.cross(t2);
    c.ang_n = inv_inertia * c.rxn;
    c.ang_t1 = inv_inertia * c.rxt1;
    c.ang_t2 = inv_inertia * c.rxt2;
    c.mass_n = inv_mass + c.rxn.dot(c.ang_n);
    c.mass_t1 = inv_mass + c.rxt1.dot(c.ang_t1);
    c.mass_t2 = inv_mass + c.rxt2.dot(c.ang_t2);
    // Approach speed is measured before this step's gravity kick, and the
    // rebound is reduced by that kick so a bounce never gains energy.
    const double vn = vp.dot(n);
    const double vn_start = (v_start + w_start.cross(r)).dot(n);
    const bool impact = vn_start < -physics.restitution_threshold && c.gap + vn * dt < 0.0;
    c.target = c.gap > 0.0 ? -c.gap / dt : 0.0;
    if (impact && b.restitution > 0.0) {
      c.target = std::max(c.target, -b.restitution * vn_start + (g + external_accel).dot(n) * dt);
    }
    contacts.push_back(c);
  }

  auto apply = [&](const Eigen::Vector3d& dir, const Eigen::Vector3d& ang, double impulse) {
    b.linear_velocity += (impulse * inv_mass) * dir;
    b.angular_velocity += impulse * ang;
  };
  auto velocity_along = [&](const ContactPoint& c, const Eigen::Vector3d& dir) {
    return (b.linear_velocity + b.angular_velocity.cross(c.r)).dot(dir);
  };

  for (int it = 0; it < physics.solver_iterations && !contacts.empty(); ++it) {
    for (ContactPoint& c : contacts) {
      const double vn = velocity_along(c, n);
      const double next = std::max(c.lambda_n + (c.target - vn) / c.mass_n, 0.0);
      apply(n, c.ang_n, next - c.lambda_n);
      c.lambda_n = next;

      // Friction, one tangent axis at a time, keeping the accumulated
      // tangential impulse inside the disc of radius mu * lambda_n.
      const double limit = mu * c.lambda_n;
      {
        const double bound = std::sqrt(std::max(limit * limit - c.lambda_t2 * c.lambda_t2, 0.0));
        const double want = c.lambda_t1 - velocity_along(c, t1) / c.mass_t1;
        const double next_t = std::clamp(want, -bound, bound);
        apply(t1, c.ang_t1, next_t - c.lambda_t1);
        c.lambda_t1 = next_t;
      }
      {
        const double bound = std::sqrt(std::max(limit * limit - c.lambda_t1 * c.lambda_t1, 0.0));
        const double want = c.lambda_t2 - velocity_along(c, t2) / c.mass_t2;
        const double next_t = std::clamp(want, -bound, bound);
        apply(t2, c.ang_t2, next_t - c.lambda_t2);
        c.lambda_t2 = next_t;
      }
    }
  }

  for (const ContactPoint& c : contacts) {
    out.normal_impulse += c.lambda_n;
    const double tangent = std::hypot(c.lambda_t1, c.lambda_t2);
    if (tangent > 0.0) {
      const double ratio = c.lambda_n > 0.0 && mu > 0.0 ? tangent / (mu * c.lambda_n)
                                                        : std::numeric_limits<double>::infinity();
      out.max_friction_ratio = std::max(out.max_friction_ratio, ratio);
    }
  }
  out.contact_points = contacts.size();

  // Energy guard: without an external drive the step may not raise the
  // mechanical energy. Velocities are scaled back (and the drift recomputed)
  // until it does not; s = 0 leaves the body in place with no kinetic energy,
  // which always satisfies the bound.
  const RigidBody solved = b;
  auto advance = [&](double s) {
    RigidBody r = solved;
    r.linear_velocity *= s;
    r.angular_velocity *= s;
    r.position += r.linear_velocity * dt;
    integrate_orientation(r, dt);
    return r;
  };
  b = advance(1.0);
  if (!driven && mechanical_energy(b, g) > energy_before) {
    double lo = 0.0;
    double hi = 1.0;
    for (int i = 0; i < 60; ++i) {
      const double mid = 0.5 * (lo + hi);
      (mechanical_energy(advance(mid), g) > energy_before ? hi : lo) = mid;
    }
    b = advance(lo);
    out.energy_limited = true;
  }

  // Positional correction of residual penetration. Without an external drive
  // the lift may only spend energy the step has already dissipated.
  const double lowest = lowest_supported_point(b, local, plane);
  const double pen = -lowest - physics.penetration_slop;
  if (std::isfinite(lowest) && pen > 0.0) {
    double lift = physics.baumgarte * pen;
    const double g_normal = -g.dot(n);
    if (!driven && g_normal > 0.0) {
      const double budget = energy_before - mechanical_energy(b, g);
      lift = std::min(lift, std::max(budget, 0.0) / (b.mass * g_normal));
    }
    b.position += lift * n;
  }

  if (!finite_state(b)) {
    std::ostringstream os;
    os << "step rejected: non-finite state (position " << b.position.transpose() << ", velocity "
       << b.linear_velocity.transpose() << ")";
    throw NumericalError(os.str());
  }
  out.body = b;
  return out;
}

InclineOutcome incline_outcome(double mu, double theta) {
  if (mu < 0.0 || theta < 0.0 || theta >= std::numbers::pi / 2.0) {
    throw InvalidInput("incline_outcome requires mu >= 0 and theta in [0, pi/2)");
  }
  return mu >= std::tan(theta) ? InclineOutcome::kStick : InclineOutcome::kSlide;
}

bool detect_rest(std::span<const SpeedSample> history, double lin_thresh, double ang_thresh,
                 std::size_t window) {
  if (window < 1) throw InvalidInput("rest window must be >= 1");
  if (history.size() < window) return false;
  return std::all_of(history.end() - static_cast<std::ptrdiff_t>(window), history.end(),
                     [&](const SpeedSample& s) { return s.linear < lin_thresh && s.angular < ang_thresh; });
}

// ---------------------------------------------------------------------------
// Scenarios and sensor views

void Scenario::validate() const {
  if (incline_angle < 0.0 || incline_angle > std::numbers::pi / 3.0 + 1e-12) {
    throw InvalidInput("incline angle must lie in [0, pi/3]");
  }
  if (perturb_magnitude < 0.0 || perturb_duration < 0.0) {
    throw InvalidInput("perturbation magnitude and duration must be non-negative");
  }
  if (!(gravity > 0.0)) throw InvalidInput("gravity must be positive");
}

Eigen::Vector3d Scenario::gravity_vector() const {
  if (kind == ScenarioKind::kIncline) {
    return {-gravity * std::sin(incline_angle), 0.0, -gravity * std::cos(incline_angle)};
  }
  return {0.0, 0.0, -gravity};
}

std::vector<float> Scenario::condition() const {
  if (kind != ScenarioKind::kPerturb) return {};
  return {static_cast<float>(perturb_magnitude), static_cast<float>(std::cos(perturb_direction)),
          static_cast<float>(std::sin(perturb_direction))};
}

Eigen::Vector2d SensorRig::pixel_center(std::size_t px, std::size_t py) const {
  const double p = pitch();
  return {-half_size + (static_cast<double>(px) + 0.5) * p, -half_size + (static_cast<double>(py) + 0.5) * p};
}

Grid<double> clearance_field(const RigidBody& body, const SensorRig& sensor) {
  const std::size_t n = sensor.resolution;
  Grid<double> out(n, n, std::numeric_limits<double>::infinity());
  const Eigen::Quaterniond inv = body.orientation.conjugate();
  const Eigen::Vector3d dir = inv * Eigen::Vector3d::UnitZ();
  const double reach = body.shape.bounding_radius();
  for (std::size_t py = 0; py < n; ++py) {
    for (std::size_t px = 0; px < n; ++px) {
      const Eigen::Vector2d c = sensor.pixel_center(px, py);
      if (std::hypot(c.x() - body.position.x(), c.y() - body.position.y()) > reach) continue;
      const Eigen::Vector3d origin = inv * (Eigen::Vector3d(c.x(), c.y(), 0.0) - body.position);
      const auto hit = body.shape.line_interval(origin, dir);
      if (hit) out(px, py) = hit->first;
    }
  }
  return out;
}

VisualRender render_visual(const RigidBody* body, const SensorRig& sensor) {
  const std::size_t n = sensor.resolution;
  VisualRender out{RgbImage(n, n), Mask(n, n)};
  for (std::size_t py = 0; py < n; ++py) {
    for (std::size_t px = 0; px < n; ++px) {
      out.image.set_pixel(px, py, static_cast<float>(sensor.background[0]),
                          static_cast<float>(sensor.background[1]), static_cast<float>(sensor.background[2]));
    }
  }
  if (body == nullptr) return out;
  const Grid<double> clearance = clearance_field(*body, sensor);
  for (std::size_t py = 0; py < n; ++py) {
    for (std::size_t px = 0; px < n; ++px) {
      const double c = clearance(px, py);
      if (!std::isfinite(c)) continue;
      const double shade = std::clamp(1.0 - std::max(c, 0.0) / sensor.visual_range, sensor.visual_floor, 1.0);
      out.image.set_pixel(px, py, static_cast<float>(body->color[0] * shade),
                          static_cast<float>(body->color[1] * shade), static_cast<float>(body->color[2] * shade));
      out.mask(px, py) = 1;
    }
  }
  return out;
}

TactileRender render_tactile_frame(const RigidBody* body, double normal_load, const SensorRig& sensor) {
  const std::size_t n = sensor.resolution;
  TactileRender out;
  if (body == nullptr || !(normal_load > 0.0)) {
    out.image = render_flat(n, n, sensor.phong);
    out.contact = Mask(n, n);
    return out;
  }
  SpringField springs = sensor.springs;
  springs.pitch = sensor.pitch();
  const Grid<double> clearance = clearance_field(*body, sensor);
  ContactSolution sol;
  try {
    sol = solve_equilibrium(clearance, normal_load, springs);
  } catch (const SaturationError& e) {
    out.load_saturated = true;
    sol = solve_equilibrium(clearance, e.max_supportable_load * (1.0 - 1e-9), springs);
  }
  out.clipped_pixels = sol.clipped_pixels;
  const NormalField normals = sensor.normal_method == NormalMethod::kCovariance
                                  ? normals_from_covariance(sol.depth, sensor.normal_radius)
                                  : normals_from_gradient(sol.depth);
  out.image = render_tactile(sol.depth, normals, sensor.phong, sensor.darkening);
  out.contact = contact_mask(sol, 0.0);
  return out;
}

// ---------------------------------------------------------------------------
// Episodes

namespace {

bool any_set(const Mask& m) {
  return std::any_of(m.values().begin(), m.values().end(), [](unsigned char v) { return v != 0; });
}

}  // namespace

EpisodeResult run_episode(const Scenario& scenario, const RigidBody& body, const SensorRig& sensor,
                          const EpisodeOptions& options) {
  scenario.validate();
  body.validate();
  if (options.capture_stride < 1) throw InvalidInput("capture stride must be >= 1");
  if (options.max_frames < 1) throw InvalidInput("max_frames must be >= 1");

  PhysicsParams physics = options.physics;
  physics.gravity = scenario.gravity_vector();
  const SupportPlane plane{options.plane_friction, sensor.half_size};
  const double dt = options.dt;
  const double normal_gravity = -physics.gravity.z();

  EpisodeResult result;
  EpisodeRecord& rec = result.record;
  EpisodeMeta& meta = rec.meta;
  meta.kind = scenario.kind;
  meta.seed = scenario.seed;
  meta.gravity = scenario.gravity;
  meta.incline_angle = scenario.incline_angle;
  meta.perturb_magnitude = scenario.perturb_magnitude;
  meta.perturb_direction = scenario.perturb_direction;
  meta.shape = to_string(body.shape.kind);
  meta.shape_dims = body.shape.dims();
  meta.mass = body.mass;
  meta.friction = body.friction;
  meta.restitution = body.restitution;
  meta.color = {body.color[0], body.color[1], body.color[2]};
  meta.sensor_half_size = sensor.half_size;
  meta.resolution = static_cast<std::uint32_t>(sensor.resolution);
  meta.dt = dt;
  meta.capture_stride = static_cast<std::uint32_t>(options.capture_stride);
  rec.condition = scenario.condition();

  auto capture = [&](const RigidBody& b, std::size_t step_index, double load, bool absent) {
    Frame f;
    f.step = static_cast<std::uint32_t>(step_index);
    f.pose = b.pose();
    if (options.render) {
      const RigidBody* shown = absent ? nullptr : &b;
      VisualRender v = render_visual(shown, sensor);
      TactileRender t = render_tactile_frame(shown, load, sensor);
      if (t.load_saturated) ++result.diagnostics.saturated_frames;
      f.visual = std::move(v.image);
      f.visual_mask = std::move(v.mask);
      f.tactile = std::move(t.image);
      f.contact = std::move(t.contact);
      f.contact_active = any_set(f.contact);
    } else {
      f.contact_active = !absent && load > 0.0;
    }
    rec.frames.push_back(std::move(f));
  };

  RigidBody b = body;
  // Bodies spawned in contact start loaded by their weight.
  const Grid<double> initial_clearance = clearance_field(b, sensor);
  double min_clearance = std::numeric_limits<double>::infinity();
  for (double c : initial_clearance.values()) min_clearance = std::min(min_clearance, c);
  capture(b, 0, min_clearance <= 1e-6 ? b.mass * normal_gravity : 0.0, false);

  std::vector<SpeedSample> history;
  history.reserve(options.max_frames);
  double impulse_since_capture = 0.0;
  std::size_t steps_since_capture = 0;
  const std::size_t burst_steps =
      scenario.kind == ScenarioKind::kPerturb
          ? static_cast<std::size_t>(std::llround(scenario.perturb_duration / dt))
          : 0;
  const Eigen::Vector3d burst =
      scenario.kind == ScenarioKind::kPerturb
          ? Eigen::Vector3d(-scenario.perturb_magnitude * std::cos(scenario.perturb_direction),
                            -scenario.perturb_magnitude * std::sin(scenario.perturb_direction), 0.0)
          : Eigen::Vector3d::Zero();

  for (std::size_t s = 1; s <= options.max_frames; ++s) {
    const bool driving = s <= burst_steps;
    const Eigen::Vector3d accel = driving ? burst : Eigen::Vector3d::Zero();
    const double e0 = mechanical_energy(b, physics.gravity);
    const StepResult r = step(b, plane, physics, dt, accel);
    b = r.body;
    ++result.diagnostics.steps;
    if (r.energy_limited) ++result.diagnostics.energy_limited_steps;
    result.diagnostics.max_friction_ratio = std::max(result.diagnostics.max_friction_ratio, r.max_friction_ratio);
    if (!driving) {
      const double e1 = mechanical_energy(b, physics.gravity);
      const double rel = (e1 - e0) / std::max(std::abs(e0), 1e-12);
      if (rel > 1e-9) ++result.diagnostics.energy_violations;
      result.diagnostics.worst_energy_increase = std::max(result.diagnostics.worst_energy_increase, rel);
    }
    impulse_since_capture += r.normal_impulse;
    ++steps_since_capture;
    history.push_back({b.linear_velocity.norm(), b.angular_velocity.norm()});

    const bool fell = std::abs(b.position.x()) > sensor.half_size || std::abs(b.position.y()) > sensor.half_size;
    const bool resting = !driving && s >= burst_steps + options.rest_window &&
                         detect_rest(history, options.rest_linear, options.rest_angular, options.rest_window);
    const bool last = s == options.max_frames;
    const double load = impulse_since_capture / (static_cast<double>(steps_since_capture) * dt);
    if (fell || resting || last) {
      capture(b, s, load, fell);
      rec.rest.resting = resting && !fell;
      rec.rest.fell_off = fell;
      rec.rest.unresolved = !resting && !fell;
      rec.rest.frames_to_rest = resting ? static_cast<std::uint32_t>(s) : 0;
      rec.rest.final_pose = b.pose();
      break;
    }
    if (s % options.capture_stride == 0) {
      capture(b, s, load, false);
      impulse_since_capture = 0.0;
      steps_since_capture = 0;
    }
  }
  return result;
}

InclineOutcome observed_incline_outcome(const EpisodeRecord& rec, double tolerance) {
  if (rec.frames.empty()) throw InvalidInput("episode has no frames");
  const double moved = std::abs(double(rec.rest.final_pose[0]) - double(rec.frames.front().pose[0]));
  return rec.rest.resting && moved < tolerance ? InclineOutcome::kStick : InclineOutcome::kSlide;
}

}  // namespace stsim
