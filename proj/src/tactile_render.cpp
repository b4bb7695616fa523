#include "stsim/tactile_render.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace stsim {

namespace {

bool is_unit(const Eigen::Vector3d& v) { return std::abs(v.norm() - 1.0) <= 1e-6; }

bool in_unit_range(const Rgb& c) {
  return std::all_of(c.begin(), c.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

}  // namespace

void PhongParams::validate() const {
  if (k_ambient < 0.0 || k_diffuse < 0.0 || k_specular < 0.0) {
    throw InvalidInput("phong constants must be non-negative");
  }
  if (!(shininess >= 1.0)) throw InvalidInput("phong shininess must be >= 1");
  if (!is_unit(view)) throw InvalidInput("view direction must be a unit vector");
  if (!in_unit_range(ambient)) throw InvalidInput("ambient intensity must lie in [0, 1]");
  for (const LightSource& l : lights) {
    if (!is_unit(l.direction)) throw InvalidInput("light direction must be a unit vector");
    if (!in_unit_range(l.diffuse) || !in_unit_range(l.specular)) {
      throw InvalidInput("light intensities must lie in [0, 1]");
    }
  }
}

std::vector<LightSource> tricolor_rig(double elevation_rad, double azimuth_offset_rad) {
  std::vector<LightSource> rig;
  const double ce = std::cos(elevation_rad);
  const double se = std::sin(elevation_rad);
  for (int m = 0; m < 3; ++m) {
    const double az = azimuth_offset_rad + m * 2.0 * std::numbers::pi / 3.0;
    LightSource l;
    l.direction = Eigen::Vector3d(ce * std::cos(az), ce * std::sin(az), se).normalized();
    l.diffuse = {0.0, 0.0, 0.0};
    l.diffuse[static_cast<std::size_t>(m)] = 1.0;
    l.specular = l.diffuse;
    rig.push_back(l);
  }
  return rig;
}

PhongParams default_phong() {
  PhongParams p;
  p.lights = tricolor_rig();
  return p;
}

Eigen::Vector3d reflect(const Eigen::Vector3d& light, const Eigen::Vector3d& normal) {
  return 2.0 * light.dot(normal) * normal - light;
}

Rgb phong_pixel(const Eigen::Vector3d& normal, const PhongParams& params) {
  Rgb out;
  for (std::size_t c = 0; c < 3; ++c) out[c] = params.k_ambient * params.ambient[c];
  for (const LightSource& l : params.lights) {
    const double diffuse = std::max(l.direction.dot(normal), 0.0);
    const double spec_base = std::max(reflect(l.direction, normal).dot(params.view), 0.0);
    const double specular = std::pow(spec_base, params.shininess);
    for (std::size_t c = 0; c < 3; ++c) {
      out[c] += params.k_diffuse * diffuse * l.diffuse[c] + params.k_specular * specular * l.specular[c];
    }
  }
  for (double& v : out) v = std::clamp(v, 0.0, 1.0);
  return out;
}

double smoothstep(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

double darkening_mask(double depth, double gel_thickness, const DarkeningParams& darkening) {
  if (depth <= 0.0) return 1.0;
  return 1.0 - darkening.max_attenuation * smoothstep(depth / gel_thickness);
}

TactileImage render_tactile(const HeightMap& h, const NormalField& normals,
                            const PhongParams& params, const DarkeningParams& darkening) {
  if (!normals.normals.same_shape(h.width(), h.height())) {
    throw InvalidInput("height map and normal field dimensions differ");
  }
  if (darkening.max_attenuation < 0.0 || darkening.max_attenuation > 1.0) {
    throw InvalidInput("darkening attenuation must lie in [0, 1]");
  }
  params.validate();
  TactileImage img(h.width(), h.height());
  for (std::size_t y = 0; y < h.height(); ++y) {
    for (std::size_t x = 0; x < h.width(); ++x) {
      const Rgb c = phong_pixel(normals.normals(x, y), params);
      const double m = darkening_mask(h.depth(x, y), h.gel_thickness, darkening);
      img.set_pixel(x, y, static_cast<float>(c[0] * m), static_cast<float>(c[1] * m),
                    static_cast<float>(c[2] * m));
    }
  }
  return img;
}

TactileImage render_flat(std::size_t width, std::size_t height, const PhongParams& params) {
  const Rgb c = phong_pixel(Eigen::Vector3d::UnitZ(), params);
  TactileImage img(width, height);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      img.set_pixel(x, y, static_cast<float>(c[0]), static_cast<float>(c[1]), static_cast<float>(c[2]));
    }
  }
  return img;
}

}  // namespace stsim
