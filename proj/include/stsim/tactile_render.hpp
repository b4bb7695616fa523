#pragma once

#include <Eigen/Core>
#include <array>
#include <vector>

#include "stsim/core.hpp"
#include "stsim/heightfield.hpp"

namespace stsim {

using Rgb = std::array<double, 3>;

struct LightSource {
  Eigen::Vector3d direction = Eigen::Vector3d::UnitZ();  // surface -> light, unit
  Rgb diffuse{1.0, 1.0, 1.0};
  Rgb specular{1.0, 1.0, 1.0};
};

/// Phong reflectance constants. Defaults are the published sensor values
/// (k_s = 0.5, k_d = 1.0, k_a = 0.8, alpha = 5) with the default tri-colour
/// rig and unit ambient intensity.
struct PhongParams {
  double k_ambient = 0.8;
  double k_diffuse = 1.0;
  double k_specular = 0.5;
  double shininess = 5.0;
  Rgb ambient{1.0, 1.0, 1.0};
  Eigen::Vector3d view = Eigen::Vector3d::UnitZ();
  std::vector<LightSource> lights;

  /// Throws InvalidInput on negative constants, shininess < 1, non-unit
  /// directions or intensities outside [0, 1].
  void validate() const;
};

/// Three directional lights 120 degrees apart in azimuth at the given
/// elevation, coloured red, green and blue.
std::vector<LightSource> tricolor_rig(double elevation_rad = 0.7853981633974483,
                                      double azimuth_offset_rad = 0.0);

PhongParams default_phong();

/// Depth-dependent attenuation: mask = 1 - max_attenuation * smoothstep(depth / thickness).
struct DarkeningParams {
  double max_attenuation = 0.5;
};

using TactileImage = RgbImage;

Eigen::Vector3d reflect(const Eigen::Vector3d& light, const Eigen::Vector3d& normal);

/// Per-channel ambient + diffuse + specular, clamped to [0, 1].
Rgb phong_pixel(const Eigen::Vector3d& normal, const PhongParams& params);

double smoothstep(double t);
double darkening_mask(double depth, double gel_thickness, const DarkeningParams& darkening);

TactileImage render_tactile(const HeightMap& h, const NormalField& normals,
                            const PhongParams& params, const DarkeningParams& darkening);

/// Image of the undeformed gel.
TactileImage render_flat(std::size_t width, std::size_t height, const PhongParams& params);

}  // namespace stsim
