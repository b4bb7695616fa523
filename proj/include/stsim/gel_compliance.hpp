#pragma once

#include <cstddef>
#include <stdexcept>

#include "stsim/core.hpp"
#include "stsim/heightfield.hpp"

namespace stsim {

/// Stiffness (N/m per pixel spring) at which a 0.1 kg object resting on a
/// 30x30-pixel footprint indents by 1 mm under standard gravity.
inline constexpr double kDefaultSpringStiffness = 0.1 * 9.81 / (30.0 * 30.0 * 1e-3);

/// One independent vertical spring per pixel.
struct SpringField {
  double stiffness = kDefaultSpringStiffness;
  double gel_thickness = kDefaultGelThickness;
  double pitch = 1e-3;

  void validate() const;
};

struct ContactSolution {
  HeightMap depth;
  Mask contact;           // depth > 0
  Grid<double> force;     // newtons, stiffness * depth
  double offset = 0.0;    // rigid settle offset: depth = clamp(offset - clearance)
  std::size_t clipped_pixels = 0;
  std::size_t iterations = 0;
};

/// Thrown when the requested load exceeds what every spring fully compressed
/// can support.
class SaturationError : public std::runtime_error {
 public:
  SaturationError(const std::string& what, double max_load)
      : std::runtime_error(what), max_supportable_load(max_load) {}
  double max_supportable_load;
};

/// Finds the offset at which the summed spring forces balance `normal_load`.
/// `clearance` is the undeformed gap between the object's lower surface and
/// the gel at each pixel (may be negative; +inf where the object is absent).
ContactSolution solve_equilibrium(const Grid<double>& clearance, double normal_load,
                                  const SpringField& springs);

Mask contact_mask(const ContactSolution& sol, double threshold);

}  // namespace stsim
