#include "stsim/gel_compliance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace stsim {

void SpringField::validate() const {
  if (!(stiffness > 0.0)) throw InvalidInput("spring stiffness must be positive");
  if (!(gel_thickness > 0.0)) throw InvalidInput("gel thickness must be positive");
  if (!(pitch > 0.0)) throw InvalidInput("pitch must be positive");
}

namespace {

double total_force(const Grid<double>& clearance, double offset, const SpringField& s) {
  double sum = 0.0;
  for (double c : clearance.values()) {
    if (c < offset) sum += std::min(offset - c, s.gel_thickness);
  }
  return s.stiffness * sum;
}

}  // namespace

ContactSolution solve_equilibrium(const Grid<double>& clearance, double normal_load,
                                  const SpringField& springs) {
  springs.validate();
  if (!(normal_load >= 0.0) || !std::isfinite(normal_load)) {
    throw InvalidInput("normal load must be finite and non-negative");
  }
  double min_c = std::numeric_limits<double>::infinity();
  double max_c = -std::numeric_limits<double>::infinity();
  std::size_t covered = 0;
  for (std::size_t i = 0; i < clearance.size(); ++i) {
    const double c = clearance[i];
    if (std::isnan(c) || c == -std::numeric_limits<double>::infinity()) {
      std::ostringstream os;
      os << "clearance at pixel " << i % clearance.width() << ", " << i / clearance.width()
         << " is not a valid gap";
      throw InvalidInput(os.str());
    }
    if (std::isinf(c)) continue;
    min_c = std::min(min_c, c);
    max_c = std::max(max_c, c);
    ++covered;
  }

  const double capacity = springs.stiffness * springs.gel_thickness * static_cast<double>(covered);
  if (normal_load > capacity) {
    std::ostringstream os;
    os << "load " << normal_load << " N exceeds gel capacity; max supportable load is " << capacity
       << " N";
    throw SaturationError(os.str(), capacity);
  }

  ContactSolution sol;
  double offset = covered > 0 ? min_c : 0.0;
  if (normal_load > 0.0) {
    const double tol = 1e-9 * normal_load;
    double lo = min_c;
    double hi = max_c + springs.gel_thickness;
    offset = 0.5 * (lo + hi);
    for (std::size_t it = 0; it < 400; ++it) {
      offset = 0.5 * (lo + hi);
      sol.iterations = it + 1;
      const double residual = total_force(clearance, offset, springs) - normal_load;
      if (std::abs(residual) <= tol || offset <= lo || offset >= hi) break;
      if (residual < 0.0) {
        lo = offset;
      } else {
        hi = offset;
      }
    }
  }
  sol.offset = offset;

  sol.depth.pitch = springs.pitch;
  sol.depth.gel_thickness = springs.gel_thickness;
  sol.depth.depth = Grid<double>(clearance.width(), clearance.height());
  sol.contact = Mask(clearance.width(), clearance.height());
  sol.force = Grid<double>(clearance.width(), clearance.height());
  if (normal_load > 0.0) {
    for (std::size_t i = 0; i < clearance.size(); ++i) {
      const double c = clearance[i];
      if (!(c < offset)) continue;
      double d = offset - c;
      if (d >= springs.gel_thickness) {
        d = springs.gel_thickness;
        ++sol.clipped_pixels;
      }
      sol.depth.depth[i] = d;
      sol.force[i] = springs.stiffness * d;
      sol.contact[i] = d > 0.0 ? 1 : 0;
    }
  }
  return sol;
}

Mask contact_mask(const ContactSolution& sol, double threshold) {
  if (threshold < 0.0) throw InvalidInput("contact threshold must be non-negative");
  Mask m(sol.depth.width(), sol.depth.height());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = sol.depth.depth[i] > threshold ? 1 : 0;
  return m;
}

}  // namespace stsim
