#include "stsim/heightfield.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

namespace stsim {

void HeightMap::validate() const {
  if (width() < 3 || height() < 3) {
    throw InvalidInput("height map must be at least 3x3");
  }
  if (!(pitch > 0.0) || !(gel_thickness > 0.0)) {
    throw InvalidInput("height map pitch and gel thickness must be positive");
  }
  for (std::size_t y = 0; y < height(); ++y) {
    for (std::size_t x = 0; x < width(); ++x) {
      const double v = depth(x, y);
      if (!(v >= 0.0 && v <= gel_thickness)) {
        std::ostringstream os;
        os << "height map value " << v << " at (" << x << ", " << y << ") outside [0, "
           << gel_thickness << "]";
        throw InvalidInput(os.str());
      }
    }
  }
}

HeightMap clip_depth(const Grid<double>& raw_depth, double pitch, double gel_thickness) {
  if (!(gel_thickness > 0.0)) throw InvalidInput("gel thickness must be positive");
  HeightMap out;
  out.pitch = pitch;
  out.gel_thickness = gel_thickness;
  out.depth = Grid<double>(raw_depth.width(), raw_depth.height());
  for (std::size_t y = 0; y < raw_depth.height(); ++y) {
    for (std::size_t x = 0; x < raw_depth.width(); ++x) {
      const double v = raw_depth(x, y);
      if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "non-finite depth at pixel (" << x << ", " << y << ")";
        throw InvalidInput(os.str());
      }
      out.depth(x, y) = std::min(std::max(v, 0.0), gel_thickness);
    }
  }
  return out;
}

GradientField gradient(const HeightMap& h) {
  h.validate();
  const std::size_t w = h.width();
  const std::size_t ht = h.height();
  GradientField g{Grid<double>(w, ht), Grid<double>(w, ht)};
  const double inv = 1.0 / h.pitch;
  for (std::size_t y = 0; y < ht; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (x == 0) {
        g.dx(x, y) = (h.depth(1, y) - h.depth(0, y)) * inv;
      } else if (x == w - 1) {
        g.dx(x, y) = (h.depth(x, y) - h.depth(x - 1, y)) * inv;
      } else {
        g.dx(x, y) = (h.depth(x + 1, y) - h.depth(x - 1, y)) * 0.5 * inv;
      }
      if (y == 0) {
        g.dy(x, y) = (h.depth(x, 1) - h.depth(x, 0)) * inv;
      } else if (y == ht - 1) {
        g.dy(x, y) = (h.depth(x, y) - h.depth(x, y - 1)) * inv;
      } else {
        g.dy(x, y) = (h.depth(x, y + 1) - h.depth(x, y - 1)) * 0.5 * inv;
      }
    }
  }
  return g;
}

NormalField normals_from_gradient(const HeightMap& h) {
  const GradientField g = gradient(h);
  NormalField out;
  out.method = NormalMethod::kGradient;
  out.normals = Grid<Eigen::Vector3d>(h.width(), h.height());
  for (std::size_t i = 0; i < out.normals.size(); ++i) {
    out.normals[i] = Eigen::Vector3d(-g.dx[i], -g.dy[i], 1.0).normalized();
  }
  return out;
}

namespace detail {

namespace {

Eigen::Vector3d oriented(Eigen::Vector3d v) {
  v.normalize();
  if (v.z() < 0.0) v = -v;
  return v;
}

// Axis of largest |z| inside the plane orthogonal to `row`.
Eigen::Vector3d best_z_in_complement(const Eigen::Vector3d& row) {
  const Eigen::Vector3d r = row.normalized();
  Eigen::Vector3d v = Eigen::Vector3d::UnitZ() - r.z() * r;
  if (v.norm() < 1e-12) v = Eigen::Vector3d::UnitX() - r.x() * r;
  return oriented(v);
}

}  // namespace

SmallestAxis smallest_eigenvector(const Eigen::Matrix3d& a) {
  SmallestAxis out;
  const double scale = a.cwiseAbs().maxCoeff();
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    out.degenerate = true;
    return out;
  }
  const Eigen::Matrix3d m = a / scale;

  const double off = m(0, 1) * m(0, 1) + m(0, 2) * m(0, 2) + m(1, 2) * m(1, 2);
  const double q = m.trace() / 3.0;
  const double dxx = m(0, 0) - q;
  const double dyy = m(1, 1) - q;
  const double dzz = m(2, 2) - q;
  const double p2 = dxx * dxx + dyy * dyy + dzz * dzz + 2.0 * off;

  double lambda_min = 0.0;
  double lambda_max = 0.0;
  if (p2 <= 1e-30) {
    // Isotropic: every direction is an eigenvector; +z has the largest |z|.
    out.eigenvalue = q * scale;
    return out;
  }
  const double p = std::sqrt(p2 / 6.0);
  const Eigen::Matrix3d b = (m - q * Eigen::Matrix3d::Identity()) / p;
  const double r = std::clamp(b.determinant() / 2.0, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  lambda_max = q + 2.0 * p * std::cos(phi);
  lambda_min = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
  out.eigenvalue = lambda_min * scale;

  const Eigen::Matrix3d shifted = m - lambda_min * Eigen::Matrix3d::Identity();
  const Eigen::Vector3d r0 = shifted.row(0);
  const Eigen::Vector3d r1 = shifted.row(1);
  const Eigen::Vector3d r2 = shifted.row(2);
  const Eigen::Vector3d c01 = r0.cross(r1);
  const Eigen::Vector3d c02 = r0.cross(r2);
  const Eigen::Vector3d c12 = r1.cross(r2);
  const double n01 = c01.squaredNorm();
  const double n02 = c02.squaredNorm();
  const double n12 = c12.squaredNorm();
  const double best = std::max({n01, n02, n12});

  // Cross products scale with (lambda_mid - lambda_min)(lambda_max - lambda_min).
  const double spread = std::max(lambda_max - lambda_min, 1e-300);
  if (best > 1e-20 * spread * spread * spread * spread) {
    const Eigen::Vector3d& c = (best == n01) ? c01 : (best == n02) ? c02 : c12;
    out.axis = oriented(c);
    return out;
  }
  // Repeated smallest eigenvalue: the shifted matrix has rank one.
  const double s0 = r0.squaredNorm();
  const double s1 = r1.squaredNorm();
  const double s2 = r2.squaredNorm();
  const Eigen::Vector3d& row = (s0 >= s1 && s0 >= s2) ? r0 : (s1 >= s2) ? r1 : r2;
  out.axis = best_z_in_complement(row);
  return out;
}

}  // namespace detail

NormalField normals_from_covariance(const HeightMap& h, int neighborhood_radius) {
  if (neighborhood_radius < 1) throw InvalidInput("neighborhood radius must be >= 1");
  h.validate();
  const auto w = static_cast<long>(h.width());
  const auto ht = static_cast<long>(h.height());
  const long r = neighborhood_radius;
  const double inv_pitch = 1.0 / h.pitch;

  NormalField out;
  out.method = NormalMethod::kCovariance;
  out.normals = Grid<Eigen::Vector3d>(h.width(), h.height());

  // Coordinates are expressed in pixel units relative to the window centre;
  // the principal axes are invariant under this similarity transform.
  std::vector<Eigen::Vector3d> points;
  points.reserve(static_cast<std::size_t>((2 * r + 1) * (2 * r + 1)));
  for (long y = 0; y < ht; ++y) {
    for (long x = 0; x < w; ++x) {
      const double z0 = h.depth(x, y) * inv_pitch;
      points.clear();
      Eigen::Vector3d mean = Eigen::Vector3d::Zero();
      for (long v = std::max(0L, y - r); v <= std::min(ht - 1, y + r); ++v) {
        for (long u = std::max(0L, x - r); u <= std::min(w - 1, x + r); ++u) {
          points.emplace_back(static_cast<double>(u - x), static_cast<double>(v - y),
                              h.depth(u, v) * inv_pitch - z0);
          mean += points.back();
        }
      }
      mean /= static_cast<double>(points.size());
      Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
      for (const Eigen::Vector3d& pt : points) {
        const Eigen::Vector3d d = pt - mean;
        cov += d * d.transpose();
      }
      cov /= static_cast<double>(points.size());
      const detail::SmallestAxis axis = detail::smallest_eigenvector(cov);
      if (axis.degenerate) ++out.degenerate_windows;
      out.normals(x, y) = axis.axis;
    }
  }
  return out;
}

}  // namespace stsim
