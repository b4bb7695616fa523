#pragma once

#include <Eigen/Dense>
#include <cstddef>

#include "stsim/core.hpp"

namespace stsim {

inline constexpr double kDefaultGelThickness = 0.005;
inline constexpr int kDefaultNormalRadius = 2;

/// Gel-surface indentation field. Depth 0 is the undeformed surface; positive
/// values are indentation in meters, bounded by the elastomer thickness.
struct HeightMap {
  Grid<double> depth;
  double pitch = 1e-3;  // meters per pixel
  double gel_thickness = kDefaultGelThickness;

  std::size_t width() const { return depth.width(); }
  std::size_t height() const { return depth.height(); }

  /// Throws InvalidInput unless dims >= 3x3, pitch > 0 and all values lie in
  /// [0, gel_thickness].
  void validate() const;
};

struct GradientField {
  Grid<double> dx;
  Grid<double> dy;
};

enum class NormalMethod { kGradient, kCovariance };

struct NormalField {
  Grid<Eigen::Vector3d> normals;
  NormalMethod method = NormalMethod::kGradient;
  std::size_t degenerate_windows = 0;  // covariance windows that fell back to +z

  std::size_t width() const { return normals.width(); }
  std::size_t height() const { return normals.height(); }
};

/// Clamps raw depth to [0, gel_thickness]. Rejects non-finite pixels, naming
/// the first offending coordinate.
HeightMap clip_depth(const Grid<double>& raw_depth, double pitch,
                     double gel_thickness = kDefaultGelThickness);

/// Central differences in the interior, one-sided at the borders, in m/m.
GradientField gradient(const HeightMap& h);

/// N ~ (-df/dx, -df/dy, 1).
NormalField normals_from_gradient(const HeightMap& h);

/// Principal-axis normals: per pixel, the eigenvector of the smallest
/// eigenvalue of the covariance of the (2r+1)^2 neighbourhood, oriented +z.
/// Windows are truncated at the map border.
NormalField normals_from_covariance(const HeightMap& h, int neighborhood_radius = kDefaultNormalRadius);

namespace detail {

struct SmallestAxis {
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  double eigenvalue = 0.0;
  bool degenerate = false;  // covariance ~ 0, axis defaulted to +z
};

/// Closed-form eigen-solve of a symmetric 3x3 matrix for its smallest
/// eigenpair. When the smallest eigenvalue is repeated the returned axis is
/// the one in the eigenspace with the largest |z|. Result has z >= 0.
SmallestAxis smallest_eigenvector(const Eigen::Matrix3d& cov);

}  // namespace detail

}  // namespace stsim
