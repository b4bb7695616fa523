#include <doctest.h>

#include <cmath>
#include <random>

#include "stsim/heightfield.hpp"

using namespace stsim;

namespace {

HeightMap from_function(std::size_t w, std::size_t h, double pitch, auto f, double thickness = 1.0) {
  Grid<double> g(w, h);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) g(x, y) = f(x * pitch, y * pitch);
  return clip_depth(g, pitch, thickness);
}

double angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

}  // namespace

TEST_CASE("clip_depth clamps to the elastomer") {
  Grid<double> g(3, 3, 0.0);
  g(0, 0) = 0.009;
  g(1, 0) = 0.0;
  g(2, 0) = -0.002;
  g(1, 1) = 0.003;
  const HeightMap h = clip_depth(g, 1e-3, 0.005);
  CHECK(h.depth(0, 0) == 0.005);
  CHECK(h.depth(1, 0) == 0.0);
  CHECK(h.depth(2, 0) == 0.0);
  CHECK(h.depth(1, 1) == 0.003);
  CHECK(h.pitch == 1e-3);
}

TEST_CASE("clip_depth rejects non-finite pixels and names them") {
  Grid<double> g(4, 4, 0.0);
  g(2, 3) = std::nan("");
  try {
    clip_depth(g, 1e-3);
    FAIL("expected rejection");
  } catch (const InvalidInput& e) {
    const std::string msg = e.what();
    CHECK(msg.find('2') != std::string::npos);
    CHECK(msg.find('3') != std::string::npos);
  }
}

TEST_CASE("clipping is idempotent") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.01, 0.01);
  Grid<double> g(8, 8);
  for (auto& v : g.values()) v = u(rng);
  const HeightMap once = clip_depth(g, 1e-3);
  const HeightMap twice = clip_depth(once.depth, 1e-3);
  CHECK(once.depth == twice.depth);
}

TEST_CASE("gradient of constant and ramp fields") {
  const double p = 2e-4;
  const HeightMap flat = from_function(6, 5, p, [](double, double) { return 0.001; });
  const GradientField gf = gradient(flat);
  for (double v : gf.dx.values()) CHECK(v == doctest::Approx(0.0));
  for (double v : gf.dy.values()) CHECK(v == doctest::Approx(0.0));

  const double a = 0.3;
  const HeightMap rx = from_function(7, 6, p, [&](double x, double) { return a * x; });
  const GradientField gx = gradient(rx);
  for (std::size_t y = 0; y < 6; ++y)
    for (std::size_t x = 1; x + 1 < 7; ++x) {
      CHECK(gx.dx(x, y) == doctest::Approx(a).epsilon(1e-12));
      CHECK(gx.dy(x, y) == doctest::Approx(0.0));
    }

  const HeightMap ry = from_function(6, 7, p, [&](double, double y) { return a * y; });
  const GradientField gy = gradient(ry);
  for (std::size_t y = 1; y + 1 < 7; ++y)
    for (std::size_t x = 0; x < 6; ++x) {
      CHECK(gy.dy(x, y) == doctest::Approx(a).epsilon(1e-12));
      CHECK(gy.dx(x, y) == doctest::Approx(0.0));
    }
}

TEST_CASE("gradient normals of flat and unit ramps") {
  const double s = 1.0 / std::sqrt(2.0);
  const NormalField flat = normals_from_gradient(from_function(5, 5, 1e-3, [](double, double) { return 0.0; }));
  for (const auto& n : flat.normals.values()) CHECK((n - Eigen::Vector3d::UnitZ()).norm() < 1e-15);

  const NormalField fx = normals_from_gradient(from_function(5, 5, 1e-3, [](double x, double) { return x; }));
  const NormalField fy = normals_from_gradient(from_function(5, 5, 1e-3, [](double, double y) { return y; }));
  for (std::size_t i = 0; i < fx.normals.size(); ++i) {
    CHECK((fx.normals[i] - Eigen::Vector3d(-s, 0, s)).norm() < 1e-12);
    CHECK((fy.normals[i] - Eigen::Vector3d(0, -s, s)).norm() < 1e-12);
  }
}

TEST_CASE("covariance normals: flat patch is degenerate-safe, ramp is exact") {
  const NormalField flat = normals_from_covariance(from_function(7, 7, 1e-3, [](double, double) { return 0.0; }), 2);
  for (const auto& n : flat.normals.values()) CHECK((n - Eigen::Vector3d::UnitZ()).norm() < 1e-12);

  const double s = 1.0 / std::sqrt(2.0);
  const NormalField ramp = normals_from_covariance(from_function(9, 9, 1e-3, [](double x, double) { return x; }), 2);
  for (const auto& n : ramp.normals.values()) CHECK((n - Eigen::Vector3d(-s, 0, s)).norm() < 1e-6);
}

TEST_CASE("smallest eigenvector matches a library eigen-solver") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::Matrix3d a;
    for (int i = 0; i < 9; ++i) a(i) = g(rng);
    const Eigen::Matrix3d cov = a * a.transpose();
    const detail::SmallestAxis mine = detail::smallest_eigenvector(cov);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> ref(cov);
    Eigen::Vector3d v = ref.eigenvectors().col(0);
    if (v.z() < 0) v = -v;
    CHECK(mine.eigenvalue == doctest::Approx(ref.eigenvalues()(0)).epsilon(1e-8).scale(cov.norm()));
    CHECK(std::min((mine.axis - v).norm(), (mine.axis + v).norm()) < 1e-6);
    CHECK(mine.axis.z() >= 0.0);
  }
}

TEST_CASE("repeated smallest eigenvalue picks the axis with the largest |z|") {
  // Eigenvalues {0, 0, 1}: the null space is the x-z plane.
  const Eigen::Matrix3d cov = Eigen::Vector3d::UnitY() * Eigen::Vector3d::UnitY().transpose();
  const detail::SmallestAxis r = detail::smallest_eigenvector(cov);
  CHECK((r.axis - Eigen::Vector3d::UnitZ()).norm() < 1e-9);
}

TEST_CASE("covariance normals on a sphere cap stay within 2 degrees") {
  const double pitch = 2e-4, radius = 0.02, press = 0.003;
  const std::size_t n = 128;
  const double c = 0.5 * pitch * (n - 1);
  auto f = [&](double x, double y) {
    const double r2 = (x - c) * (x - c) + (y - c) * (y - c);
    return r2 < radius * radius ? std::max(0.0, press - radius + std::sqrt(radius * radius - r2)) : 0.0;
  };
  const HeightMap h = from_function(n, n, pitch, f, kDefaultGelThickness);
  const int r = kDefaultNormalRadius;
  const NormalField cov = normals_from_covariance(h, r);
  const double rim = std::sqrt(radius * radius - (radius - press) * (radius - press));
  double worst = 0.0;
  std::size_t checked = 0;
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      const double dx = x * pitch - c, dy = y * pitch - c;
      // Whole window strictly inside the cap.
      if (std::hypot(dx, dy) + (r + 1) * pitch * std::sqrt(2.0) >= rim) continue;
      const Eigen::Vector3d truth = Eigen::Vector3d(dx, dy, std::sqrt(radius * radius - dx * dx - dy * dy)).normalized();
      worst = std::max(worst, angle(cov.normals(x, y), truth));
      ++checked;
    }
  CHECK(checked > 1000);
  CHECK(worst * 180.0 / M_PI < 2.0);
}

TEST_CASE("covariance and gradient normals agree on affine fields") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = u(rng), b = u(rng), c0 = 2.0;
    const HeightMap h = from_function(11, 9, 1e-3, [&](double x, double y) { return c0 + a * x + b * y; }, 10.0);
    const NormalField g = normals_from_gradient(h);
    const NormalField cv = normals_from_covariance(h, 2);
    for (std::size_t y = 1; y + 1 < 9; ++y)
      for (std::size_t x = 1; x + 1 < 11; ++x) CHECK(angle(g.normals(x, y), cv.normals(x, y)) < 1e-4);
  }
}

TEST_CASE("normals are unit, point up, and ignore a constant offset") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 0.002);
  Grid<double> g(12, 10);
  for (auto& v : g.values()) v = u(rng);
  Grid<double> shifted = g;
  for (auto& v : shifted.values()) v += 0.001;
  const HeightMap h = clip_depth(g, 2e-4), hs = clip_depth(shifted, 2e-4);
  for (auto method : {0, 1}) {
    const NormalField a = method ? normals_from_covariance(h, 1) : normals_from_gradient(h);
    const NormalField b = method ? normals_from_covariance(hs, 1) : normals_from_gradient(hs);
    for (std::size_t i = 0; i < a.normals.size(); ++i) {
      CHECK(std::abs(a.normals[i].norm() - 1.0) < 1e-6);
      CHECK(a.normals[i].z() >= 0.0);
      CHECK((a.normals[i] - b.normals[i]).norm() < 1e-6);
    }
  }
}

TEST_CASE("height maps below 3x3 are rejected") {
  CHECK_THROWS_AS(normals_from_gradient(HeightMap{Grid<double>(2, 5, 0.0)}), InvalidInput);
  CHECK_THROWS_AS(normals_from_covariance(HeightMap{Grid<double>(5, 2, 0.0)}), InvalidInput);
}
