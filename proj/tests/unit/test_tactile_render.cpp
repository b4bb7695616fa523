#include <doctest.h>

#include <cmath>
#include <random>

#include "stsim/heightfield.hpp"
#include "stsim/tactile_render.hpp"

using namespace stsim;

namespace {

PhongParams single_light(const Eigen::Vector3d& dir) {
  PhongParams p;
  p.lights = {LightSource{dir.normalized(), {1, 1, 1}, {1, 1, 1}}};
  return p;
}

HeightMap sphere_press(std::size_t n, double pitch, double radius, double press) {
  Grid<double> g(n, n, 0.0);
  const double c = 0.5 * (n - 1);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      const double r2 = (std::pow(x - c, 2) + std::pow(y - c, 2)) * pitch * pitch;
      if (r2 < radius * radius) g(x, y) = std::max(0.0, press - radius + std::sqrt(radius * radius - r2));
    }
  return clip_depth(g, pitch);
}

}  // namespace

TEST_CASE("reflect") {
  CHECK((reflect({0, 0, 1}, {0, 0, 1}) - Eigen::Vector3d(0, 0, 1)).norm() < 1e-15);
  CHECK((reflect({1, 0, 0}, {0, 0, 1}) - Eigen::Vector3d(-1, 0, 0)).norm() < 1e-15);
  CHECK((reflect({0, 0.6, 0.8}, {0, 0, 1}) - Eigen::Vector3d(0, -0.6, 0.8)).norm() < 1e-15);
}

TEST_CASE("phong_pixel hand evaluations") {
  PhongParams amb;
  amb.k_ambient = 0.2;
  amb.ambient = {0.5, 0.5, 0.5};
  for (double v : phong_pixel({0, 0, 1}, amb)) CHECK(v == doctest::Approx(0.1).epsilon(1e-15));

  // Published constants, head-on: 0.8 + 1.0 + 0.5 = 2.3, clamped.
  for (double v : phong_pixel({0, 0, 1}, single_light({0, 0, 1}))) CHECK(v == 1.0);

  // L.N = 0.8 and R.V = 0.8 with N = (0,0,1), V = R rotated so the cosine is 0.8.
  PhongParams p = single_light({0.6, 0, 0.8});
  p.k_ambient = 0.0;
  p.k_diffuse = 0.5;
  p.k_specular = 0.5;
  p.view = reflect(p.lights[0].direction, {0, 0, 1});
  p.view = Eigen::AngleAxisd(std::acos(0.8), Eigen::Vector3d::UnitY()) * p.view;
  REQUIRE(reflect(p.lights[0].direction, {0, 0, 1}).dot(p.view) == doctest::Approx(0.8).epsilon(1e-14));
  for (double v : phong_pixel({0, 0, 1}, p)) CHECK(std::abs(v - 0.56384) < 1e-9);
}

TEST_CASE("negative dot products contribute nothing") {
  PhongParams p = single_light({0, 0, -1});
  p.k_ambient = 0.0;
  for (double v : phong_pixel({0, 0, 1}, p)) CHECK(v == 0.0);
}

TEST_CASE("phong params are validated") {
  PhongParams p = default_phong();
  p.k_diffuse = -1;
  CHECK_THROWS_AS(p.validate(), InvalidInput);
  p = default_phong();
  p.shininess = 0.5;
  CHECK_THROWS_AS(p.validate(), InvalidInput);
  p = default_phong();
  p.view = {0, 0, 2};
  CHECK_THROWS_AS(p.validate(), InvalidInput);
}

TEST_CASE("flat map renders the flat colour, single deep pixel is darkened") {
  const PhongParams p = default_phong();
  HeightMap h{Grid<double>(5, 5, 0.0)};
  const TactileImage flat = render_tactile(h, normals_from_gradient(h), p, DarkeningParams{});
  const Rgb expect = phong_pixel({0, 0, 1}, p);
  for (std::size_t y = 0; y < 5; ++y)
    for (std::size_t x = 0; x < 5; ++x)
      for (std::size_t c = 0; c < 3; ++c) CHECK(flat.at(x, y, c) == doctest::Approx(expect[c]).epsilon(1e-6));
  CHECK(flat == render_flat(5, 5, p));

  PhongParams dim = p;
  dim.k_ambient = 0.3;
  h.depth(2, 2) = h.gel_thickness;
  const NormalField nf = normals_from_gradient(h);
  const TactileImage img = render_tactile(h, nf, dim, DarkeningParams{0.4});
  const Rgb base = phong_pixel(nf.normals(2, 2), dim);
  for (std::size_t c = 0; c < 3; ++c) CHECK(img.at(2, 2, c) == doctest::Approx(base[c] * 0.6).epsilon(1e-6));
}

TEST_CASE("darkening mask") {
  CHECK(darkening_mask(0.0, 0.005, {0.5}) == 1.0);
  CHECK(darkening_mask(0.005, 0.005, {0.4}) == doctest::Approx(0.6));
  CHECK(smoothstep(0.5) == doctest::Approx(0.5));
  double prev = 1.0;
  for (int i = 0; i <= 50; ++i) {
    const double m = darkening_mask(i * 1e-4, 0.005, {0.5});
    CHECK(m <= prev + 1e-15);
    prev = m;
  }
}

TEST_CASE("dimension mismatch is rejected") {
  HeightMap h{Grid<double>(5, 5, 0.0)};
  HeightMap other{Grid<double>(6, 5, 0.0)};
  CHECK_THROWS_AS(render_tactile(h, normals_from_gradient(other), default_phong(), {}), InvalidInput);
}

TEST_CASE("centred sphere indentation keeps the square's symmetry") {
  const std::size_t n = 41;
  const HeightMap h = sphere_press(n, 2e-4, 0.01, 0.002);
  PhongParams p = single_light({0, 0, 1});
  p.k_ambient = 0.1;
  p.k_diffuse = 0.5;
  p.k_specular = 0.2;
  const TactileImage img = render_tactile(h, normals_from_covariance(h, 2), p, {0.5});
  // On a pixel lattice only the eight mirror/quarter-turn images coincide.
  double worst = 0.0;
  bool shaded = false;
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      const double v = img.at(x, y, 0);
      shaded = shaded || std::abs(v - img.at(0, 0, 0)) > 1e-3;
      for (double w : {img.at(y, x, 0), img.at(n - 1 - x, y, 0), img.at(x, n - 1 - y, 0)})
        worst = std::max(worst, std::abs(v - w));
    }
  CHECK(shaded);
  CHECK(worst < 1e-6);
}

TEST_CASE("monotone in L.N with one light and no specular") {
  PhongParams p = single_light({0, 0, 1});
  p.k_specular = 0.0;
  p.k_ambient = 0.1;
  p.k_diffuse = 0.7;
  double prev = -1.0;
  for (int i = 0; i <= 90; ++i) {
    const double t = (90 - i) * M_PI / 180.0;  // decreasing tilt, increasing L.N
    const double v = phong_pixel({std::sin(t), 0, std::cos(t)}, p)[0];
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("rotating map and lights by 90 degrees rotates the image") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 0.003);
  const std::size_t n = 12;
  Grid<double> g(n, n);
  for (auto& v : g.values()) v = u(rng);
  // Rotation by +90 deg about z in pixel coordinates: (x, y) -> (n-1-y, x).
  Grid<double> gr(n, n);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) gr(n - 1 - y, x) = g(x, y);
  const Eigen::Matrix3d rot = Eigen::AngleAxisd(M_PI / 2, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  PhongParams p = default_phong();
  p.k_ambient = 0.1;
  PhongParams pr = p;
  for (auto& l : pr.lights) l.direction = rot * l.direction;
  const HeightMap h = clip_depth(g, 5e-4), hr = clip_depth(gr, 5e-4);
  for (int method : {0, 1}) {
    const auto nf = method ? normals_from_covariance(h, 1) : normals_from_gradient(h);
    const auto nfr = method ? normals_from_covariance(hr, 1) : normals_from_gradient(hr);
    const TactileImage a = render_tactile(h, nf, p, {0.5});
    const TactileImage b = render_tactile(hr, nfr, pr, {0.5});
    double worst = 0.0;
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x)
        for (std::size_t c = 0; c < 3; ++c) worst = std::max(worst, double(std::abs(a.at(x, y, c) - b.at(n - 1 - y, x, c))));
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("outputs stay in range and zero lights give a constant image") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 0.005);
  Grid<double> g(16, 16);
  for (auto& v : g.values()) v = u(rng);
  const HeightMap h = clip_depth(g, 1e-4);
  const TactileImage img = render_tactile(h, normals_from_covariance(h, 2), default_phong(), {0.5});
  for (float v : img.values()) {
    CHECK(std::isfinite(v));
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  PhongParams none;
  none.k_ambient = 0.7;
  const TactileImage c = render_tactile(h, normals_from_gradient(h), none, {0.0});
  for (float v : c.values()) CHECK(v == doctest::Approx(0.7f));
}
