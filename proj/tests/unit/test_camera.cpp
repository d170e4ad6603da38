#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "mocaplab/camera.hpp"
#include "mocaplab/error.hpp"

using namespace mocap;

namespace {

TsaiCamera worked_example() {
  TsaiCamera c;
  c.f = 100.0;
  c.kappa = 0.0;
  c.d_px = c.d_py = 0.01;
  c.s_x = 1.0;
  c.c_x = 320.0;
  c.c_y = 240.0;
  c.img_w = 640;
  c.img_h = 480;
  return c;
}

}  // namespace

TEST_CASE("world_to_camera") {
  TsaiCamera c = worked_example();
  CHECK(world_to_camera(c, {1, 2, 3}) == Point3{1, 2, 3});
  c.t_z = 10.0;
  CHECK(world_to_camera(c, {0, 0, 0}) == Point3{0, 0, 10});
  c.t_z = 0.0;
  c.r_z = std::numbers::pi / 2;
  const Point3 p = world_to_camera(c, {1, 0, 0});
  CHECK(std::abs(p.x) < 1e-15);
  CHECK(p.y == doctest::Approx(1.0));
}

TEST_CASE("project: worked example and optical axis") {
  const TsaiCamera c = worked_example();
  const PixelCoord px = project(c, {1, 2, 100});
  CHECK(std::abs(px.x - 420.0) < 1e-9);
  CHECK(std::abs(px.y - 440.0) < 1e-9);
  CHECK(px.depth == 100.0);

  TsaiCamera d = c;
  for (double k : {0.0, 1e-3, -1e-4, 0.5}) {
    d.kappa = k;
    for (double z : {1.0, 50.0, 9000.0}) {
      const PixelCoord a = project(d, {0, 0, z});
      CHECK(a.x == 320.0);
      CHECK(a.y == 240.0);
    }
  }
}

TEST_CASE("project: s_x scales x only") {
  TsaiCamera c = worked_example();
  c.s_x = 2.0;
  const PixelCoord px = project(c, {1, 2, 100});
  CHECK(px.x == doctest::Approx(520.0));
  CHECK(px.y == doctest::Approx(440.0));
}

TEST_CASE("project: behind the camera") {
  const TsaiCamera c = worked_example();
  for (double z : {0.0, -5.0, 1e-7}) {
    try {
      project(c, {1, 1, z});
      FAIL("expected BehindCamera");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::BehindCamera);
    }
    CHECK_FALSE(Projector(c)({1, 1, z}).has_value());
  }
}

TEST_CASE("distortion solve") {
  const DistortionSolve s0 = solve_distorted_radius(3.25, 0.0);
  CHECK(s0.converged);
  CHECK(s0.r_d == 3.25);

  // Pairs with |k| r_u^2 < 0.5 of both signs. For k < 0 the forward map
  // r (1 + k r^2) peaks at r* = 1/sqrt(-3k); beyond that peak there is no
  // distorted radius and the solver must say so instead of returning junk.
  std::mt19937_64 g(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int solved = 0, rejected = 0;
  for (int i = 0; i < 1000; ++i) {
    const double r_u = 10.0 * std::abs(u(g));
    const double k = r_u > 0 ? 0.5 * u(g) / (r_u * r_u) : 0.0;
    const DistortionSolve s = solve_distorted_radius(r_u, k);
    const bool has_root = k >= 0.0 || r_u <= (2.0 / 3.0) / std::sqrt(-3.0 * k);
    CHECK(s.converged == has_root);
    if (!s.converged) {
      ++rejected;
      continue;
    }
    ++solved;
    CHECK(std::abs(s.r_d * (1 + k * s.r_d * s.r_d) - r_u) < 1e-9);
    if (k < 0.0) CHECK(s.r_d <= 1.0 / std::sqrt(-3.0 * k) + 1e-12);  // physical branch
  }
  CHECK(solved > 600);
  CHECK(rejected > 0);

  TsaiCamera c = worked_example();
  c.kappa = -1.0;
  try {
    project(c, {20, 0, 100});
    FAIL("expected OutsideLensDomain");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OutsideLensDomain);
  }
}

TEST_CASE("project: distortion round trip and consistency properties") {
  TsaiCamera c = worked_example();
  c.kappa = 2e-3;
  const Projector proj(c);
  std::mt19937_64 g(4);
  std::uniform_real_distribution<double> xy(-30.0, 30.0), z(50.0, 500.0);
  for (int i = 0; i < 200; ++i) {
    const Point3 p{xy(g), xy(g), z(g)};
    const PixelCoord a = project(c, p);
    const auto b = proj(p);
    REQUIRE(b.has_value());
    CHECK(a.x == doctest::Approx(b->x).epsilon(1e-12));
    CHECK(a.y == doctest::Approx(b->y).epsilon(1e-12));
    // Re-apply the forward distortion model to the pixel and recover the ideal point.
    const double xd = (a.x - c.c_x) * c.d_px / c.s_x, yd = (a.y - c.c_y) * c.d_py;
    const double r2 = xd * xd + yd * yd;
    CHECK(std::abs(xd * (1 + c.kappa * r2) - c.f * p.x / p.z) < 1e-9);
    CHECK(std::abs(yd * (1 + c.kappa * r2) - c.f * p.y / p.z) < 1e-9);
  }

  const TsaiCamera k0 = worked_example();
  for (int i = 0; i < 100; ++i) {
    const Point3 p{xy(g), xy(g), z(g)};
    const PixelCoord a = project(k0, p), b = project(k0, p * 2.0);
    CHECK(a.x == doctest::Approx(b.x).epsilon(1e-12));
    CHECK(a.y == doctest::Approx(b.y).epsilon(1e-12));
    CHECK(project(k0, p + Point3{0.01, 0, 0}).x > a.x);
  }
}

TEST_CASE("look_at and rig files") {
  TsaiCamera intr = worked_example();
  intr.kappa = 1e-4;
  const TsaiCamera c = look_at({3000, 0, 1200}, {0, 0, 900}, {0, 0, 1}, intr);
  const PixelCoord centre = project(c, {0, 0, 900});
  CHECK(centre.x == doctest::Approx(320.0));
  CHECK(centre.y == doctest::Approx(240.0));
  CHECK(project(c, {0, 0, 1500}).y < centre.y);  // world up is image up

  const auto path = std::filesystem::temp_directory_path() / "mocaplab_rig_test.json";
  save_rig(path.string(), {c, intr});
  const auto rig = load_rig(path.string());
  REQUIRE(rig.size() == 2);
  CHECK(rig[0].r_x == c.r_x);
  CHECK(rig[0].t_z == c.t_z);
  CHECK(rig[1].kappa == intr.kappa);
  std::filesystem::remove(path);

  TsaiCamera bad = worked_example();
  bad.f = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}
