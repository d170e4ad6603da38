#include <doctest.h>

#include <random>
#include <set>

#include "mocaplab/render.hpp"
#include "oracles.hpp"

using namespace mocap;

namespace {

ScreenTriangle tri(Vec2 a, Vec2 b, Vec2 c, int label = 1, double depth = 0.0, int part = 0) {
  return {{a, b, c}, label, depth, part};
}

ScreenTriangle random_triangle(std::mt19937_64& g, int w, int h, bool lattice) {
  std::uniform_real_distribution<double> x(-8.0, w + 8.0), y(-8.0, h + 8.0);
  auto pick = [&] {
    Vec2 v{x(g), y(g)};
    if (lattice) v = {std::floor(v.x), std::floor(v.y)};
    return v;
  };
  return tri(pick(), pick(), pick());
}

/// Random scene: parts of two triangles sharing a diagonal, plus their outlines.
void random_scene(std::mt19937_64& g, int w, int h, int parts, std::vector<ScreenTriangle>& tris,
                  std::vector<Outline>& lines) {
  std::uniform_real_distribution<double> x(-4.0, w + 4.0), y(-4.0, h + 4.0), d(100.0, 200.0);
  std::uniform_int_distribution<int> depth_bucket(0, 3);
  for (int p = 0; p < parts; ++p) {
    const Vec2 q[4] = {{x(g), y(g)}, {x(g), y(g)}, {x(g), y(g)}, {x(g), y(g)}};
    const double depth = depth_bucket(g) == 0 ? 150.0 : d(g);  // some exact ties
    const int label = 1 + (p * 37) % 127;
    tris.push_back(tri(q[0], q[1], q[2], label, depth, p));
    tris.push_back(tri(q[0], q[2], q[3], label, depth, p));
    for (int k = 0; k < 4; ++k) lines.push_back({to_pixel(q[k]), to_pixel(q[(k + 1) % 4]), label, depth, p});
  }
}

}  // namespace

TEST_CASE("triangle_aabb") {
  const RoiRect full{0, 0, 16, 16};
  CHECK(triangle_aabb(tri({1, 5}, {3, 2}, {2, 7}), full) == Aabb{1, 3, 2, 7});
  CHECK(triangle_aabb(tri({20, 20}, {30, 22}, {25, 30}), full).empty());
  CHECK(triangle_aabb(tri({-5, 3}, {10, -2}, {4, 40}), full) == Aabb{0, 10, 0, 15});
  CHECK(triangle_aabb(tri({1.2, 1.7}, {3.5, 2.1}, {2.2, 4.9}), RoiRect{2, 0, 4, 4}) == Aabb{2, 4, 1, 3});
}

TEST_CASE("point_in_triangle") {
  const ScreenTriangle t = tri({0, 0}, {4, 0}, {0, 4});
  CHECK(point_in_triangle(4.0 / 3, 4.0 / 3, t));
  CHECK_FALSE(point_in_triangle(5, 5, t));
  CHECK(point_in_triangle(0, 0, t));
  CHECK(point_in_triangle(2, 2, t));  // on the hypotenuse
  CHECK_FALSE(point_in_triangle(0, 0, tri({0, 0}, {1, 1}, {2, 2})));
  // Winding does not matter.
  CHECK(point_in_triangle(1, 1, tri({0, 0}, {0, 4}, {4, 0})));
}

TEST_CASE("bresenham") {
  CHECK(bresenham({0, 0}, {0, 0}) == std::vector<PixelPos>{{0, 0}});
  CHECK(bresenham({0, 0}, {3, 0}) == std::vector<PixelPos>{{0, 0}, {1, 0}, {2, 0}, {3, 0}});
  const auto s = bresenham({0, 0}, {5, 3});
  CHECK(s.size() == 6);
  CHECK(s == oracle::dda({0, 0}, {5, 3}));

  std::mt19937_64 g(3);
  std::uniform_int_distribution<int> c(-20, 20);
  int compared = 0;
  for (int i = 0; i < 2000; ++i) {
    const PixelPos a{c(g), c(g)}, b{c(g), c(g)};
    const auto fwd = bresenham(a, b), back = bresenham(b, a);
    CHECK(fwd == back);
    CHECK(fwd.front() == std::min(a, b));
    CHECK(fwd.back() == std::max(a, b));
    for (std::size_t k = 1; k < fwd.size(); ++k) {
      CHECK(std::abs(fwd[k].x - fwd[k - 1].x) <= 1);
      CHECK(std::abs(fwd[k].y - fwd[k - 1].y) <= 1);
    }
    if (!oracle::dda_has_tie(a, b)) {
      CHECK(fwd == oracle::dda(a, b));
      ++compared;
    }
  }
  CHECK(compared > 1000);
}

TEST_CASE("single triangle fill matches exhaustive tests") {
  std::vector<Outline> none;
  {
    std::vector<ScreenTriangle> t{tri({0, 0}, {3, 0}, {0, 3})};
    EncodedImage img(8, 8, 0);
    rasterize_pose(t, none, full_roi(8, 8), img);
    int n = 0;
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        const bool want = x + y <= 3;
        CHECK((img(x, y) == 1) == want);
        n += img(x, y) != 0;
      }
    CHECK(n == 10);
  }

  std::mt19937_64 g(1234);
  for (int i = 0; i < 300; ++i) {
    const bool lattice = i % 3 == 0;
    std::vector<ScreenTriangle> t{random_triangle(g, 64, 64, lattice)};
    const ScreenTriangle copy = t[0];
    EncodedImage img(64, 64, 0);
    rasterize_pose(t, none, full_roi(64, 64), img);
    int mismatches = 0, textbook = 0;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        const bool got = img(x, y) != 0;
        mismatches += got != point_in_triangle(x, y, copy);
        if (!lattice) textbook += got != oracle::inside(x, y, copy);
      }
    CHECK(mismatches == 0);
    CHECK(textbook == 0);
  }
}

TEST_CASE("occlusion order and empty input") {
  std::vector<Outline> none;
  std::vector<ScreenTriangle> t{tri({0, 0}, {6, 0}, {0, 6}, 5, 2.0, 1), tri({0, 0}, {6, 0}, {0, 6}, 9, 1.0, 0)};
  EncodedImage img(8, 8, 0);
  rasterize_pose(t, none, full_roi(8, 8), img);
  CHECK(img(1, 1) == 9);

  std::vector<ScreenTriangle> empty;
  EncodedImage blank(8, 8, 0);
  rasterize_pose(empty, none, full_roi(8, 8), blank);
  for (auto v : blank.data()) CHECK(v == 0);
}

TEST_CASE("reverse painter equals forward painter, outlines follow the rule") {
  std::mt19937_64 g(77);
  for (int s = 0; s < 60; ++s) {
    std::vector<ScreenTriangle> tris;
    std::vector<Outline> lines;
    random_scene(g, 40, 30, 1 + s % 6, tris, lines);

    EncodedImage expect = oracle::forward_paint(tris, 40, 30);
    std::vector<Outline> no_lines;
    auto t1 = tris;
    EncodedImage fills(40, 30, 0);
    rasterize_pose(t1, no_lines, full_roi(40, 30), fills);
    CHECK(fills == expect);

    oracle::paint_outlines(expect, lines);
    auto t2 = tris;
    auto l2 = lines;
    EncodedImage full(40, 30, 0);
    rasterize_pose(t2, l2, full_roi(40, 30), full);
    CHECK(full == expect);

    // Every edge pixel sits next to (or on) a pixel of its own label.
    for (int y = 0; y < 30; ++y)
      for (int x = 0; x < 40; ++x) {
        if (!(full(x, y) & kFlagBit)) continue;
        const int label = full(x, y) & kPayloadMask;
        CHECK(label != 0);
        bool found = false;
        for (int dy = -1; dy <= 1 && !found; ++dy)
          for (int dx = -1; dx <= 1 && !found; ++dx) {
            const int u = x + dx, v = y + dy;
            if (u >= 0 && v >= 0 && u < 40 && v < 30 && (full(u, v) & kPayloadMask) == label) found = true;
          }
        CHECK(found);
      }
  }
}

TEST_CASE("fused accumulation equals two-pass components, ROI respected") {
  std::mt19937_64 g(31);
  std::uniform_int_distribution<int> byte(0, 255);
  for (int s = 0; s < 80; ++s) {
    std::vector<ScreenTriangle> tris;
    std::vector<Outline> lines;
    random_scene(g, 48, 36, 1 + s % 7, tris, lines);
    EncodedImage ref(48, 36, 0);
    for (auto& v : ref.data()) v = static_cast<std::uint8_t>(byte(g));
    const RoiRect roi = s % 2 ? RoiRect{5, 3, 30, 25} : full_roi(48, 36);

    EncodedImage fused(48, 36, 0xAB);  // junk outside the ROI must survive
    FitnessComponents acc;
    auto t = tris;
    auto l = lines;
    rasterize_pose(t, l, roi, fused, &ref, &acc);

    FitnessComponents expect = oracle::count_components(fused, ref, roi);
    expect.area_ref = 0;  // the fused pass leaves area_ref to the caller
    CHECK(acc == expect);
    for (int y = 0; y < 36; ++y)
      for (int x = 0; x < 48; ++x)
        if (x < roi.x || y < roi.y || x >= roi.x_end() || y >= roi.y_end()) CHECK(fused(x, y) == 0xAB);

    // Inside the ROI the image equals a full render cropped to it.
    EncodedImage whole(48, 36, 0);
    auto t2 = tris;
    auto l2 = lines;
    rasterize_pose(t2, l2, full_roi(48, 36), whole);
    for (int y = roi.y; y < roi.y_end(); ++y)
      for (int x = roi.x; x < roi.x_end(); ++x) {
        // Outlines that leave the ROI can claim pixels differently only outside it.
        CHECK((fused(x, y) & kPayloadMask) == (whole(x, y) & kPayloadMask));
      }
  }
}

TEST_CASE("render_pose is deterministic and stays in view") {
  const SkeletonModel model = load_model(std::string(MOCAPLAB_DATA_DIR) + "/model.json");
  TsaiCamera intr;
  intr.f = 7;
  intr.d_px = intr.d_py = 0.05;
  intr.c_x = 80;
  intr.c_y = 60;
  intr.img_w = 160;
  intr.img_h = 120;
  const TsaiCamera cam = look_at({3000, 0, 1200}, {0, 0, 900}, {0, 0, 1}, intr);
  EncodedImage a, b;
  REQUIRE(render_pose(model.bind_state(), model, Projector(cam), a));
  REQUIRE(render_pose(model.bind_state(), model, Projector(cam), b));
  CHECK(a == b);
  int painted = 0, edges = 0;
  for (auto v : a.data()) {
    painted += (v & kPayloadMask) != 0;
    edges += (v & kFlagBit) != 0;
  }
  CHECK(painted > 200);
  CHECK(edges > 50);
  const GrayImage view = model_debug_view(a);
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(view.data()[i] == ((a.data()[i] & kFlagBit) ? 255 : (a.data()[i] & kPayloadMask) * 2));

  PoseState far = model.bind_state();
  far[0] = 5000;  // pelvis beyond the camera
  EncodedImage c;
  CHECK_FALSE(render_pose(far, model, Projector(cam), c));
}
