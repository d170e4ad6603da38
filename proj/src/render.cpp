#include "mocaplab/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

namespace mocap {

Aabb triangle_aabb(const ScreenTriangle& t, const RoiRect& clip) {
  const double min_x = std::min({t.v[0].x, t.v[1].x, t.v[2].x});
  const double max_x = std::max({t.v[0].x, t.v[1].x, t.v[2].x});
  const double min_y = std::min({t.v[0].y, t.v[1].y, t.v[2].y});
  const double max_y = std::max({t.v[0].y, t.v[1].y, t.v[2].y});
  if (clip.empty()) return {};
  // Clamp in double first so far-away vertices cannot overflow int.
  const double cx0 = clip.x, cx1 = clip.x_end() - 1, cy0 = clip.y, cy1 = clip.y_end() - 1;
  Aabb b;
  b.x_lo = static_cast<int>(std::max(std::floor(min_x), cx0));
  b.x_hi = static_cast<int>(std::min(std::ceil(max_x), cx1));
  b.y_lo = static_cast<int>(std::max(std::floor(min_y), cy0));
  b.y_hi = static_cast<int>(std::min(std::ceil(max_y), cy1));
  if (std::floor(min_x) > cx1 || std::ceil(max_x) < cx0 || std::floor(min_y) > cy1 || std::ceil(max_y) < cy0)
    return {};
  return b;
}

namespace {

// Edge-function form of the barycentric test. With e1 = v2 - v1, e2 = v3 - v1,
// w = p - v1: t1 = (w x e2) / (e1 x e2), t2 = (e1 x w) / (e1 x e2).
struct TriangleSetup {
  // Coefficients are pre-multiplied by sign(det). Negating both operands of a
  // product or a difference negates the rounded result exactly, so this equals
  // flipping a, b and det after the fact.
  double ax, ay, c2y, c2x, c1x, c1y, d;
  bool valid;

  explicit TriangleSetup(const ScreenTriangle& t) {
    ax = t.v[0].x;
    ay = t.v[0].y;
    const double e1x = t.v[1].x - ax, e1y = t.v[1].y - ay;
    const double e2x = t.v[2].x - ax, e2y = t.v[2].y - ay;
    const double det = e1x * e2y - e1y * e2x;
    valid = det != 0.0;
    const double s = det < 0.0 ? -1.0 : 1.0;
    c2y = s * e2y;
    c2x = s * e2x;
    c1x = s * e1x;
    c1y = s * e1y;
    d = s * det;
    prepare_bounds();
  }

  // Row-invariant products. Hoisting them leaves every rounding step unchanged.
  struct Row {
    double wy_c2x, c1x_wy;
  };
  Row row(double y) const {
    const double wy = y - ay;
    return {wy * c2x, c1x * wy};
  }

  bool contains_in_row(const Row& r, double x) const {
    const double wx = x - ax;
    const double a = wx * c2y - r.wy_c2x;
    const double b = r.c1x_wy - c1y * wx;
    return (a >= 0.0) & (b >= 0.0) & (a + b <= d);
  }

  bool contains(double x, double y) const { return contains_in_row(row(y), x); }

  // Pixel ranges of one row. Pixels outside [outer_lo, outer_hi] fail the test
  // and pixels inside [inner_lo, inner_hi] pass it: both sit at least one
  // pixel away from the exact edge lines, far beyond any rounding error of the
  // per-pixel test. An edge almost parallel to the row gets no such guarantee,
  // so it leaves the outer range open and the inner range empty.
  struct Span {
    int outer_lo, outer_hi, inner_lo, inner_hi;
  };
  Span span(double y, int x_min, int x_max) const {
    const double wy = y - ay;
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (const EdgeBound& e : bounds) {
      const double x = ax + (wy * e.slope - e.shift);
      if (e.kind > 0)
        lo = std::max(lo, x);
      else if (e.kind < 0)
        hi = std::min(hi, x);
    }
    // Clamp in double so the integer conversions below cannot overflow.
    const double fmin = x_min - 2.0, fmax = x_max + 2.0;
    const double xl = std::clamp(lo, fmin, fmax), xh = std::clamp(hi, fmin, fmax);
    Span s;
    s.outer_lo = std::max(x_min, ceil_int(xl) - 1);
    s.outer_hi = std::min(x_max, floor_int(xh) + 1);
    if (parallel) {
      s.inner_lo = 0;
      s.inner_hi = -1;
    } else {
      s.inner_lo = ceil_int(xl) + 1;
      s.inner_hi = floor_int(xh) - 1;
    }
    return s;
  }

  // Edge inequality k * wx >= c(wy) rewritten as a bound on x that moves
  // linearly with the row: x = ax + wy * slope - shift.
  struct EdgeBound {
    int kind = 0;  // +1 lower bound, -1 upper bound, 0 nearly parallel to the row
    double slope = 0.0, shift = 0.0;
  };
  EdgeBound bounds[3];
  bool parallel = false;

  void prepare_bounds() {
    const double eps = 1e-6 * std::max({std::abs(c1x), std::abs(c1y), std::abs(c2x), std::abs(c2y)});
    auto make = [&](double k, double p, double q) {  // k * wx >= wy * p - q
      EdgeBound e;
      if (k > eps || k < -eps) {
        e.kind = k > 0.0 ? 1 : -1;
        e.slope = p / k;
        e.shift = q / k;
      } else {
        parallel = true;
      }
      return e;
    };
    bounds[0] = make(c2y, c2x, 0.0);
    bounds[1] = make(-c1y, -c1x, 0.0);
    bounds[2] = make(c1y - c2y, c1x - c2x, d);
  }

  static int floor_int(double v) {
    const int i = static_cast<int>(v);
    return i > v ? i - 1 : i;
  }
  static int ceil_int(double v) {
    const int i = static_cast<int>(v);
    return i < v ? i + 1 : i;
  }
};

}  // namespace

bool point_in_triangle(double x, double y, const ScreenTriangle& t) {
  const TriangleSetup s(t);
  return s.valid && s.contains(x, y);
}

namespace {

template <typename Visit>
void walk_line(PixelPos p0, PixelPos p1, Visit&& visit) {
  if (p1 < p0) std::swap(p0, p1);
  const int dx = std::abs(p1.x - p0.x);
  const int dy = -std::abs(p1.y - p0.y);
  const int sx = p0.x < p1.x ? 1 : -1;
  const int sy = p0.y < p1.y ? 1 : -1;
  int err = dx + dy;
  int x = p0.x, y = p0.y;
  while (true) {
    visit(x, y);
    if (x == p1.x && y == p1.y) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
  }
}

}  // namespace

std::vector<PixelPos> bresenham(PixelPos p0, PixelPos p1) {
  std::vector<PixelPos> out;
  out.reserve(static_cast<std::size_t>(std::max(std::abs(p1.x - p0.x), std::abs(p1.y - p0.y))) + 1);
  walk_line(p0, p1, [&](int x, int y) { out.push_back({x, y}); });
  return out;
}

PixelPos to_pixel(const Vec2& p) {
  return {static_cast<int>(std::floor(p.x + 0.5)), static_cast<int>(std::floor(p.y + 0.5))};
}

namespace {

template <typename T>
bool nearer(const T& a, const T& b) {
  return a.depth != b.depth ? a.depth < b.depth : a.part < b.part;
}

// Stable and allocation-free; scenes hold a few dozen primitives.
template <typename T>
void insertion_sort(std::vector<T>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    T key = v[i];
    std::size_t j = i;
    for (; j > 0 && nearer(key, v[j - 1]); --j) v[j] = v[j - 1];
    v[j] = key;
  }
}

}  // namespace

void rasterize_pose(std::vector<ScreenTriangle>& triangles, std::vector<Outline>& outlines, const RoiRect& roi_in,
                    EncodedImage& out, const EncodedImage* ref, FitnessComponents* acc) {
  const RoiRect roi = clamp_roi(roi_in, out.width(), out.height());
  for (int y = roi.y; y < roi.y_end(); ++y) std::fill(out.row(y) + roi.x, out.row(y) + roi.x_end(), 0);
  if (roi.empty()) return;
  const bool accumulate = acc != nullptr && ref != nullptr;
  // Local counters: stores into the byte image may alias *acc, which would
  // otherwise force a reload of every counter per pixel.
  std::int64_t area_model = 0, overlap = 0, edge_count = 0, distance_q = 0;

  insertion_sort(triangles);
  // Consecutive triangles of one part (same label and depth) are filled in a
  // single sweep over their joint bounding box. Within such a group the order
  // of the triangles cannot change the result: every pixel gets the same label.
  std::size_t next = 0;
  std::vector<TriangleSetup> group;
  while (next < triangles.size()) {
    const ScreenTriangle& head = triangles[next];
    group.clear();
    Aabb box;
    std::size_t end = next;
    for (; end < triangles.size(); ++end) {
      const ScreenTriangle& t = triangles[end];
      if (t.part != head.part || t.label != head.label || t.depth != head.depth) break;
      const TriangleSetup setup(t);
      if (!setup.valid) continue;
      const Aabb b = triangle_aabb(t, roi);
      if (b.empty()) continue;
      box = group.empty() ? b : Aabb{std::min(box.x_lo, b.x_lo), std::max(box.x_hi, b.x_hi),
                                     std::min(box.y_lo, b.y_lo), std::max(box.y_hi, b.y_hi)};
      group.push_back(setup);
    }
    next = end;
    if (group.empty()) continue;
    const auto label = static_cast<std::uint8_t>(head.label & kPayloadMask);
    TriangleSetup::Row rows[2];
    TriangleSetup::Span spans[2];
    for (std::size_t g0 = 0; g0 < group.size(); g0 += 2) {
      const std::size_t n = std::min<std::size_t>(group.size() - g0, 2);
      for (int y = box.y_lo; y <= box.y_hi; ++y) {
        int x_lo = box.x_hi + 1, x_hi = box.x_lo - 1;
        for (std::size_t g = 0; g < n; ++g) {
          rows[g] = group[g0 + g].row(y);
          spans[g] = group[g0 + g].span(y, box.x_lo, box.x_hi);
          x_lo = std::min(x_lo, spans[g].outer_lo);
          x_hi = std::max(x_hi, spans[g].outer_hi);
        }
        std::uint8_t* row = out.row(y);
        const std::uint8_t* ref_row = accumulate ? ref->row(y) : nullptr;
        auto hit = [&](std::size_t g, int x) {
          const TriangleSetup::Span& sp = spans[g];
          if (x < sp.outer_lo || x > sp.outer_hi) return false;
          return (x >= sp.inner_lo && x <= sp.inner_hi) || group[g0 + g].contains_in_row(rows[g], x);
        };
        for (int x = x_lo; x <= x_hi; ++x) {
          if (row[x] != 0) continue;
          if (!hit(0, x) && (n < 2 || !hit(1, x))) continue;
          row[x] = label;
          if (accumulate) {
            ++area_model;
            overlap += ref_row[x] >> 7;
          }
        }
      }
    }
  }

  insertion_sort(outlines);
  for (const Outline& o : outlines) {
    const auto label = static_cast<std::uint8_t>(o.label & kPayloadMask);
    walk_line(o.p0, o.p1, [&](int x, int y) {
      if (x < roi.x || x >= roi.x_end() || y < roi.y || y >= roi.y_end()) return;
      std::uint8_t& px = out(x, y);
      if (px == 0) {
        px = static_cast<std::uint8_t>(label | kFlagBit);
        if (accumulate) {
          const std::uint8_t r = (*ref)(x, y);
          ++area_model;
          overlap += r >> 7;
          ++edge_count;
          distance_q += r & kPayloadMask;
        }
      } else if (px == label) {
        px = static_cast<std::uint8_t>(label | kFlagBit);
        if (accumulate) {
          ++edge_count;
          distance_q += (*ref)(x, y) & kPayloadMask;
        }
      }
    });
  }
  if (accumulate) {
    acc->area_model += area_model;
    acc->overlap += overlap;
    acc->edge_count += edge_count;
    acc->distance_q += distance_q;
  }
}

bool project_model(const std::vector<Mat4>& world, const SkeletonModel& model, const Projector& cam, Scene& out) {
  out.triangles.clear();
  out.outlines.clear();
  const Point3 eye = cam.camera_position();
  const auto& parts = model.parts();
  for (int i = 0; i < static_cast<int>(parts.size()); ++i) {
    const FlatPart& part = parts[i];
    const Mat4& w = world[part.bone];
    const Quad quad = billboard_quad(part, w, eye);
    std::array<Vec2, 4> px;
    for (int k = 0; k < 4; ++k) {
      const auto p = cam(quad[k]);
      if (!p) return false;
      px[k] = {p->x, p->y};
    }
    const Point3 mid = (transform_point(w, part.top) + transform_point(w, part.bottom)) * 0.5;
    const double depth = cam.to_camera(mid).z;
    out.triangles.push_back({{px[0], px[1], px[2]}, part.label, depth, i});
    out.triangles.push_back({{px[0], px[2], px[3]}, part.label, depth, i});
    for (int k = 0; k < 4; ++k)
      out.outlines.push_back({to_pixel(px[k]), to_pixel(px[(k + 1) % 4]), part.label, depth, i});
  }
  // Emitting in painter order makes the sort inside rasterize_pose a single pass.
  insertion_sort(out.triangles);
  insertion_sort(out.outlines);
  return true;
}

bool render_pose(const PoseState& pose, const SkeletonModel& model, const Projector& cam, EncodedImage& out) {
  const TsaiCamera& c = cam.camera();
  out = EncodedImage(c.img_w, c.img_h, 0);
  Scene scene;
  if (!project_model(pose_matrices(pose, model), model, cam, scene)) return false;
  rasterize_pose(scene.triangles, scene.outlines, full_roi(c.img_w, c.img_h), out);
  return true;
}

GrayImage model_debug_view(const EncodedImage& model_img) {
  GrayImage out(model_img.width(), model_img.height());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint8_t px = model_img.data()[i];
    out.data()[i] = (px & kFlagBit) ? 255 : static_cast<std::uint8_t>((px & kPayloadMask) * 2);
  }
  return out;
}

}  // namespace mocap
