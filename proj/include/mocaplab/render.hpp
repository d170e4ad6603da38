#pragma once

#include <array>
#include <vector>

#include "mocaplab/camera.hpp"
#include "mocaplab/fitness.hpp"
#include "mocaplab/image.hpp"
#include "mocaplab/skeleton.hpp"

namespace mocap {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

struct PixelPos {
  int x = 0;
  int y = 0;
  bool operator==(const PixelPos&) const = default;
  auto operator<=>(const PixelPos&) const = default;
};

struct ScreenTriangle {
  std::array<Vec2, 3> v;
  int label = 1;
  double depth = 0.0;  // camera z of the owning part, mm
  int part = 0;        // tie-breaker for equal depths
};

/// Model part boundary segment, drawn after all fills.
struct Outline {
  PixelPos p0;
  PixelPos p1;
  int label = 1;
  double depth = 0.0;
  int part = 0;
};

/// Inclusive integer pixel bounds; empty when lo > hi on either axis.
struct Aabb {
  int x_lo = 0, x_hi = -1;
  int y_lo = 0, y_hi = -1;
  bool empty() const { return x_lo > x_hi || y_lo > y_hi; }
  bool operator==(const Aabb&) const = default;
};

/// floor/ceil of the vertex extremes, intersected with the clip rectangle.
Aabb triangle_aabb(const ScreenTriangle& t, const RoiRect& clip);

/// Boundary-inclusive barycentric test at lattice point (x, y); false for zero-area triangles.
bool point_in_triangle(double x, double y, const ScreenTriangle& t);

/// 8-connected line including both endpoints; endpoints are swapped into
/// lexicographic order first so the pixel set is symmetric.
std::vector<PixelPos> bresenham(PixelPos p0, PixelPos p1);

/// round-half-up of a projected coordinate to the pixel lattice.
PixelPos to_pixel(const Vec2& p);

/// Reverse painter's rasterization into a model image (label in bits 0-6, edge
/// flag in bit 7). Pixels inside `roi` are reset first; nothing outside it is
/// touched. Triangles are filled nearest part first, skipping painted pixels;
/// outlines then flag pixels owned by their part, claiming unpainted ones.
/// With `acc` (and `ref`) set, every newly painted or flagged pixel updates the
/// components in the same pass; area_ref is not touched. Both lists are
/// sorted in place by (depth, part).
void rasterize_pose(std::vector<ScreenTriangle>& triangles, std::vector<Outline>& outlines, const RoiRect& roi,
                    EncodedImage& out, const EncodedImage* ref = nullptr, FitnessComponents* acc = nullptr);

/// Billboards of every flat part projected into one camera.
struct Scene {
  std::vector<ScreenTriangle> triangles;
  std::vector<Outline> outlines;
};

/// Builds the two triangles and four outline segments of each part. Returns
/// false when any vertex cannot be projected (behind the camera or outside
/// the lens domain).
bool project_model(const std::vector<Mat4>& world, const SkeletonModel& model, const Projector& cam, Scene& out);

/// Full-image render of a pose; returns false when the pose cannot be projected.
bool render_pose(const PoseState& pose, const SkeletonModel& model, const Projector& cam, EncodedImage& out);

/// Debug view: label * 2, edge pixels forced to 255.
GrayImage model_debug_view(const EncodedImage& model_img);

}  // namespace mocap
