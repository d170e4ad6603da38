#pragma once

#include <array>
#include <cmath>

namespace mocap {

/// 3D point or direction in millimetres, world or bone-local space.
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Point3 operator+(const Point3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Point3 operator-(const Point3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Point3 operator-() const { return {-x, -y, -z}; }
  constexpr Point3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr bool operator==(const Point3&) const = default;
};

constexpr double dot(const Point3& a, const Point3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Point3 cross(const Point3& a, const Point3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Point3& a) { return std::sqrt(dot(a, a)); }

enum class Axis { X, Y, Z };

/// 4x4 homogeneous transform acting on column points, stored row-major:
/// element (row, col) lives at m[row * 4 + col].
struct Mat4 {
  std::array<double, 16> m{};

  constexpr double operator()(int row, int col) const { return m[row * 4 + col]; }
  constexpr double& operator()(int row, int col) { return m[row * 4 + col]; }
  constexpr bool operator==(const Mat4&) const = default;

  static constexpr Mat4 identity() {
    Mat4 r;
    r.m = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
    return r;
  }

  Point3 translation_part() const { return {m[3], m[7], m[11]}; }
};

Mat4 rotation(Axis axis, double angle);
Mat4 translation(const Point3& t);
Mat4 scale(const Point3& s);
Mat4 multiply(const Mat4& a, const Mat4& b);
inline Mat4 operator*(const Mat4& a, const Mat4& b) { return multiply(a, b); }
Mat4 transpose(const Mat4& a);

/// Inverse of a rotation+translation matrix as [R^T, -R^T t].
/// Throws Error{NotRigid} when the 3x3 block is not orthonormal within 1e-9
/// or the bottom row is not [0 0 0 1].
Mat4 rigid_inverse(const Mat4& a);

/// translation(t) * R_x(alpha) * R_y(beta) * R_z(gamma), expanded in closed form.
Mat4 fused_trxyz(const Point3& t, double alpha, double beta, double gamma);

Point3 transform_point(const Mat4& a, const Point3& p);
Point3 transform_direction(const Mat4& a, const Point3& d);

/// Column-major flattening (the layout GPU APIs expect); equal to transpose of the storage.
std::array<double, 16> to_column_major(const Mat4& a);
Mat4 from_column_major(const std::array<double, 16>& cm);

double max_abs_diff(const Mat4& a, const Mat4& b);

}  // namespace mocap
