#include "mocaplab/geometry.hpp"

#include <algorithm>

#include "mocaplab/error.hpp"

namespace mocap {

Mat4 rotation(Axis axis, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Mat4 r = Mat4::identity();
  switch (axis) {
    case Axis::X:
      r(1, 1) = c; r(1, 2) = -s;
      r(2, 1) = s; r(2, 2) = c;
      break;
    case Axis::Y:
      r(0, 0) = c; r(0, 2) = s;
      r(2, 0) = -s; r(2, 2) = c;
      break;
    case Axis::Z:
      r(0, 0) = c; r(0, 1) = -s;
      r(1, 0) = s; r(1, 1) = c;
      break;
  }
  return r;
}

Mat4 translation(const Point3& t) {
  Mat4 r = Mat4::identity();
  r(0, 3) = t.x;
  r(1, 3) = t.y;
  r(2, 3) = t.z;
  return r;
}

Mat4 scale(const Point3& s) {
  Mat4 r = Mat4::identity();
  r(0, 0) = s.x;
  r(1, 1) = s.y;
  r(2, 2) = s.z;
  return r;
}

Mat4 multiply(const Mat4& a, const Mat4& b) {
  Mat4 r;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) acc += a(i, k) * b(k, j);
      r(i, j) = acc;
    }
  }
  return r;
}

Mat4 transpose(const Mat4& a) {
  Mat4 r;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) r(i, j) = a(j, i);
  return r;
}

Mat4 rigid_inverse(const Mat4& a) {
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double d = 0.0;
      for (int k = 0; k < 3; ++k) d += a(i, k) * a(j, k);
      if (std::abs(d - (i == j ? 1.0 : 0.0)) > 1e-9)
        throw Error(ErrorCode::NotRigid, "rotation block is not orthonormal");
    }
  }
  if (a(3, 0) != 0.0 || a(3, 1) != 0.0 || a(3, 2) != 0.0 || a(3, 3) != 1.0)
    throw Error(ErrorCode::NotRigid, "bottom row is not [0 0 0 1]");

  Mat4 r = Mat4::identity();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = a(j, i);
  for (int i = 0; i < 3; ++i) r(i, 3) = -(r(i, 0) * a(0, 3) + r(i, 1) * a(1, 3) + r(i, 2) * a(2, 3));
  return r;
}

Mat4 fused_trxyz(const Point3& t, double alpha, double beta, double gamma) {
  const double ca = std::cos(alpha), sa = std::sin(alpha);
  const double cb = std::cos(beta), sb = std::sin(beta);
  const double cg = std::cos(gamma), sg = std::sin(gamma);
  Mat4 r;
  r.m = {cb * cg,                -cb * sg,                sb,       t.x,
         ca * sg + sa * sb * cg, ca * cg - sa * sb * sg,  -sa * cb, t.y,
         sa * sg - ca * sb * cg, sa * cg + ca * sb * sg,  ca * cb,  t.z,
         0.0,                    0.0,                     0.0,      1.0};
  return r;
}

Point3 transform_point(const Mat4& a, const Point3& p) {
  return {a(0, 0) * p.x + a(0, 1) * p.y + a(0, 2) * p.z + a(0, 3),
          a(1, 0) * p.x + a(1, 1) * p.y + a(1, 2) * p.z + a(1, 3),
          a(2, 0) * p.x + a(2, 1) * p.y + a(2, 2) * p.z + a(2, 3)};
}

Point3 transform_direction(const Mat4& a, const Point3& d) {
  return {a(0, 0) * d.x + a(0, 1) * d.y + a(0, 2) * d.z,
          a(1, 0) * d.x + a(1, 1) * d.y + a(1, 2) * d.z,
          a(2, 0) * d.x + a(2, 1) * d.y + a(2, 2) * d.z};
}

std::array<double, 16> to_column_major(const Mat4& a) { return transpose(a).m; }

Mat4 from_column_major(const std::array<double, 16>& cm) {
  Mat4 r;
  r.m = cm;
  return transpose(r);
}

double max_abs_diff(const Mat4& a, const Mat4& b) {
  double d = 0.0;
  for (int i = 0; i < 16; ++i) d = std::max(d, std::abs(a.m[i] - b.m[i]));
  return d;
}

}  // namespace mocap
