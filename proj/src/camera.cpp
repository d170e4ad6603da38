#include "mocaplab/camera.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "mocaplab/error.hpp"

namespace mocap {

namespace {

constexpr double kDistortionTol = 1e-9;
constexpr int kNewtonSteps = 20;

double residual(double r_d, double r_u, double kappa) { return r_d * (1.0 + kappa * r_d * r_d) - r_u; }

}  // namespace

void TsaiCamera::validate() const {
  if (!(f > 0.0)) throw Error(ErrorCode::BadConfig, "camera focal length must be positive");
  if (!(d_px > 0.0) || !(d_py > 0.0)) throw Error(ErrorCode::BadConfig, "pixel pitch must be positive");
  if (img_w < 1 || img_h < 1) throw Error(ErrorCode::BadConfig, "image size must be at least 1x1");
}

DistortionSolve solve_distorted_radius(double r_u, double kappa) {
  DistortionSolve out;
  if (kappa == 0.0 || r_u == 0.0) {
    out.r_d = r_u;
    out.converged = true;
    return out;
  }

  double r = r_u;
  for (int i = 0; i < kNewtonSteps; ++i) {
    const double g = residual(r, r_u, kappa);
    out.iterations = i + 1;
    if (std::abs(g) < kDistortionTol * 1e-3) break;
    const double dg = 1.0 + 3.0 * kappa * r * r;
    if (dg <= 0.0) break;
    r -= g / dg;
  }
  if (r >= 0.0 && std::abs(residual(r, r_u, kappa)) < kDistortionTol) {
    out.r_d = r;
    out.converged = true;
    return out;
  }

  // Bisection on a bracket where g changes sign. g is increasing on
  // [0, r_peak] with r_peak = inf for kappa > 0.
  double lo = 0.0;
  double hi = r_u;
  if (kappa < 0.0) {
    hi = std::sqrt(-1.0 / (3.0 * kappa));
    if (residual(hi, r_u, kappa) < 0.0) {
      out.r_d = hi;
      out.converged = false;
      return out;
    }
  }
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (residual(mid, r_u, kappa) < 0.0)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-15) break;
  }
  out.r_d = 0.5 * (lo + hi);
  out.converged = std::abs(residual(out.r_d, r_u, kappa)) < kDistortionTol;
  return out;
}

Mat4 extrinsic_matrix(const TsaiCamera& cam) {
  return fused_trxyz({cam.t_x, cam.t_y, cam.t_z}, cam.r_x, cam.r_y, cam.r_z);
}

Point3 world_to_camera(const TsaiCamera& cam, const Point3& p_w) {
  return transform_point(extrinsic_matrix(cam), p_w);
}

namespace {

std::optional<PixelCoord> project_camera_point(const TsaiCamera& cam, const Point3& p_k, ErrorCode* why) {
  if (!(p_k.z > kMinDepth)) {
    if (why) *why = ErrorCode::BehindCamera;
    return std::nullopt;
  }
  const double x_u = cam.f * p_k.x / p_k.z;
  const double y_u = cam.f * p_k.y / p_k.z;
  double x_d = x_u;
  double y_d = y_u;
  if (cam.kappa != 0.0) {
    const double r_u = std::hypot(x_u, y_u);
    if (r_u > 0.0) {
      const DistortionSolve s = solve_distorted_radius(r_u, cam.kappa);
      if (!s.converged) {
        if (why) *why = ErrorCode::OutsideLensDomain;
        return std::nullopt;
      }
      const double ratio = s.r_d / r_u;
      x_d = x_u * ratio;
      y_d = y_u * ratio;
    }
  }
  return PixelCoord{cam.s_x * x_d / cam.d_px + cam.c_x, y_d / cam.d_py + cam.c_y, p_k.z};
}

}  // namespace

PixelCoord project(const TsaiCamera& cam, const Point3& p_w) {
  ErrorCode why = ErrorCode::BehindCamera;
  auto px = project_camera_point(cam, world_to_camera(cam, p_w), &why);
  if (!px) throw Error(why, "point cannot be projected");
  return *px;
}

Projector::Projector(const TsaiCamera& cam) : cam_(cam), extrinsic_(extrinsic_matrix(cam)) {
  position_ = transform_point(rigid_inverse(extrinsic_), {0.0, 0.0, 0.0});
}

std::optional<PixelCoord> Projector::operator()(const Point3& p_w) const {
  return project_camera_point(cam_, to_camera(p_w), nullptr);
}

TsaiCamera look_at(const Point3& eye, const Point3& target, const Point3& up, TsaiCamera intr) {
  const Point3 fwd = (target - eye) * (1.0 / norm(target - eye));
  Point3 right = cross(fwd, up);
  right = right * (1.0 / norm(right));
  const Point3 down = cross(fwd, right);
  // Rows of R are the camera axes in world coordinates; decompose
  // R = R_x(a) R_y(b) R_z(c): R02 = sin b, R12 = -sin a cos b, R01 = -cos b sin c.
  const double r00 = right.x, r01 = right.y, r02 = right.z;
  const double r12 = down.z, r22 = fwd.z;
  intr.r_y = std::asin(std::clamp(r02, -1.0, 1.0));
  intr.r_x = std::atan2(-r12, r22);
  intr.r_z = std::atan2(-r01, r00);
  const Mat4 rot = fused_trxyz({}, intr.r_x, intr.r_y, intr.r_z);
  const Point3 t = -transform_point(rot, eye);
  intr.t_x = t.x;
  intr.t_y = t.y;
  intr.t_z = t.z;
  return intr;
}

namespace {

using nlohmann::json;

TsaiCamera camera_from_json(const json& j) {
  TsaiCamera c;
  c.r_x = j.at("r_x").get<double>();
  c.r_y = j.at("r_y").get<double>();
  c.r_z = j.at("r_z").get<double>();
  c.t_x = j.at("t_x").get<double>();
  c.t_y = j.at("t_y").get<double>();
  c.t_z = j.at("t_z").get<double>();
  c.f = j.at("f").get<double>();
  c.kappa = j.at("kappa").get<double>();
  c.c_x = j.at("c_x").get<double>();
  c.c_y = j.at("c_y").get<double>();
  c.s_x = j.at("s_x").get<double>();
  c.d_px = j.at("d_px").get<double>();
  c.d_py = j.at("d_py").get<double>();
  c.img_w = j.at("img_w").get<int>();
  c.img_h = j.at("img_h").get<int>();
  c.validate();
  return c;
}

json camera_to_json(const TsaiCamera& c) {
  return json{{"r_x", c.r_x}, {"r_y", c.r_y}, {"r_z", c.r_z}, {"t_x", c.t_x},   {"t_y", c.t_y},
              {"t_z", c.t_z}, {"f", c.f},     {"kappa", c.kappa}, {"c_x", c.c_x}, {"c_y", c.c_y},
              {"s_x", c.s_x}, {"d_px", c.d_px}, {"d_py", c.d_py}, {"img_w", c.img_w}, {"img_h", c.img_h}};
}

}  // namespace

std::vector<TsaiCamera> load_rig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open rig file " + path);
  json j;
  try {
    in >> j;
    const json& list = j.is_array() ? j : j.at("cameras");
    std::vector<TsaiCamera> cams;
    for (const auto& c : list) cams.push_back(camera_from_json(c));
    if (cams.empty()) throw Error(ErrorCode::BadConfig, "rig has no cameras");
    return cams;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadConfig, path + ": " + e.what());
  }
}

void save_rig(const std::string& path, const std::vector<TsaiCamera>& cams) {
  json list = json::array();
  for (const auto& c : cams) list.push_back(camera_to_json(c));
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << json{{"cameras", list}}.dump(2) << "\n";
}

}  // namespace mocap
