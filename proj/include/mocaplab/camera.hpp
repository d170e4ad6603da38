#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mocaplab/geometry.hpp"

namespace mocap {

/// Calibrated Tsai camera. Extrinsic rotation is R_x(r_x) * R_y(r_y) * R_z(r_z);
/// a world point maps to the camera frame as p_k = R p_w + t. Camera z looks
/// forward, x right, y down in the image.
struct TsaiCamera {
  double r_x = 0.0, r_y = 0.0, r_z = 0.0;  // rad
  double t_x = 0.0, t_y = 0.0, t_z = 0.0;  // mm
  double f = 1.0;                          // mm
  double kappa = 0.0;                      // mm^-2, radial distortion
  double c_x = 0.0, c_y = 0.0;             // px
  double s_x = 1.0;                        // horizontal scale factor
  double d_px = 1.0, d_py = 1.0;           // mm per px
  int img_w = 1, img_h = 1;

  /// Throws Error{BadConfig} on f <= 0, non-positive pitch or empty image.
  void validate() const;
};

struct PixelCoord {
  double x = 0.0;      // px
  double y = 0.0;      // px
  double depth = 0.0;  // mm along camera z
};

struct DistortionSolve {
  double r_d = 0.0;
  bool converged = false;
  int iterations = 0;
};

inline constexpr double kMinDepth = 1e-6;

/// Solves r_d * (1 + kappa * r_d^2) = r_u for the distorted radius. Newton
/// seeded at r_u (tolerance 1e-9 mm, 20 steps) with bisection as fallback.
/// For kappa < 0 and r_u beyond the attainable maximum there is no root and
/// converged is false.
DistortionSolve solve_distorted_radius(double r_u, double kappa);

Mat4 extrinsic_matrix(const TsaiCamera& cam);
Point3 world_to_camera(const TsaiCamera& cam, const Point3& p_w);

/// Throws Error{BehindCamera} when z_k <= 1e-6 mm and
/// Error{OutsideLensDomain} when the distortion has no inverse at that radius.
PixelCoord project(const TsaiCamera& cam, const Point3& p_w);

/// Precomputed projection for hot loops; the non-throwing twin of project().
class Projector {
 public:
  explicit Projector(const TsaiCamera& cam);

  std::optional<PixelCoord> operator()(const Point3& p_w) const;
  Point3 to_camera(const Point3& p_w) const { return transform_point(extrinsic_, p_w); }
  Point3 camera_position() const { return position_; }
  const TsaiCamera& camera() const { return cam_; }

 private:
  TsaiCamera cam_;
  Mat4 extrinsic_;
  Point3 position_;
};

/// Camera at `eye` looking at `target`, world `up` mapping to image-up.
TsaiCamera look_at(const Point3& eye, const Point3& target, const Point3& up, TsaiCamera intrinsics);

std::vector<TsaiCamera> load_rig(const std::string& path);
void save_rig(const std::string& path, const std::vector<TsaiCamera>& cams);

}  // namespace mocap
