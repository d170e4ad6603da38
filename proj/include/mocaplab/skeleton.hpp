#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mocaplab/geometry.hpp"

namespace mocap {

/// Slot of a degree of freedom inside a bone's 6-value block of the full state.
enum class Dof { Tx = 0, Ty = 1, Tz = 2, Rx = 3, Ry = 4, Rz = 5 };

inline constexpr int kSlotsPerBone = 6;

/// Optimizer-facing configuration: root translation/rotation followed by every
/// bone's DoF values in bone order.
using PoseState = std::vector<double>;

/// 6 values per bone, zero wherever the bone has no DoF.
using FullState = std::vector<double>;

struct Limit {
  double lo = 0.0;
  double hi = 0.0;
};

struct Bone {
  std::string name;
  int parent = -1;  // -1 for the root
  std::vector<Dof> dofs;
  Point3 offset;             // bind translation from the parent frame, mm
  std::vector<Limit> limits;  // one per entry of dofs
};

/// Camera-facing trapezoid approximating a truncated cone, in bone-local coordinates.
struct FlatPart {
  int bone = 0;
  Point3 top;
  Point3 bottom;
  double top_radius = 1.0;
  double bottom_radius = 1.0;
  int label = 1;  // 7-bit color label, 1..127
};

class SkeletonModel {
 public:
  SkeletonModel() = default;
  /// Validates topology, DoF rules, limits and parts; throws Error{BadConfig}.
  SkeletonModel(std::vector<Bone> bones, std::vector<FlatPart> parts, PoseState bind_state = {});

  const std::vector<Bone>& bones() const { return bones_; }
  const std::vector<FlatPart>& parts() const { return parts_; }
  const PoseState& bind_state() const { return bind_state_; }

  int bone_count() const { return static_cast<int>(bones_.size()); }
  int dof_count() const { return static_cast<int>(dof_slots_.size()); }
  int full_size() const { return bone_count() * kSlotsPerBone; }

  /// Full-state slot index of every PoseState component.
  const std::vector<int>& dof_slots() const { return dof_slots_; }
  /// Joint limits in PoseState order.
  const std::vector<Limit>& limits() const { return limits_; }
  /// PoseState index of the first DoF owned by `bone`, or -1 if it has none.
  int first_dof_of(int bone) const { return first_dof_[bone]; }
  int bone_index(const std::string& name) const;

 private:
  std::vector<Bone> bones_;
  std::vector<FlatPart> parts_;
  PoseState bind_state_;
  std::vector<int> dof_slots_;
  std::vector<Limit> limits_;
  std::vector<int> first_dof_;
};

SkeletonModel load_model(const std::string& path);
void save_model(const std::string& path, const SkeletonModel& model);

/// Throws Error{LengthMismatch} when |s| differs from the model DoF count.
FullState expand_state(const PoseState& s, const SkeletonModel& m);
PoseState collapse_state(const FullState& fs, const SkeletonModel& m);

/// L_i = translation(offset_i + t_i) * R_x R_y R_z of the bone's angles.
std::vector<Mat4> local_matrices(const FullState& fs, const SkeletonModel& m);
/// W_root = L_root, W_i = W_parent(i) * L_i (bones are topologically ordered).
std::vector<Mat4> global_matrices(const std::vector<Mat4>& local, const SkeletonModel& m);
std::vector<Mat4> pose_matrices(const PoseState& s, const SkeletonModel& m);
/// Global matrices of the bind state.
std::vector<Mat4> bind_matrices(const SkeletonModel& m);

inline Point3 skin_point(const Point3& v_local, const Mat4& world) { return transform_point(world, v_local); }
/// Rigid skinning of a bind-pose world point: W * B^-1 * v.
Point3 skin_bind_point(const Point3& v_bind, const Mat4& world, const Mat4& bind);

using Quad = std::array<Point3, 4>;

/// Billboard corners v1..v4 facing `camera`. Throws Error{DegenerateBillboard}
/// when the bone axis points at the camera.
Quad trapezoid_vertices(const FlatPart& part, const Mat4& world, const Point3& camera);

/// Like trapezoid_vertices but never throws: a degenerate axis uses the
/// world x axis projected orthogonal to the bone (world y if x is parallel too).
Quad billboard_quad(const FlatPart& part, const Mat4& world, const Point3& camera);

PoseState clamp_limits(const PoseState& s, const SkeletonModel& m);
void clamp_limits_in_place(PoseState& s, const SkeletonModel& m);

/// Two virtual markers per flat part: skinned top and bottom centers.
std::vector<Point3> marker_positions(const PoseState& s, const SkeletonModel& m);

/// Vertical (world z) extent of the bind-pose markers, mm.
double model_height(const SkeletonModel& m);

std::string dof_name(Dof d);
std::optional<Dof> dof_from_name(const std::string& name);

}  // namespace mocap
