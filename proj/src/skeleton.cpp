#include "mocaplab/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "mocaplab/error.hpp"

namespace mocap {

namespace {

constexpr double kDegenerateCross = 1e-9;

bool is_translation(Dof d) { return d == Dof::Tx || d == Dof::Ty || d == Dof::Tz; }

Point3 unit(const Point3& v) { return v * (1.0 / norm(v)); }

}  // namespace

std::string dof_name(Dof d) {
  static const char* names[] = {"t_x", "t_y", "t_z", "r_x", "r_y", "r_z"};
  return names[static_cast<int>(d)];
}

std::optional<Dof> dof_from_name(const std::string& name) {
  for (int i = 0; i < kSlotsPerBone; ++i) {
    if (dof_name(static_cast<Dof>(i)) == name) return static_cast<Dof>(i);
  }
  return std::nullopt;
}

SkeletonModel::SkeletonModel(std::vector<Bone> bones, std::vector<FlatPart> parts, PoseState bind_state)
    : bones_(std::move(bones)), parts_(std::move(parts)), bind_state_(std::move(bind_state)) {
  if (bones_.empty()) throw Error(ErrorCode::BadConfig, "model has no bones");
  first_dof_.assign(bones_.size(), -1);
  for (int i = 0; i < bone_count(); ++i) {
    const Bone& b = bones_[i];
    if (i == 0 && b.parent != -1) throw Error(ErrorCode::BadConfig, "bone 0 must be the root");
    if (i > 0 && (b.parent < 0 || b.parent >= i))
      throw Error(ErrorCode::BadConfig, "bone '" + b.name + "' parent must precede it");
    if (b.limits.size() != b.dofs.size())
      throw Error(ErrorCode::BadConfig, "bone '" + b.name + "' needs one limit per DoF");
    std::array<bool, kSlotsPerBone> seen{};
    for (std::size_t k = 0; k < b.dofs.size(); ++k) {
      const Dof d = b.dofs[k];
      if (i > 0 && is_translation(d))
        throw Error(ErrorCode::BadConfig, "only the root may translate ('" + b.name + "')");
      if (seen[static_cast<int>(d)]) throw Error(ErrorCode::BadConfig, "duplicate DoF in '" + b.name + "'");
      seen[static_cast<int>(d)] = true;
      if (!(b.limits[k].lo <= b.limits[k].hi))
        throw Error(ErrorCode::BadConfig, "inverted limit in '" + b.name + "'");
      if (k == 0) first_dof_[i] = dof_count();
      dof_slots_.push_back(i * kSlotsPerBone + static_cast<int>(d));
      limits_.push_back(b.limits[k]);
    }
  }
  for (const FlatPart& p : parts_) {
    if (p.bone < 0 || p.bone >= bone_count()) throw Error(ErrorCode::BadConfig, "part references unknown bone");
    if (!(p.top_radius > 0.0) || !(p.bottom_radius > 0.0))
      throw Error(ErrorCode::BadConfig, "part radii must be positive");
    if (p.label < 1 || p.label > 127) throw Error(ErrorCode::BadConfig, "part label must be in [1,127]");
  }
  if (bind_state_.empty()) bind_state_.assign(dof_count(), 0.0);
  if (static_cast<int>(bind_state_.size()) != dof_count())
    throw Error(ErrorCode::BadConfig, "bind state length does not match DoF count");
}

int SkeletonModel::bone_index(const std::string& name) const {
  for (int i = 0; i < bone_count(); ++i)
    if (bones_[i].name == name) return i;
  return -1;
}

FullState expand_state(const PoseState& s, const SkeletonModel& m) {
  if (static_cast<int>(s.size()) != m.dof_count())
    throw Error(ErrorCode::LengthMismatch, "pose has " + std::to_string(s.size()) + " values, model expects " +
                                               std::to_string(m.dof_count()));
  FullState fs(m.full_size(), 0.0);
  const auto& slots = m.dof_slots();
  for (std::size_t i = 0; i < s.size(); ++i) fs[slots[i]] = s[i];
  return fs;
}

PoseState collapse_state(const FullState& fs, const SkeletonModel& m) {
  if (static_cast<int>(fs.size()) != m.full_size())
    throw Error(ErrorCode::LengthMismatch, "full state length does not match the model");
  PoseState s(m.dof_count());
  const auto& slots = m.dof_slots();
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = fs[slots[i]];
  return s;
}

std::vector<Mat4> local_matrices(const FullState& fs, const SkeletonModel& m) {
  if (static_cast<int>(fs.size()) != m.full_size())
    throw Error(ErrorCode::LengthMismatch, "full state length does not match the model");
  std::vector<Mat4> out(m.bone_count());
  for (int i = 0; i < m.bone_count(); ++i) {
    const double* v = fs.data() + i * kSlotsPerBone;
    const Point3 t = m.bones()[i].offset + Point3{v[0], v[1], v[2]};
    out[i] = fused_trxyz(t, v[3], v[4], v[5]);
  }
  return out;
}

std::vector<Mat4> global_matrices(const std::vector<Mat4>& local, const SkeletonModel& m) {
  if (static_cast<int>(local.size()) != m.bone_count())
    throw Error(ErrorCode::LengthMismatch, "one local matrix per bone required");
  std::vector<Mat4> out(local.size());
  for (int i = 0; i < m.bone_count(); ++i) {
    const int p = m.bones()[i].parent;
    out[i] = p < 0 ? local[i] : multiply(out[p], local[i]);
  }
  return out;
}

std::vector<Mat4> pose_matrices(const PoseState& s, const SkeletonModel& m) {
  return global_matrices(local_matrices(expand_state(s, m), m), m);
}

std::vector<Mat4> bind_matrices(const SkeletonModel& m) { return pose_matrices(m.bind_state(), m); }

Point3 skin_bind_point(const Point3& v_bind, const Mat4& world, const Mat4& bind) {
  return transform_point(multiply(world, rigid_inverse(bind)), v_bind);
}

namespace {

Quad quad_from(const Point3& top, const Point3& bottom, const Point3& r, const FlatPart& part) {
  return {top + r * part.top_radius, bottom + r * part.bottom_radius, bottom - r * part.bottom_radius,
          top - r * part.top_radius};
}

}  // namespace

Quad trapezoid_vertices(const FlatPart& part, const Mat4& world, const Point3& camera) {
  const Point3 top = transform_point(world, part.top);
  const Point3 bottom = transform_point(world, part.bottom);
  const Point3 r = cross(top - bottom, camera - bottom);
  if (norm(r) < kDegenerateCross) throw Error(ErrorCode::DegenerateBillboard, "bone axis points at the camera");
  return quad_from(top, bottom, unit(r), part);
}

Quad billboard_quad(const FlatPart& part, const Mat4& world, const Point3& camera) {
  const Point3 top = transform_point(world, part.top);
  const Point3 bottom = transform_point(world, part.bottom);
  const Point3 u = top - bottom;
  Point3 r = cross(u, camera - bottom);
  if (norm(r) < kDegenerateCross) {
    const double uu = dot(u, u);
    for (const Point3 axis : {Point3{1, 0, 0}, Point3{0, 1, 0}}) {
      r = uu > 0.0 ? axis - u * (dot(axis, u) / uu) : axis;
      if (norm(r) >= kDegenerateCross) break;
    }
  }
  return quad_from(top, bottom, unit(r), part);
}

void clamp_limits_in_place(PoseState& s, const SkeletonModel& m) {
  if (static_cast<int>(s.size()) != m.dof_count())
    throw Error(ErrorCode::LengthMismatch, "pose length does not match the model");
  const auto& lim = m.limits();
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::clamp(s[i], lim[i].lo, lim[i].hi);
}

PoseState clamp_limits(const PoseState& s, const SkeletonModel& m) {
  PoseState out = s;
  clamp_limits_in_place(out, m);
  return out;
}

std::vector<Point3> marker_positions(const PoseState& s, const SkeletonModel& m) {
  const std::vector<Mat4> world = pose_matrices(s, m);
  std::vector<Point3> out;
  out.reserve(2 * m.parts().size());
  for (const FlatPart& p : m.parts()) {
    out.push_back(skin_point(p.top, world[p.bone]));
    out.push_back(skin_point(p.bottom, world[p.bone]));
  }
  return out;
}

double model_height(const SkeletonModel& m) {
  const auto markers = marker_positions(m.bind_state(), m);
  if (markers.empty()) return 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const Point3& p : markers) {
    lo = std::min(lo, p.z);
    hi = std::max(hi, p.z);
  }
  return hi - lo;
}

namespace {

using nlohmann::json;

Point3 point_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }
json point_to(const Point3& p) { return json::array({p.x, p.y, p.z}); }

}  // namespace

SkeletonModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open model file " + path);
  try {
    json j;
    in >> j;
    std::vector<Bone> bones;
    for (const auto& jb : j.at("bones")) {
      Bone b;
      b.name = jb.at("name").get<std::string>();
      b.parent = jb.at("parent").is_null() ? -1 : jb.at("parent").get<int>();
      for (const auto& d : jb.at("dof")) {
        auto dof = dof_from_name(d.get<std::string>());
        if (!dof) throw Error(ErrorCode::BadConfig, "unknown DoF '" + d.get<std::string>() + "'");
        b.dofs.push_back(*dof);
      }
      b.offset = point_from(jb.at("offset"));
      for (const auto& l : jb.at("limits")) b.limits.push_back({l.at(0).get<double>(), l.at(1).get<double>()});
      bones.push_back(std::move(b));
    }
    std::vector<FlatPart> parts;
    for (const auto& jp : j.at("parts")) {
      FlatPart p;
      p.bone = jp.at("bone").get<int>();
      p.top = point_from(jp.at("t_p"));
      p.bottom = point_from(jp.at("b_p"));
      p.top_radius = jp.at("t_r").get<double>();
      p.bottom_radius = jp.at("b_r").get<double>();
      p.label = jp.at("label").get<int>();
      parts.push_back(p);
    }
    PoseState bind;
    if (j.contains("bind_state")) bind = j.at("bind_state").get<std::vector<double>>();
    return SkeletonModel(std::move(bones), std::move(parts), std::move(bind));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadConfig, path + ": " + e.what());
  }
}

void save_model(const std::string& path, const SkeletonModel& model) {
  json bones = json::array();
  for (const Bone& b : model.bones()) {
    json dofs = json::array();
    json limits = json::array();
    for (std::size_t k = 0; k < b.dofs.size(); ++k) {
      dofs.push_back(dof_name(b.dofs[k]));
      limits.push_back(json::array({b.limits[k].lo, b.limits[k].hi}));
    }
    bones.push_back({{"name", b.name},
                     {"parent", b.parent < 0 ? json(nullptr) : json(b.parent)},
                     {"dof", dofs},
                     {"offset", point_to(b.offset)},
                     {"limits", limits}});
  }
  json parts = json::array();
  for (const FlatPart& p : model.parts()) {
    parts.push_back({{"bone", p.bone},
                     {"t_p", point_to(p.top)},
                     {"b_p", point_to(p.bottom)},
                     {"t_r", p.top_radius},
                     {"b_r", p.bottom_radius},
                     {"label", p.label}});
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << json{{"bones", bones}, {"parts", parts}, {"bind_state", model.bind_state()}}.dump(2) << "\n";
}

}  // namespace mocap
