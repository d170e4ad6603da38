#include "mocaplab/objective.hpp"

#include <cmath>
#include <numeric>

#include <omp.h>

#include "mocaplab/error.hpp"
#include "mocaplab/parallel.hpp"

namespace mocap {

std::string to_string(ObjectiveVariant v) {
  switch (v) {
    case ObjectiveVariant::WS: return "WS";
    case ObjectiveVariant::SP: return "SP";
    case ObjectiveVariant::AoWS: return "AoWS";
    case ObjectiveVariant::AoSP: return "AoSP";
    case ObjectiveVariant::PoSP: return "PoSP";
  }
  return "?";
}

ObjectiveVariant objective_variant_from(const std::string& name) {
  for (auto v : {ObjectiveVariant::WS, ObjectiveVariant::SP, ObjectiveVariant::AoWS, ObjectiveVariant::AoSP,
                 ObjectiveVariant::PoSP}) {
    if (to_string(v) == name) return v;
  }
  throw Error(ErrorCode::BadConfig, "unknown objective variant '" + name + "'");
}

void ObjectiveConfig::validate() const {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(beta)) throw Error(ErrorCode::BadConfig, "beta must be in [0,1]");
  if (!unit(w1) || !unit(w2) || std::abs(w1 + w2 - 1.0) > 1e-9)
    throw Error(ErrorCode::BadConfig, "w1, w2 must be in [0,1] and sum to 1");
  if (!(omega1 >= 0.0 && omega1 < 1.0) || !(omega2 >= 0.0 && omega2 < 1.0))
    throw Error(ErrorCode::BadConfig, "exponents must satisfy 0 <= omega < 1");
  if (!label_weights.empty()) {
    if (label_weights.size() > 127) throw Error(ErrorCode::BadConfig, "at most 127 label weights");
    for (double w : label_weights)
      if (!unit(w)) throw Error(ErrorCode::BadConfig, "label weights must be in [0,1]");
    if (std::abs(std::accumulate(label_weights.begin(), label_weights.end(), 0.0) - 1.0) > 1e-9)
      throw Error(ErrorCode::BadConfig, "label weights must sum to 1");
  }
}

namespace {

void check_pair(const EncodedImage& a, const EncodedImage& b) {
  if (!a.same_size(b)) throw Error(ErrorCode::DimensionMismatch, "model and reference image sizes differ");
}

}  // namespace

FitnessComponents components(const EncodedImage& model_img, const EncodedImage& ref_img, const RoiRect& roi_in) {
  check_pair(model_img, ref_img);
  const RoiRect roi = clamp_roi(roi_in, model_img.width(), model_img.height());
  FitnessComponents c;
  for (int y = roi.y; y < roi.y_end(); ++y) {
    const std::uint8_t* m = model_img.row(y);
    const std::uint8_t* r = ref_img.row(y);
    for (int x = roi.x; x < roi.x_end(); ++x) {
      const bool model_on = (m[x] & kPayloadMask) != 0;
      const bool ref_on = (r[x] & kFlagBit) != 0;
      c.area_ref += ref_on;
      c.area_model += model_on;
      c.overlap += model_on && ref_on;
      if (model_on && (m[x] & kFlagBit)) {
        ++c.edge_count;
        c.distance_q += r[x] & kPayloadMask;
      }
    }
  }
  return c;
}

LabeledComponents components_labeled(const EncodedImage& model_img, const EncodedImage& ref_img,
                                     const Image<std::uint8_t>& ref_labels, const RoiRect& roi_in) {
  check_pair(model_img, ref_img);
  if (!ref_labels.same_size(model_img)) throw Error(ErrorCode::DimensionMismatch, "label image size differs");
  const RoiRect roi = clamp_roi(roi_in, model_img.width(), model_img.height());
  LabeledComponents out;
  for (int y = roi.y; y < roi.y_end(); ++y) {
    for (int x = roi.x; x < roi.x_end(); ++x) {
      const int ml = model_img(x, y) & kPayloadMask;
      const int rl = ref_labels(x, y) & kPayloadMask;
      if (rl != 0) ++out.per_label[rl].area_ref;
      if (ml == 0) continue;
      FitnessComponents& c = out.per_label[ml];
      ++c.area_model;
      if (rl == ml) ++c.overlap;
      if (model_img(x, y) & kFlagBit) {
        ++c.edge_count;
        c.distance_q += ref_img(x, y) & kPayloadMask;
      }
    }
  }
  return out;
}

std::int64_t reference_area(const EncodedImage& ref_img, const RoiRect& roi_in) {
  const RoiRect roi = clamp_roi(roi_in, ref_img.width(), ref_img.height());
  std::int64_t area = 0;
  for (int y = roi.y; y < roi.y_end(); ++y) {
    const std::uint8_t* r = ref_img.row(y);
    for (int x = roi.x; x < roi.x_end(); ++x) area += (r[x] & kFlagBit) != 0;
  }
  return area;
}

namespace {

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

double silhouette_fit(double overlap, double area_ref, double area_model, double beta) {
  return beta * ratio(overlap, area_ref) + (1.0 - beta) * ratio(overlap, area_model);
}

double smoothed(double a, double b, const ObjectiveConfig& cfg) {
  return std::pow(a, cfg.omega1) * std::pow(b, cfg.omega2);
}

}  // namespace

double f1(const FitnessComponents& c, double beta) {
  return silhouette_fit(static_cast<double>(c.overlap), static_cast<double>(c.area_ref),
                        static_cast<double>(c.area_model), beta);
}

double f1_labeled(const LabeledComponents& c, double beta, std::span<const double> weights) {
  double sum = 0.0;
  for (std::size_t l = 0; l < weights.size() && l + 1 < c.per_label.size(); ++l)
    sum += weights[l] * f1(c.per_label[l + 1], beta);
  return sum;
}

double f2(const FitnessComponents& c) { return ratio(c.distance_sum(), static_cast<double>(c.edge_count)); }

double objective(std::span<const FitnessComponents> per_camera, const ObjectiveConfig& cfg) {
  if (per_camera.empty()) throw Error(ErrorCode::BadConfig, "objective needs at least one camera");
  switch (cfg.variant) {
    case ObjectiveVariant::WS:
    case ObjectiveVariant::SP: {
      FitnessComponents pooled;
      for (const auto& c : per_camera) pooled += c;
      const double a = f1(pooled, cfg.beta);
      const double b = f2(pooled);
      return cfg.variant == ObjectiveVariant::WS ? cfg.w1 * a + cfg.w2 * b : smoothed(a, b, cfg);
    }
    case ObjectiveVariant::AoWS:
    case ObjectiveVariant::AoSP: {
      double sum = 0.0;
      for (const auto& c : per_camera) {
        const double a = f1(c, cfg.beta);
        const double b = f2(c);
        sum += cfg.variant == ObjectiveVariant::AoWS ? cfg.w1 * a + cfg.w2 * b : smoothed(a, b, cfg);
      }
      return sum / static_cast<double>(per_camera.size());
    }
    case ObjectiveVariant::PoSP: {
      double prod = 1.0;
      for (const auto& c : per_camera) prod *= smoothed(f1(c, cfg.beta), f2(c), cfg);
      return prod;
    }
  }
  return 0.0;
}

FrameReferences make_frame_references(std::vector<EncodedImage> refs, std::vector<RoiRect> rois) {
  if (refs.size() != rois.size()) throw Error(ErrorCode::DimensionMismatch, "one ROI per reference image");
  FrameReferences f{std::move(refs), std::move(rois), {}};
  for (std::size_t c = 0; c < f.refs.size(); ++c) {
    f.rois[c] = clamp_roi(f.rois[c], f.refs[c].width(), f.refs[c].height());
    f.area_ref.push_back(reference_area(f.refs[c], f.rois[c]));
  }
  return f;
}

Evaluator::Evaluator(const SkeletonModel& model, const std::vector<TsaiCamera>& cams, ObjectiveConfig cfg)
    : model_(&model), cfg_(std::move(cfg)) {
  cfg_.validate();
  if (cams.empty()) throw Error(ErrorCode::BadConfig, "evaluator needs at least one camera");
  for (const auto& c : cams) {
    c.validate();
    projectors_.emplace_back(c);
  }
}

void Evaluator::check(const FrameReferences& frame) const {
  if (static_cast<int>(frame.refs.size()) != camera_count() || frame.rois.size() != frame.refs.size() ||
      frame.area_ref.size() != frame.refs.size())
    throw Error(ErrorCode::DimensionMismatch, "frame references do not match the camera rig");
  for (int c = 0; c < camera_count(); ++c) {
    const TsaiCamera& cam = projectors_[c].camera();
    if (!frame.refs[c].same_size(cam.img_w, cam.img_h))
      throw Error(ErrorCode::DimensionMismatch, "reference image size differs from camera " + std::to_string(c));
  }
}

namespace {

struct JobScratch {
  Scene scene;
  EncodedImage image;
};

bool fused_job(const SkeletonModel& model, const Projector& proj, const std::vector<Mat4>& world,
               const EncodedImage& ref, const RoiRect& roi, std::int64_t area_ref, JobScratch& s,
               FitnessComponents& out) {
  out = {};
  if (!project_model(world, model, proj, s.scene)) return false;
  if (!s.image.same_size(ref)) s.image = EncodedImage(ref.width(), ref.height(), 0);
  rasterize_pose(s.scene.triangles, s.scene.outlines, roi, s.image, &ref, &out);
  out.area_ref = area_ref;
  return true;
}

}  // namespace

bool Evaluator::fused_components(const PoseState& pose, int camera, const FrameReferences& frame,
                                 FitnessComponents& out, EncodedImage& scratch) const {
  check(frame);
  JobScratch s;
  s.image = std::move(scratch);
  const bool ok = fused_job(*model_, projectors_[camera], pose_matrices(pose, *model_), frame.refs[camera],
                            frame.rois[camera], frame.area_ref[camera], s, out);
  scratch = std::move(s.image);
  return ok;
}

std::vector<double> Evaluator::evaluate_batch(std::span<const PoseState> poses, const FrameReferences& frame,
                                              int workers) const {
  check(frame);
  const int n = static_cast<int>(poses.size());
  const int cams = camera_count();
  const int threads = resolve_workers(workers);

  std::vector<std::vector<Mat4>> world(n);
  std::vector<FitnessComponents> comps(static_cast<std::size_t>(n) * cams);
  std::vector<unsigned char> ok(comps.size(), 1);

#pragma omp parallel num_threads(threads)
  {
#pragma omp for schedule(static)
    for (int i = 0; i < n; ++i) world[i] = pose_matrices(poses[i], *model_);

    JobScratch scratch;
#pragma omp for schedule(dynamic, 4)
    for (int job = 0; job < n * cams; ++job) {
      const int i = job / cams;
      const int c = job % cams;
      ok[job] = fused_job(*model_, projectors_[c], world[i], frame.refs[c], frame.rois[c], frame.area_ref[c],
                          scratch, comps[job]);
    }
  }

  std::vector<double> scores(n, 0.0);
  for (int i = 0; i < n; ++i) {
    bool all = true;
    for (int c = 0; c < cams; ++c) all = all && ok[static_cast<std::size_t>(i) * cams + c];
    if (all) scores[i] = objective(std::span(comps).subspan(static_cast<std::size_t>(i) * cams, cams), cfg_);
  }
  return scores;
}

std::vector<double> Evaluator::evaluate_batch_serial(std::span<const PoseState> poses,
                                                     const FrameReferences& frame) const {
  check(frame);
  std::vector<double> scores;
  scores.reserve(poses.size());
  EncodedImage img;
  std::vector<FitnessComponents> comps(camera_count());
  for (const PoseState& pose : poses) {
    bool all = true;
    for (int c = 0; c < camera_count() && all; ++c) {
      all = render_pose(pose, *model_, projectors_[c], img);
      if (all) comps[c] = components(img, frame.refs[c], frame.rois[c]);
    }
    scores.push_back(all ? objective(comps, cfg_) : 0.0);
  }
  return scores;
}

}  // namespace mocap
