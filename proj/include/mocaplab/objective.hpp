#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "mocaplab/camera.hpp"
#include "mocaplab/fitness.hpp"
#include "mocaplab/image.hpp"
#include "mocaplab/render.hpp"
#include "mocaplab/skeleton.hpp"

namespace mocap {

enum class ObjectiveVariant { WS, SP, AoWS, AoSP, PoSP };

std::string to_string(ObjectiveVariant v);
ObjectiveVariant objective_variant_from(const std::string& name);

struct ObjectiveConfig {
  ObjectiveVariant variant = ObjectiveVariant::SP;
  double beta = 0.5;    // weight of overlap/area_ref against overlap/area_model
  double w1 = 0.5;      // silhouette weight of the weighted forms
  double w2 = 0.5;      // edge weight of the weighted forms
  double omega1 = 0.7;  // silhouette exponent of the smoothed forms
  double omega2 = 0.3;  // edge exponent of the smoothed forms
  std::vector<double> label_weights;  // w_l for labels 1..L, empty when unused

  /// Throws Error{BadConfig}.
  void validate() const;
};

/// Two-pass components over the ROI of a finished model image.
/// Throws Error{DimensionMismatch}.
FitnessComponents components(const EncodedImage& model_img, const EncodedImage& ref_img, const RoiRect& roi);

/// Per-label components; `ref_labels` holds the reference segmentation (0 = background).
struct LabeledComponents {
  std::array<FitnessComponents, 128> per_label{};
};
LabeledComponents components_labeled(const EncodedImage& model_img, const EncodedImage& ref_img,
                                     const Image<std::uint8_t>& ref_labels, const RoiRect& roi);

/// Reference silhouette pixels inside the ROI.
std::int64_t reference_area(const EncodedImage& ref_img, const RoiRect& roi);

/// Silhouette fit: beta * overlap/area_ref + (1 - beta) * overlap/area_model,
/// zero-denominator ratios count as 0.
double f1(const FitnessComponents& c, double beta);
/// Weighted sum of per-label silhouette fits over labels 1..weights.size().
double f1_labeled(const LabeledComponents& c, double beta, std::span<const double> weights);
/// Edge fit: distance_sum / edge_count, 0 without model edges.
double f2(const FitnessComponents& c);

/// Combines per-camera components into a score in [0,1].
double objective(std::span<const FitnessComponents> per_camera, const ObjectiveConfig& cfg);

/// Reference data of one frame as seen by each camera.
struct FrameReferences {
  std::vector<EncodedImage> refs;
  std::vector<RoiRect> rois;
  std::vector<std::int64_t> area_ref;  // per camera, filled by make_frame_references
};

FrameReferences make_frame_references(std::vector<EncodedImage> refs, std::vector<RoiRect> rois);

/// Scores pose hypotheses against one frame. Immutable after construction;
/// the batch entry points run N x C independent render jobs.
class Evaluator {
 public:
  Evaluator(const SkeletonModel& model, const std::vector<TsaiCamera>& cams, ObjectiveConfig cfg);

  const SkeletonModel& model() const { return *model_; }
  const ObjectiveConfig& config() const { return cfg_; }
  int camera_count() const { return static_cast<int>(projectors_.size()); }
  const Projector& projector(int c) const { return projectors_[c]; }

  /// Fused render + accumulate, OpenMP-parallel over (pose, camera) jobs.
  /// Scores keep input order and do not depend on `workers`.
  std::vector<double> evaluate_batch(std::span<const PoseState> poses, const FrameReferences& frame,
                                     int workers = 0) const;

  /// Serial reference path: full render per camera, then two-pass components.
  std::vector<double> evaluate_batch_serial(std::span<const PoseState> poses, const FrameReferences& frame) const;

  /// Fused components of one (pose, camera) job; false when the pose cannot be projected.
  bool fused_components(const PoseState& pose, int camera, const FrameReferences& frame, FitnessComponents& out,
                        EncodedImage& scratch) const;

 private:
  void check(const FrameReferences& frame) const;

  const SkeletonModel* model_;
  std::vector<Projector> projectors_;
  ObjectiveConfig cfg_;
};

}  // namespace mocap
