#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mocaplab/camera.hpp"
#include "mocaplab/image.hpp"
#include "mocaplab/imaging.hpp"
#include "mocaplab/objective.hpp"
#include "mocaplab/optimize.hpp"
#include "mocaplab/skeleton.hpp"

namespace mocap {

// ---------------------------------------------------------------------------
// Motion scripts and synthetic sequences
// ---------------------------------------------------------------------------

/// x_d(t) += offset + amplitude * sin(2 pi t / period + phase)
struct SinusoidTerm {
  int index = 0;  // PoseState component
  double amplitude = 0.0;
  double period = 1.0;  // s
  double phase = 0.0;   // rad
  double offset = 0.0;
};

struct MotionScript {
  PoseState base;                // pose at rest; the model bind state when empty
  std::vector<double> velocity;  // per-component linear drift per second, may be empty
  std::vector<SinusoidTerm> terms;

  /// Pose at time t (s), clamped to the joint limits.
  PoseState evaluate(double t, const SkeletonModel& model) const;
};

/// PoseState index of "Bone.r_y"-style names. Throws Error{BadScript}.
int pose_index(const SkeletonModel& model, const std::string& name);
/// Column names of a PoseState, "Bone.t_x" style.
std::vector<std::string> pose_column_names(const SkeletonModel& model);

struct RingRig {
  int cameras = 4;
  double radius = 3000.0;        // mm
  double height = 1200.0;        // camera centre height, mm
  double target_height = 900.0;  // look-at point height, mm
  double start_angle = 0.5235987755982988;  // rad, first camera azimuth
  double focal = 7.0;   // mm
  double pixel = 0.05;  // mm per px, both axes
  double kappa = 1e-3;  // mm^-2
};

/// Cameras evenly spaced on a circle around the origin, all aimed at the target.
std::vector<TsaiCamera> ring_rig(const RingRig& ring, int width, int height);

struct SynthSpec {
  int frames = 100;
  double fps = 25.0;
  int width = 160;
  int height = 120;
  RingRig ring;
  std::string rig_path;    // optional explicit rig, overrides the ring
  double noise = 0.0;      // salt-and-pepper flip probability per pixel
  std::uint64_t seed = 1;
  bool gray = false;       // also emit textured gray frames for the vision path
  int warmup_frames = 20;  // person-free gray frames preceding the sequence
  MotionScript motion;
};

/// Parses {frames, fps, width, height, seed, noise, gray, warmup_frames, rig,
/// ring{...}, motion{base, velocity, terms[{dof, amplitude, period, phase, offset}]}}.
/// Throws Error{BadScript} on malformed motion and Error{ConfigError} otherwise.
SynthSpec synth_spec_from_json(const std::string& text, const SkeletonModel& model);
SynthSpec load_synth_spec(const std::string& path, const SkeletonModel& model);

/// Per camera, per frame features of a rendered sequence.
struct SynthSequence {
  std::vector<TsaiCamera> rig;
  std::vector<PoseState> truth;
  double fps = 25.0;
  // [frame][camera]
  std::vector<std::vector<BinaryImage>> silhouettes;
  std::vector<std::vector<BinaryImage>> edges;
  std::vector<std::vector<GrayImage>> gray;
  std::vector<std::vector<GrayImage>> warmup;  // [k][camera]
};

/// Renders the whole sequence in memory. Deterministic under spec.seed.
SynthSequence synth_render(const SynthSpec& spec, const SkeletonModel& model);

/// Writes rig.json, sequence.json, truth.csv and the PGM frames under `out_dir`.
SynthSequence synth_generate(const SynthSpec& spec, const SkeletonModel& model, const std::string& out_dir);

/// Silhouette and masked edges of one camera rendering.
void features_from_render(const EncodedImage& model_img, BinaryImage& silhouette, BinaryImage& edges);

// ---------------------------------------------------------------------------
// Pose CSV files
// ---------------------------------------------------------------------------

struct PoseTrack {
  std::vector<int> frames;
  std::vector<PoseState> poses;
  std::vector<double> scores;  // empty for ground truth
};

/// "frame,<columns>[,score]" with round-trip precision.
std::string pose_track_csv(const PoseTrack& track, const SkeletonModel& model);
void write_pose_track(const std::string& path, const PoseTrack& track, const SkeletonModel& model);
/// Reads either layout; a trailing "score" column fills `scores`. Throws Error{BadInput}.
PoseTrack read_pose_track(const std::string& path);

// ---------------------------------------------------------------------------
// Feature extraction and tracking
// ---------------------------------------------------------------------------

struct FeatureConfig {
  DistanceMetric metric = DistanceMetric::Euclidean;
  NormalizeFn normalize = NormalizeFn::Proportional;
  NormalizeParams norm;
  RoiParams roi;
  double sobel_threshold = 80.0;
  int edge_dilate = 1;
  MogParams mog;
};

/// Reads the optional "features" section of a tracker config file.
FeatureConfig feature_config_from_json(const std::string& text);

/// Distance map, normalization, ROI and encoding of one camera view.
void build_reference(const BinaryImage& silhouette, const BinaryImage& edges, const FeatureConfig& cfg,
                     EncodedImage& ref, RoiRect& roi);

/// Frame source: synthetic features, or gray frames for the vision path.
class SequenceSource {
 public:
  /// Directory written by synth_generate (needs sequence.json).
  static SequenceSource open_dir(const std::string& dir);
  static SequenceSource in_memory(const SynthSequence& seq);

  int frames() const { return frames_; }
  int cameras() const { return cameras_; }
  double fps() const { return fps_; }
  int warmup_frames() const { return warmup_; }
  bool has_gray() const { return has_gray_; }

  /// Throws Error{MissingFrame}.
  void features(int frame, int camera, BinaryImage& silhouette, BinaryImage& edges) const;
  GrayImage gray(int frame, int camera) const;
  GrayImage warmup(int k, int camera) const;

 private:
  std::string dir_;
  const SynthSequence* mem_ = nullptr;
  int frames_ = 0;
  int cameras_ = 0;
  double fps_ = 25.0;
  int warmup_ = 0;
  bool has_gray_ = false;
};

struct TrackOptions {
  TrackerConfig tracker;
  FeatureConfig features;
  PoseState initial;            // required starting pose
  double realtime_fps = 0.0;    // > 0 enables frame dropping
  bool full_vision = false;     // route gray frames through MoG and Sobel
  int workers = 0;              // 0 = MOCAPLAB_WORKERS or OpenMP default
  /// Simulated processing time of a frame in ms; wall time when unset.
  std::function<double(int frame)> cost_ms;
  int max_frames = -1;          // process only the first n frames when >= 0
};

struct TrackRun {
  PoseTrack track;
  std::vector<double> ms;  // wall time per processed frame
  std::vector<int> pf_flagged_frames;
  std::vector<double> pf_weight_sums;
  int evaluations = 0;
};

TrackRun track_sequence(const SequenceSource& seq, const std::vector<TsaiCamera>& rig, const SkeletonModel& model,
                        const TrackOptions& opt);

/// Writes run.csv, timing.csv and config.json into `out_dir`.
void write_track_run(const std::string& out_dir, const TrackRun& run, const SkeletonModel& model,
                     const TrackOptions& opt);

/// Copy of `frame` with the model edges of `pose` burned in at 255.
GrayImage overlay(const GrayImage& frame, const PoseState& pose, const SkeletonModel& model, const Projector& cam);

// ---------------------------------------------------------------------------
// Accuracy and performance
// ---------------------------------------------------------------------------

struct ErrorReport {
  std::vector<std::vector<double>> per_frame;  // [frame][marker] e_m, mm
  std::vector<double> per_marker;              // E_m, mm
  double mean = 0.0;                           // E, mm
  double stddev = 0.0;                         // over all (frame, marker) errors
  int frames = 0;
  int markers = 0;
};

/// Aligns every run frame with the nearest truth frame (ties to the earlier one).
/// Throws Error{LengthMismatch} on state-length mismatch or empty input.
ErrorReport evaluate(const PoseTrack& run, const PoseTrack& truth, const SkeletonModel& model);
std::string error_report_json(const ErrorReport& r);

struct PerfReport {
  double t_s = 0.0, t_p = 0.0;
  int p = 1;
  double speedup = 0.0;
  double efficiency = 0.0;
  std::optional<double> karp_flatt;    // p >= 2 only
  std::optional<double> amdahl;        // from the serial fraction
  std::optional<double> gustafson;     // from the serial fraction
  std::optional<double> parallelism;   // latency * throughput
};

/// Throws Error{BadInput} on t_s <= 0, t_p <= 0, p < 1 or a serial fraction outside [0,1].
PerfReport perf_metrics(double t_s, double t_p, int p, std::optional<double> serial_fraction = std::nullopt,
                        std::optional<double> latency = std::nullopt,
                        std::optional<double> throughput = std::nullopt);

struct BenchRow {
  int workers = 1;
  double ms_per_batch = 0.0;
  PerfReport perf;
};

struct BenchResult {
  double serial_ms = 0.0;  // evaluate_batch_serial (reference path)
  std::vector<BenchRow> rows;
  bool identical = true;   // parallel scores equal serial scores
};

/// Times evaluate_batch on a synthetic scene for every worker count.
BenchResult run_bench(int particles, int iterations, const std::vector<int>& workers, const SkeletonModel& model);

}  // namespace mocap
