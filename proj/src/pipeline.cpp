#include "mocaplab/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>
#include <omp.h>

#include "mocaplab/error.hpp"
#include "mocaplab/parallel.hpp"
#include "mocaplab/render.hpp"
#include "mocaplab/rng.hpp"

namespace mocap {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text(const std::string& path, ErrorCode code) {
  std::ifstream in(path);
  if (!in) throw Error(code, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string frame_file(const std::string& dir, int camera, int frame, const char* kind) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "c%d_f%05d_%s.pgm", camera, frame, kind);
  return (fs::path(dir) / "frames" / buf).string();
}

std::string warmup_file(const std::string& dir, int camera, int k) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "c%d_bg%03d.pgm", camera, k);
  return (fs::path(dir) / "frames" / buf).string();
}

GrayImage to_gray(const BinaryImage& b) {
  GrayImage g(b.width(), b.height());
  for (std::size_t i = 0; i < b.size(); ++i) g.data()[i] = b.data()[i] ? 255 : 0;
  return g;
}

BinaryImage to_binary(const GrayImage& g) {
  BinaryImage b(g.width(), g.height());
  for (std::size_t i = 0; i < g.size(); ++i) b.data()[i] = g.data()[i] > 127 ? 1 : 0;
  return b;
}

}  // namespace

// ---------------------------------------------------------------------------
// Motion scripts
// ---------------------------------------------------------------------------

PoseState MotionScript::evaluate(double t, const SkeletonModel& model) const {
  PoseState x = base.empty() ? model.bind_state() : base;
  if (static_cast<int>(x.size()) != model.dof_count()) throw Error(ErrorCode::BadScript, "base pose length");
  for (std::size_t d = 0; d < velocity.size() && d < x.size(); ++d) x[d] += velocity[d] * t;
  for (const SinusoidTerm& term : terms)
    x[term.index] += term.offset + term.amplitude * std::sin(2.0 * std::numbers::pi * t / term.period + term.phase);
  clamp_limits_in_place(x, model);
  return x;
}

int pose_index(const SkeletonModel& model, const std::string& name) {
  const auto dot = name.rfind('.');
  if (dot == std::string::npos) throw Error(ErrorCode::BadScript, "DoF name '" + name + "' lacks a bone prefix");
  const int bone = model.bone_index(name.substr(0, dot));
  const auto dof = dof_from_name(name.substr(dot + 1));
  if (bone < 0 || !dof) throw Error(ErrorCode::BadScript, "unknown DoF '" + name + "'");
  const auto& dofs = model.bones()[bone].dofs;
  const auto it = std::find(dofs.begin(), dofs.end(), *dof);
  if (it == dofs.end()) throw Error(ErrorCode::BadScript, "bone has no DoF '" + name + "'");
  return model.first_dof_of(bone) + static_cast<int>(it - dofs.begin());
}

std::vector<std::string> pose_column_names(const SkeletonModel& model) {
  std::vector<std::string> names;
  for (const Bone& b : model.bones())
    for (Dof d : b.dofs) names.push_back(b.name + "." + dof_name(d));
  return names;
}

std::vector<TsaiCamera> ring_rig(const RingRig& ring, int width, int height) {
  if (ring.cameras < 1) throw Error(ErrorCode::ConfigError, "ring needs at least one camera");
  TsaiCamera intr;
  intr.f = ring.focal;
  intr.kappa = ring.kappa;
  intr.d_px = intr.d_py = ring.pixel;
  intr.s_x = 1.0;
  intr.c_x = width / 2.0;
  intr.c_y = height / 2.0;
  intr.img_w = width;
  intr.img_h = height;
  std::vector<TsaiCamera> rig;
  for (int c = 0; c < ring.cameras; ++c) {
    const double a = ring.start_angle + 2.0 * std::numbers::pi * c / ring.cameras;
    const Point3 eye{ring.radius * std::cos(a), ring.radius * std::sin(a), ring.height};
    rig.push_back(look_at(eye, {0.0, 0.0, ring.target_height}, {0.0, 0.0, 1.0}, intr));
  }
  return rig;
}

SynthSpec synth_spec_from_json(const std::string& text, const SkeletonModel& model) {
  SynthSpec s;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("synth spec: ") + e.what());
  }
  try {
    s.frames = j.value("frames", s.frames);
    s.fps = j.value("fps", s.fps);
    s.width = j.value("width", s.width);
    s.height = j.value("height", s.height);
    s.noise = j.value("noise", s.noise);
    s.seed = j.value("seed", s.seed);
    s.gray = j.value("gray", s.gray);
    s.warmup_frames = j.value("warmup_frames", s.warmup_frames);
    s.rig_path = j.value("rig", std::string());
    if (j.contains("ring")) {
      const json& r = j.at("ring");
      s.ring.cameras = r.value("cameras", s.ring.cameras);
      s.ring.radius = r.value("radius", s.ring.radius);
      s.ring.height = r.value("height", s.ring.height);
      s.ring.target_height = r.value("target_height", s.ring.target_height);
      s.ring.start_angle = r.value("start_angle", s.ring.start_angle);
      s.ring.focal = r.value("focal", s.ring.focal);
      s.ring.pixel = r.value("pixel", s.ring.pixel);
      s.ring.kappa = r.value("kappa", s.ring.kappa);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("synth spec: ") + e.what());
  }
  if (s.frames < 1 || !(s.fps > 0.0) || s.width < 3 || s.height < 3 || s.noise < 0.0 || s.noise > 1.0 ||
      s.warmup_frames < 0)
    throw Error(ErrorCode::ConfigError, "synth spec: frames, fps, size, noise or warmup out of range");

  try {
    const json m = j.value("motion", json::object());
    if (m.contains("base")) {
      s.motion.base = model.bind_state();
      const json& b = m.at("base");
      if (b.is_array()) {
        s.motion.base = b.get<std::vector<double>>();
        if (static_cast<int>(s.motion.base.size()) != model.dof_count())
          throw Error(ErrorCode::BadScript, "motion base must list every DoF");
      } else {
        for (const auto& [name, v] : b.items()) s.motion.base[pose_index(model, name)] = v.get<double>();
      }
    }
    if (m.contains("velocity")) {
      s.motion.velocity.assign(model.dof_count(), 0.0);
      for (const auto& [name, v] : m.at("velocity").items())
        s.motion.velocity[pose_index(model, name)] = v.get<double>();
    }
    for (const json& t : m.value("terms", json::array())) {
      SinusoidTerm term;
      term.index = pose_index(model, t.at("dof").get<std::string>());
      term.amplitude = t.value("amplitude", 0.0);
      term.period = t.value("period", 1.0);
      term.phase = t.value("phase", 0.0);
      term.offset = t.value("offset", 0.0);
      if (!(term.period > 0.0)) throw Error(ErrorCode::BadScript, "sinusoid period must be positive");
      s.motion.terms.push_back(term);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadScript, std::string("motion script: ") + e.what());
  }
  return s;
}

SynthSpec load_synth_spec(const std::string& path, const SkeletonModel& model) {
  return synth_spec_from_json(read_text(path, ErrorCode::ConfigError), model);
}

void features_from_render(const EncodedImage& model_img, BinaryImage& silhouette, BinaryImage& edges) {
  silhouette = BinaryImage(model_img.width(), model_img.height());
  edges = BinaryImage(model_img.width(), model_img.height());
  for (std::size_t i = 0; i < model_img.size(); ++i) {
    const std::uint8_t px = model_img.data()[i];
    silhouette.data()[i] = (px & kPayloadMask) != 0;
    edges.data()[i] = (px & kFlagBit) != 0;
  }
}

namespace {

// Smooth per-camera texture so the vision path has something to model.
std::uint8_t background_level(int camera, int x, int y) {
  const double v = 70.0 + 25.0 * std::sin(0.21 * x + 0.9 * camera) * std::cos(0.17 * y) + 0.15 * y;
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

std::uint8_t jitter(std::uint8_t v, RngPool& rng, double sigma) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v + sigma * rng.normal()), 0L, 255L));
}

void salt_and_pepper(BinaryImage& img, double p, RngPool& rng) {
  if (p <= 0.0) return;
  for (std::size_t i = 0; i < img.size(); ++i)
    if (rng.uniform() < p) img.data()[i] = !img.data()[i];
}

}  // namespace

SynthSequence synth_render(const SynthSpec& spec, const SkeletonModel& model) {
  SynthSequence seq;
  seq.fps = spec.fps;
  seq.rig = spec.rig_path.empty() ? ring_rig(spec.ring, spec.width, spec.height) : load_rig(spec.rig_path);
  const int cams = static_cast<int>(seq.rig.size());
  std::vector<Projector> proj(seq.rig.begin(), seq.rig.end());
  RngPool rng(spec.seed);

  if (spec.gray) {
    for (int k = 0; k < spec.warmup_frames; ++k) {
      std::vector<GrayImage> row;
      for (int c = 0; c < cams; ++c) {
        GrayImage g(seq.rig[c].img_w, seq.rig[c].img_h);
        for (int y = 0; y < g.height(); ++y)
          for (int x = 0; x < g.width(); ++x) g(x, y) = jitter(background_level(c, x, y), rng, 2.0);
        row.push_back(std::move(g));
      }
      seq.warmup.push_back(std::move(row));
    }
  }

  EncodedImage img;
  for (int f = 0; f < spec.frames; ++f) {
    const PoseState pose = spec.motion.evaluate(f / spec.fps, model);
    seq.truth.push_back(pose);
    std::vector<BinaryImage> sils(cams), edges(cams);
    std::vector<GrayImage> grays;
    for (int c = 0; c < cams; ++c) {
      if (!render_pose(pose, model, proj[c], img))
        throw Error(ErrorCode::BadScript, "frame " + std::to_string(f) + " leaves the view of camera " +
                                               std::to_string(c));
      features_from_render(img, sils[c], edges[c]);
      if (spec.gray) {
        GrayImage g(img.width(), img.height());
        for (int y = 0; y < g.height(); ++y)
          for (int x = 0; x < g.width(); ++x) {
            const int label = img(x, y) & kPayloadMask;
            const std::uint8_t base = label ? static_cast<std::uint8_t>(150 + 8 * label) : background_level(c, x, y);
            g(x, y) = jitter(base, rng, 2.0);
          }
        grays.push_back(std::move(g));
      }
      salt_and_pepper(sils[c], spec.noise, rng);
      salt_and_pepper(edges[c], spec.noise, rng);
    }
    seq.silhouettes.push_back(std::move(sils));
    seq.edges.push_back(std::move(edges));
    if (spec.gray) seq.gray.push_back(std::move(grays));
  }
  return seq;
}

SynthSequence synth_generate(const SynthSpec& spec, const SkeletonModel& model, const std::string& out_dir) {
  SynthSequence seq = synth_render(spec, model);
  fs::create_directories(fs::path(out_dir) / "frames");
  save_rig((fs::path(out_dir) / "rig.json").string(), seq.rig);
  const int cams = static_cast<int>(seq.rig.size());
  json manifest = {{"frames", spec.frames},
                   {"fps", spec.fps},
                   {"cameras", cams},
                   {"width", spec.width},
                   {"height", spec.height},
                   {"gray", spec.gray},
                   {"warmup_frames", spec.gray ? spec.warmup_frames : 0},
                   {"seed", spec.seed}};
  write_text((fs::path(out_dir) / "sequence.json").string(), manifest.dump(2) + "\n");

  PoseTrack truth;
  for (int f = 0; f < spec.frames; ++f) {
    truth.frames.push_back(f);
    truth.poses.push_back(seq.truth[f]);
  }
  write_pose_track((fs::path(out_dir) / "truth.csv").string(), truth, model);

  for (int f = 0; f < spec.frames; ++f)
    for (int c = 0; c < cams; ++c) {
      write_pgm(frame_file(out_dir, c, f, "sil"), to_gray(seq.silhouettes[f][c]));
      write_pgm(frame_file(out_dir, c, f, "edge"), to_gray(seq.edges[f][c]));
      if (spec.gray) write_pgm(frame_file(out_dir, c, f, "gray"), seq.gray[f][c]);
    }
  for (std::size_t k = 0; k < seq.warmup.size(); ++k)
    for (int c = 0; c < cams; ++c) write_pgm(warmup_file(out_dir, c, static_cast<int>(k)), seq.warmup[k][c]);
  return seq;
}

// ---------------------------------------------------------------------------
// Pose CSV
// ---------------------------------------------------------------------------

std::string pose_track_csv(const PoseTrack& track, const SkeletonModel& model) {
  const bool scored = !track.scores.empty();
  if (track.frames.size() != track.poses.size() || (scored && track.scores.size() != track.poses.size()))
    throw Error(ErrorCode::LengthMismatch, "pose track columns differ in length");
  std::string out = "frame";
  for (const std::string& n : pose_column_names(model)) out += "," + n;
  out += scored ? ",score\n" : "\n";
  for (std::size_t i = 0; i < track.poses.size(); ++i) {
    if (static_cast<int>(track.poses[i].size()) != model.dof_count())
      throw Error(ErrorCode::LengthMismatch, "pose length differs from the model");
    out += std::to_string(track.frames[i]);
    for (double v : track.poses[i]) out += "," + format_double(v);
    if (scored) out += "," + format_double(track.scores[i]);
    out += "\n";
  }
  return out;
}

void write_pose_track(const std::string& path, const PoseTrack& track, const SkeletonModel& model) {
  write_text(path, pose_track_csv(track, model));
}

PoseTrack read_pose_track(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::BadInput, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::BadInput, path + " is empty");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.empty() || header.front() != "frame") throw Error(ErrorCode::BadInput, path + ": missing frame column");
  const bool scored = header.back() == "score";
  const std::size_t dims = header.size() - 1 - (scored ? 1 : 0);
  PoseTrack t;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    try {
      while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw Error(ErrorCode::BadInput, path + ":" + std::to_string(lineno) + ": not a number");
    }
    if (vals.size() != header.size())
      throw Error(ErrorCode::BadInput, path + ":" + std::to_string(lineno) + ": wrong column count");
    t.frames.push_back(static_cast<int>(vals[0]));
    t.poses.emplace_back(vals.begin() + 1, vals.begin() + 1 + static_cast<std::ptrdiff_t>(dims));
    if (scored) t.scores.push_back(vals.back());
  }
  return t;
}

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

FeatureConfig feature_config_from_json(const std::string& text) {
  FeatureConfig f;
  try {
    const json j = json::parse(text);
    if (!j.contains("features")) return f;
    const json& s = j.at("features");
    const std::string metric = s.value("metric", std::string("euclidean"));
    if (metric == "euclidean")
      f.metric = DistanceMetric::Euclidean;
    else if (metric == "cityblock")
      f.metric = DistanceMetric::CityBlock;
    else if (metric == "chessboard")
      f.metric = DistanceMetric::Chessboard;
    else if (metric == "quasi")
      f.metric = DistanceMetric::Quasi;
    else
      throw Error(ErrorCode::ConfigError, "unknown metric '" + metric + "'");
    const std::string norm = s.value("normalize", std::string("proportional"));
    if (norm == "impulse")
      f.normalize = NormalizeFn::Impulse;
    else if (norm == "proportional")
      f.normalize = NormalizeFn::Proportional;
    else if (norm == "exponential")
      f.normalize = NormalizeFn::Exponential;
    else
      throw Error(ErrorCode::ConfigError, "unknown normalization '" + norm + "'");
    f.norm.d_min = s.value("d_min", f.norm.d_min);
    f.norm.d_max = s.value("d_max", f.norm.d_max);
    f.norm.n_range = s.value("n_range", f.norm.n_range);
    f.norm.m = s.value("m", f.norm.m);
    f.roi.margin = s.value("roi_margin", f.roi.margin);
    f.roi.min_area = s.value("roi_min_area", f.roi.min_area);
    f.roi.max_objects = s.value("roi_max_objects", f.roi.max_objects);
    f.sobel_threshold = s.value("sobel_threshold", f.sobel_threshold);
    f.edge_dilate = s.value("edge_dilate", f.edge_dilate);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("features: ") + e.what());
  }
  try {
    validate(f.norm, f.normalize);
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  return f;
}

void build_reference(const BinaryImage& silhouette, const BinaryImage& edges, const FeatureConfig& cfg,
                     EncodedImage& ref, RoiRect& roi) {
  const DistanceMap dm = distance_map(edges, cfg.metric, cfg.norm.d_max);
  ref = encode_reference(silhouette, normalize_map(dm, cfg.normalize, cfg.norm));
  roi = compute_roi(silhouette, cfg.roi);
}

SequenceSource SequenceSource::open_dir(const std::string& dir) {
  const std::string manifest = (fs::path(dir) / "sequence.json").string();
  SequenceSource s;
  s.dir_ = dir;
  try {
    const json j = json::parse(read_text(manifest, ErrorCode::MissingFrame));
    s.frames_ = j.at("frames").get<int>();
    s.cameras_ = j.at("cameras").get<int>();
    s.fps_ = j.value("fps", 25.0);
    s.has_gray_ = j.value("gray", false);
    s.warmup_ = j.value("warmup_frames", 0);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, manifest + ": " + e.what());
  }
  if (s.frames_ < 1 || s.cameras_ < 1 || !(s.fps_ > 0.0))
    throw Error(ErrorCode::ConfigError, manifest + ": frames, cameras and fps must be positive");
  return s;
}

SequenceSource SequenceSource::in_memory(const SynthSequence& seq) {
  SequenceSource s;
  s.mem_ = &seq;
  s.frames_ = static_cast<int>(seq.silhouettes.size());
  s.cameras_ = static_cast<int>(seq.rig.size());
  s.fps_ = seq.fps;
  s.has_gray_ = !seq.gray.empty();
  s.warmup_ = static_cast<int>(seq.warmup.size());
  return s;
}

void SequenceSource::features(int frame, int camera, BinaryImage& silhouette, BinaryImage& edges) const {
  if (frame < 0 || frame >= frames_ || camera < 0 || camera >= cameras_)
    throw Error(ErrorCode::MissingFrame, "frame " + std::to_string(frame) + " camera " + std::to_string(camera));
  if (mem_) {
    silhouette = mem_->silhouettes[frame][camera];
    edges = mem_->edges[frame][camera];
    return;
  }
  silhouette = to_binary(read_pgm(frame_file(dir_, camera, frame, "sil")));
  edges = to_binary(read_pgm(frame_file(dir_, camera, frame, "edge")));
}

GrayImage SequenceSource::gray(int frame, int camera) const {
  if (!has_gray_) throw Error(ErrorCode::MissingFrame, "sequence has no gray frames");
  if (frame < 0 || frame >= frames_ || camera < 0 || camera >= cameras_)
    throw Error(ErrorCode::MissingFrame, "frame " + std::to_string(frame) + " camera " + std::to_string(camera));
  if (mem_) return mem_->gray[frame][camera];
  return read_pgm(frame_file(dir_, camera, frame, "gray"));
}

GrayImage SequenceSource::warmup(int k, int camera) const {
  if (k < 0 || k >= warmup_) throw Error(ErrorCode::MissingFrame, "warm-up frame " + std::to_string(k));
  if (mem_) return mem_->warmup[k][camera];
  return read_pgm(warmup_file(dir_, camera, k));
}

// ---------------------------------------------------------------------------
// Tracking
// ---------------------------------------------------------------------------

TrackRun track_sequence(const SequenceSource& seq, const std::vector<TsaiCamera>& rig, const SkeletonModel& model,
                        const TrackOptions& opt_in) {
  TrackOptions opt = opt_in;
  opt.tracker.validate(model.dof_count());
  if (static_cast<int>(opt.initial.size()) != model.dof_count())
    throw Error(ErrorCode::ConfigError, "initial pose must have " + std::to_string(model.dof_count()) + " values");
  if (static_cast<int>(rig.size()) != seq.cameras())
    throw Error(ErrorCode::ConfigError, "rig has " + std::to_string(rig.size()) + " cameras, sequence has " +
                                            std::to_string(seq.cameras()));
  if (opt.full_vision && !seq.has_gray()) throw Error(ErrorCode::ConfigError, "--full-vision needs gray frames");

  const Evaluator eval(model, rig, opt.tracker.objective);
  const int cams = seq.cameras();
  const int workers = resolve_workers(opt.workers);
  RngPool rng(opt.tracker.seed);

  std::vector<MogModel> mog;
  if (opt.full_vision) {
    for (const TsaiCamera& c : rig) mog.emplace_back(c.img_w, c.img_h, opt.features.mog);
    for (int k = 0; k < seq.warmup_frames(); ++k)
      for (int c = 0; c < cams; ++c) mog[c].apply(seq.warmup(k, c));
  }

  TrackRun run;
  PoseState current = clamp_limits(opt.initial, model);
  ParticleSet particles;
  if (opt.tracker.algorithm == Algorithm::Pf) particles = init_particle_set(current, opt.tracker.particles);

  const int last = opt.max_frames >= 0 ? std::min(opt.max_frames, seq.frames()) : seq.frames();
  double sim_clock_ms = 0.0;
  int frame = 0;
  while (frame < last) {
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<EncodedImage> refs(cams);
    std::vector<RoiRect> rois(cams);
    // One worker per camera; exceptions are carried out of the parallel region.
    std::vector<std::string> errors(cams);
    std::vector<int> codes(cams, -1);
#pragma omp parallel for num_threads(std::min(workers, cams)) schedule(static)
    for (int c = 0; c < cams; ++c) {
      try {
        BinaryImage sil, edges;
        if (opt.full_vision) {
          const GrayImage g = seq.gray(frame, c);
          sil = mog[c].apply(g);
          edges = mask_edges(sobel_edges(g, opt.features.sobel_threshold), sil, opt.features.edge_dilate);
        } else {
          seq.features(frame, c, sil, edges);
        }
        build_reference(sil, edges, opt.features, refs[c], rois[c]);
      } catch (const Error& e) {
        codes[c] = static_cast<int>(e.code());
        errors[c] = e.what();
      }
    }
    for (int c = 0; c < cams; ++c)
      if (codes[c] >= 0) throw Error(static_cast<ErrorCode>(codes[c]), errors[c]);

    const FrameReferences refs_f = make_frame_references(std::move(refs), std::move(rois));
    const BatchObjective f = [&](std::span<const PoseState> poses) {
      return eval.evaluate_batch(poses, refs_f, workers);
    };

    double score = 0.0;
    if (opt.tracker.algorithm == Algorithm::Pso) {
      PsoFrameResult r = pso_track_frame(current, f, opt.tracker, rng, &model);
      current = std::move(r.best);
      score = r.score;
      run.evaluations += r.evaluations;
    } else {
      PfFrameResult r = pf_track_frame(particles, f, opt.tracker, rng, &model);
      current = std::move(r.estimate);
      score = r.score;
      run.evaluations += r.evaluations;
      run.pf_weight_sums.push_back(r.weight_sum);
      if (r.all_zero_weights) run.pf_flagged_frames.push_back(frame);
    }

    const double wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    run.track.frames.push_back(frame);
    run.track.poses.push_back(current);
    run.track.scores.push_back(score);
    run.ms.push_back(wall_ms);

    if (opt.realtime_fps > 0.0) {
      // Frame i becomes available at i / fps; after finishing, the tracker
      // takes the newest frame already available, or waits for the next one.
      const double cost = opt.cost_ms ? opt.cost_ms(frame) : wall_ms;
      sim_clock_ms = std::max(sim_clock_ms, 1000.0 * frame / opt.realtime_fps) + cost;
      const int available = static_cast<int>(std::floor(sim_clock_ms * opt.realtime_fps / 1000.0 + 1e-9));
      frame = std::max(frame + 1, available);
    } else {
      ++frame;
    }
  }
  return run;
}

void write_track_run(const std::string& out_dir, const TrackRun& run, const SkeletonModel& model,
                     const TrackOptions& opt) {
  fs::create_directories(out_dir);
  write_pose_track((fs::path(out_dir) / "run.csv").string(), run.track, model);
  std::string timing = "frame,ms\n";
  for (std::size_t i = 0; i < run.ms.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%d,%.3f\n", run.track.frames[i], run.ms[i]);
    timing += buf;
  }
  write_text((fs::path(out_dir) / "timing.csv").string(), timing);
  json cfg = json::parse(tracker_config_to_json(opt.tracker));
  cfg["realtime_fps"] = opt.realtime_fps;
  cfg["full_vision"] = opt.full_vision;
  cfg["workers"] = resolve_workers(opt.workers);
  cfg["frames_processed"] = run.track.frames.size();
  cfg["evaluations"] = run.evaluations;
  cfg["pf_flagged_frames"] = run.pf_flagged_frames;
  write_text((fs::path(out_dir) / "config.json").string(), cfg.dump(2) + "\n");
}

GrayImage overlay(const GrayImage& frame, const PoseState& pose, const SkeletonModel& model, const Projector& cam) {
  GrayImage out = frame;
  EncodedImage img;
  if (!render_pose(pose, model, cam, img) || !img.same_size(frame)) return out;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (img.data()[i] & kFlagBit) out.data()[i] = 255;
  return out;
}

// ---------------------------------------------------------------------------
// Accuracy and performance
// ---------------------------------------------------------------------------

ErrorReport evaluate(const PoseTrack& run, const PoseTrack& truth, const SkeletonModel& model) {
  if (run.poses.empty() || truth.poses.empty()) throw Error(ErrorCode::LengthMismatch, "empty trajectory");
  if (run.frames.size() != run.poses.size() || truth.frames.size() != truth.poses.size())
    throw Error(ErrorCode::LengthMismatch, "frame and pose columns differ in length");
  std::vector<std::size_t> order(truth.frames.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return truth.frames[a] < truth.frames[b]; });

  ErrorReport r;
  r.frames = static_cast<int>(run.poses.size());
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < run.poses.size(); ++i) {
    auto it = std::lower_bound(order.begin(), order.end(), run.frames[i],
                               [&](std::size_t k, int f) { return truth.frames[k] < f; });
    if (it == order.end() ||
        (it != order.begin() && run.frames[i] - truth.frames[*(it - 1)] <= truth.frames[*it] - run.frames[i]))
      --it;
    const PoseState& gt = truth.poses[*it];
    if (gt.size() != run.poses[i].size()) throw Error(ErrorCode::LengthMismatch, "state lengths differ");
    const auto est_m = marker_positions(run.poses[i], model);
    const auto gt_m = marker_positions(gt, model);
    std::vector<double> e(est_m.size());
    for (std::size_t m = 0; m < e.size(); ++m) {
      e[m] = norm(est_m[m] - gt_m[m]);
      sum += e[m];
      sum_sq += e[m] * e[m];
    }
    r.per_frame.push_back(std::move(e));
  }
  r.markers = static_cast<int>(r.per_frame.front().size());
  r.per_marker.assign(r.markers, 0.0);
  for (const auto& row : r.per_frame)
    for (int m = 0; m < r.markers; ++m) r.per_marker[m] += row[m];
  for (double& v : r.per_marker) v /= r.frames;
  for (double v : r.per_marker) r.mean += v;
  r.mean /= r.markers;
  const double n = static_cast<double>(r.frames) * r.markers;
  r.stddev = std::sqrt(std::max(0.0, sum_sq / n - (sum / n) * (sum / n)));
  return r;
}

std::string error_report_json(const ErrorReport& r) {
  json j;
  j["frames"] = r.frames;
  j["markers"] = r.markers;
  j["mean_mm"] = r.mean;
  j["std_mm"] = r.stddev;
  j["per_marker_mm"] = r.per_marker;
  std::vector<double> per_frame_mean;
  for (const auto& row : r.per_frame) {
    double s = 0.0;
    for (double v : row) s += v;
    per_frame_mean.push_back(s / static_cast<double>(row.size()));
  }
  j["per_frame_mean_mm"] = per_frame_mean;
  return j.dump(2);
}

PerfReport perf_metrics(double t_s, double t_p, int p, std::optional<double> serial_fraction,
                        std::optional<double> latency, std::optional<double> throughput) {
  if (!(t_s > 0.0) || !(t_p > 0.0) || p < 1) throw Error(ErrorCode::BadInput, "need T_s > 0, T_p > 0 and p >= 1");
  if (serial_fraction && !(*serial_fraction >= 0.0 && *serial_fraction <= 1.0))
    throw Error(ErrorCode::BadInput, "serial fraction must lie in [0,1]");
  PerfReport r;
  r.t_s = t_s;
  r.t_p = t_p;
  r.p = p;
  r.speedup = t_s / t_p;
  r.efficiency = r.speedup / p;
  if (p >= 2) r.karp_flatt = (1.0 / r.speedup - 1.0 / p) / (1.0 - 1.0 / p);
  if (serial_fraction) {
    const double s = *serial_fraction;
    r.amdahl = 1.0 / (s + (1.0 - s) / p);
    r.gustafson = s + p * (1.0 - s);
  }
  if (latency && throughput) r.parallelism = *latency * *throughput;
  return r;
}

BenchResult run_bench(int particles, int iterations, const std::vector<int>& workers, const SkeletonModel& model) {
  if (particles < 1 || iterations < 1) throw Error(ErrorCode::BadInput, "particles and iterations must be >= 1");
  SynthSpec spec;
  spec.frames = 1;
  const SynthSequence seq = synth_render(spec, model);
  const FeatureConfig feat;
  std::vector<EncodedImage> refs(seq.rig.size());
  std::vector<RoiRect> rois(seq.rig.size());
  for (std::size_t c = 0; c < seq.rig.size(); ++c)
    build_reference(seq.silhouettes[0][c], seq.edges[0][c], feat, refs[c], rois[c]);
  const FrameReferences frame = make_frame_references(std::move(refs), std::move(rois));
  const Evaluator eval(model, seq.rig, ObjectiveConfig{});

  RngPool rng(7);
  std::vector<double> sigma(model.dof_count(), 0.05);
  for (int d = 0; d < 3; ++d) sigma[d] = 30.0;
  std::vector<PoseState> poses;
  for (int i = 0; i < particles; ++i) poses.push_back(diffuse(seq.truth[0], sigma, rng, &model));

  using clock = std::chrono::steady_clock;
  auto time_ms = [&](auto&& fn) {
    fn();  // warm caches and thread pool
    const auto t0 = clock::now();
    for (int k = 0; k < iterations; ++k) fn();
    return std::chrono::duration<double, std::milli>(clock::now() - t0).count() / iterations;
  };

  BenchResult out;
  std::vector<double> serial_scores;
  out.serial_ms = time_ms([&] { serial_scores = eval.evaluate_batch_serial(poses, frame); });
  double t1 = 0.0;
  for (int p : workers) {
    std::vector<double> scores;
    const double ms = time_ms([&] { scores = eval.evaluate_batch(poses, frame, p); });
    if (scores != serial_scores) out.identical = false;
    if (t1 == 0.0) t1 = p == 1 ? ms : time_ms([&] { scores = eval.evaluate_batch(poses, frame, 1); });
    out.rows.push_back({p, ms, perf_metrics(t1, ms, p)});
  }
  return out;
}

}  // namespace mocap
