// Command-line front end: synthetic data generation, tracking, evaluation and
// the evaluate_batch benchmark.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mocaplab/error.hpp"
#include "mocaplab/parallel.hpp"
#include "mocaplab/pipeline.hpp"

namespace fs = std::filesystem;
using namespace mocap;

namespace {

const std::string kDefaultModel = std::string(MOCAPLAB_DATA_DIR) + "/model.json";

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << text;
}

int run_synth(const std::string& spec_path, const std::string& out_dir, const std::string& model_path) {
  const SkeletonModel model = load_model(model_path);
  const SynthSpec spec = load_synth_spec(spec_path, model);
  const SynthSequence seq = synth_generate(spec, model, out_dir);
  std::printf("wrote %zu frames x %zu cameras to %s\n", seq.truth.size(), seq.rig.size(), out_dir.c_str());
  return 0;
}

struct TrackArgs {
  std::string rig, model, tracker, seq, out, init;
  double realtime_fps = 0.0;
  bool full_vision = false;
  bool overlay = false;
  int workers = 0;
  int max_frames = -1;
};

int run_track(const TrackArgs& a) {
  const SkeletonModel model = load_model(a.model);
  const std::vector<TsaiCamera> rig = load_rig(a.rig);
  const std::string tracker_text = slurp(a.tracker);

  TrackOptions opt;
  opt.tracker = tracker_config_from_json(tracker_text);
  opt.features = feature_config_from_json(tracker_text);
  opt.realtime_fps = a.realtime_fps;
  opt.full_vision = a.full_vision;
  opt.workers = a.workers;
  opt.max_frames = a.max_frames;

  // Starting pose: explicit file, else the sequence's own ground truth, else the bind pose.
  std::string init = a.init;
  if (init.empty() && fs::exists(fs::path(a.seq) / "truth.csv")) init = (fs::path(a.seq) / "truth.csv").string();
  if (!init.empty()) {
    const PoseTrack t = read_pose_track(init);
    if (t.poses.empty()) throw Error(ErrorCode::ConfigError, init + " holds no poses");
    opt.initial = t.poses.front();
  } else {
    opt.initial = model.bind_state();
  }

  const SequenceSource seq = SequenceSource::open_dir(a.seq);
  const TrackRun run = track_sequence(seq, rig, model, opt);
  write_track_run(a.out, run, model, opt);

  if (a.overlay && seq.has_gray()) {
    const fs::path dir = fs::path(a.out) / "overlay";
    fs::create_directories(dir);
    for (std::size_t i = 0; i < run.track.frames.size(); ++i)
      for (int c = 0; c < seq.cameras(); ++c) {
        char name[64];
        std::snprintf(name, sizeof name, "c%d_f%05d.pgm", c, run.track.frames[i]);
        write_pgm((dir / name).string(), overlay(seq.gray(run.track.frames[i], c), run.track.poses[i], model,
                                                 Projector(rig[c])));
      }
  }

  double total_ms = 0.0;
  for (double ms : run.ms) total_ms += ms;
  std::printf("tracked %zu of %d frames, %d evaluations, %.1f ms/frame, workers %d\n", run.track.frames.size(),
              seq.frames(), run.evaluations, run.ms.empty() ? 0.0 : total_ms / run.ms.size(),
              resolve_workers(a.workers));
  if (!run.pf_flagged_frames.empty())
    std::printf("warning: %zu frames had all-zero particle weights\n", run.pf_flagged_frames.size());
  return 0;
}

int run_eval(const std::string& run_path, const std::string& truth_path, const std::string& model_path) {
  const SkeletonModel model = load_model(model_path);
  const bool is_dir = fs::is_directory(run_path);
  const std::string csv = is_dir ? (fs::path(run_path) / "run.csv").string() : run_path;
  const ErrorReport r = evaluate(read_pose_track(csv), read_pose_track(truth_path), model);
  const std::string report = error_report_json(r);
  if (is_dir) write_file((fs::path(run_path) / "error.json").string(), report + "\n");
  std::printf("mean marker error %.3f mm (std %.3f mm) over %d frames, %d markers\n", r.mean, r.stddev, r.frames,
              r.markers);
  return 0;
}

int run_bench_cmd(int particles, int iters, int max_p, const std::string& model_path) {
  const SkeletonModel model = load_model(model_path);
  if (max_p <= 0) max_p = resolve_workers(0);
  std::vector<int> ps;
  for (int p = 1; p <= max_p; p *= 2) ps.push_back(p);
  if (ps.back() != max_p) ps.push_back(max_p);
  const BenchResult b = run_bench(particles, iters, ps, model);
  std::printf("evaluate_batch: %d particles x %d cameras, %d timed batches, %d hardware threads\n", particles, 4,
              iters, max_workers());
  std::printf("serial reference: %.3f ms/batch\n", b.serial_ms);
  std::printf("%8s %14s %9s %11s %12s\n", "workers", "ms/batch", "speedup", "efficiency", "karp-flatt");
  for (const BenchRow& r : b.rows) {
    std::printf("%8d %14.3f %9.3f %11.3f", r.workers, r.ms_per_batch, r.perf.speedup, r.perf.efficiency);
    if (r.perf.karp_flatt)
      std::printf(" %12.4f\n", *r.perf.karp_flatt);
    else
      std::printf(" %12s\n", "-");
  }
  std::printf("parallel scores identical to serial: %s\n", b.identical ? "yes" : "NO");
  return b.identical ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mocaplab: model-based markerless pose tracking"};
  app.require_subcommand(1);

  std::string spec_path, out_dir, synth_model = kDefaultModel;
  auto* synth = app.add_subcommand("synth", "render a synthetic sequence with ground truth");
  synth->add_option("--spec", spec_path, "synthetic sequence spec (JSON)")->required()->check(CLI::ExistingFile);
  synth->add_option("--out", out_dir, "output directory")->required();
  synth->add_option("--model", synth_model, "skeleton model (JSON)")->check(CLI::ExistingFile);

  TrackArgs ta;
  ta.model = kDefaultModel;
  auto* track = app.add_subcommand("track", "track a sequence");
  track->add_option("--rig", ta.rig, "camera rig (JSON)")->required()->check(CLI::ExistingFile);
  track->add_option("--model", ta.model, "skeleton model (JSON)")->required()->check(CLI::ExistingFile);
  track->add_option("--tracker", ta.tracker, "tracker config (JSON)")->required()->check(CLI::ExistingFile);
  track->add_option("--seq", ta.seq, "sequence directory")->required()->check(CLI::ExistingDirectory);
  track->add_option("--out", ta.out, "run output directory")->required();
  track->add_option("--realtime-sim", ta.realtime_fps, "simulate a live source at this frame rate")
      ->check(CLI::PositiveNumber);
  track->add_flag("--full-vision", ta.full_vision, "extract features from gray frames (MoG + Sobel)");
  track->add_flag("--overlay", ta.overlay, "write overlay PGMs of the estimate");
  track->add_option("--init", ta.init, "CSV whose first pose starts the tracker")->check(CLI::ExistingFile);
  track->add_option("--workers", ta.workers, "worker threads (default: MOCAPLAB_WORKERS or all)");
  track->add_option("--frames", ta.max_frames, "process only the first n frames");

  std::string run_path, truth_path, eval_model = kDefaultModel;
  auto* eval = app.add_subcommand("eval", "marker error of a run against ground truth");
  eval->add_option("--run", run_path, "run directory or run CSV")->required()->check(CLI::ExistingPath);
  eval->add_option("--truth", truth_path, "ground-truth CSV")->required()->check(CLI::ExistingFile);
  eval->add_option("--model", eval_model, "skeleton model (JSON)")->check(CLI::ExistingFile);

  int particles = 96, iters = 10, bench_workers = 0;
  std::string bench_model = kDefaultModel;
  auto* bench = app.add_subcommand("bench", "time evaluate_batch against worker count");
  bench->add_option("--particles", particles, "hypotheses per batch")->check(CLI::PositiveNumber);
  bench->add_option("--iters", iters, "timed batches per worker count")->check(CLI::PositiveNumber);
  bench->add_option("--workers", bench_workers, "largest worker count (default: all)");
  bench->add_option("--model", bench_model, "skeleton model (JSON)")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return run_synth(spec_path, out_dir, synth_model);
    if (*track) return run_track(ta);
    if (*eval) return run_eval(run_path, truth_path, eval_model);
    if (*bench) return run_bench_cmd(particles, iters, bench_workers, bench_model);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
