#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "mocaplab/error.hpp"
#include "mocaplab/pipeline.hpp"

using namespace mocap;
namespace fs = std::filesystem;

namespace {

const SkeletonModel& model() {
  static const SkeletonModel m = load_model(std::string(MOCAPLAB_DATA_DIR) + "/model.json");
  return m;
}

SynthSpec small_spec(int frames) {
  SynthSpec s;
  s.frames = frames;
  s.motion.terms.push_back({pose_index(model(), "Pelvis.t_x"), 300.0, 4.0, 0.0, 0.0});
  s.motion.terms.push_back({pose_index(model(), "Left Hip.r_y"), 0.4, 1.2, 0.0, 0.0});
  return s;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no exception");
  return ErrorCode::BadInput;
}

}  // namespace

TEST_CASE("perf_metrics worked examples") {
  const PerfReport r = perf_metrics(100, 25, 8);
  CHECK(r.speedup == 4.0);
  CHECK(r.efficiency == 0.5);
  REQUIRE(r.karp_flatt.has_value());
  CHECK(*r.karp_flatt == doctest::Approx(1.0 / 7).epsilon(1e-15));

  const PerfReport g = perf_metrics(10, 10, 8, 0.1);
  REQUIRE(g.gustafson.has_value());
  CHECK(*g.gustafson == doctest::Approx(7.3));
  REQUIRE(g.amdahl.has_value());
  CHECK(*g.amdahl == doctest::Approx(1.0 / (0.1 + 0.9 / 8)));

  const PerfReport one = perf_metrics(30, 20, 1);
  CHECK(one.speedup == 1.5);
  CHECK(one.efficiency == 1.5);
  CHECK_FALSE(one.karp_flatt.has_value());

  const PerfReport little = perf_metrics(1, 1, 2, std::nullopt, 0.13, 11.0);
  REQUIRE(little.parallelism.has_value());
  CHECK(*little.parallelism == doctest::Approx(1.43));

  CHECK(code_of([] { perf_metrics(1, 0, 2); }) == ErrorCode::BadInput);
  CHECK(code_of([] { perf_metrics(1, 1, 0); }) == ErrorCode::BadInput);
  CHECK(code_of([] { perf_metrics(0, 1, 2); }) == ErrorCode::BadInput);
  CHECK(code_of([] { perf_metrics(1, 1, 2, 1.5); }) == ErrorCode::BadInput);
}

TEST_CASE("evaluate") {
  const SkeletonModel& m = model();
  PoseTrack truth;
  truth.frames = {0, 1};
  truth.poses = {m.bind_state(), m.bind_state()};
  const ErrorReport same = evaluate(truth, truth, m);
  CHECK(same.mean == 0.0);
  CHECK(same.stddev == 0.0);
  CHECK(same.markers == 2 * static_cast<int>(m.parts().size()));

  // A root shift of (3, 4, 0) on one of two frames moves every marker by 5 mm there.
  PoseTrack run = truth;
  run.poses[1][0] += 3;
  run.poses[1][1] += 4;
  const ErrorReport r = evaluate(run, truth, m);
  for (double e : r.per_frame[1]) CHECK(e == doctest::Approx(5.0));
  for (double e : r.per_frame[0]) CHECK(e == 0.0);
  for (double e : r.per_marker) CHECK(e == doctest::Approx(2.5));
  CHECK(r.mean == doctest::Approx(2.5));
  CHECK(r.stddev == doctest::Approx(2.5));

  run.poses[0] = run.poses[1];
  CHECK(evaluate(run, truth, m).per_marker[0] == doctest::Approx(5.0));

  // Nearest-frame alignment: run frame 3 maps onto truth frame 2 (ties to the earlier).
  PoseTrack sparse;
  sparse.frames = {0, 2, 4};
  sparse.poses = {m.bind_state(), run.poses[1], m.bind_state()};
  PoseTrack one;
  one.frames = {3};
  one.poses = {run.poses[1]};
  CHECK(evaluate(one, sparse, m).mean == 0.0);

  PoseTrack bad = truth;
  bad.poses[0].pop_back();
  CHECK(code_of([&] { evaluate(bad, truth, m); }) == ErrorCode::LengthMismatch);
  CHECK(code_of([&] { evaluate(PoseTrack{}, truth, m); }) == ErrorCode::LengthMismatch);
  CHECK(error_report_json(r).find("\"mean_mm\"") != std::string::npos);
}

TEST_CASE("pose CSV round trip") {
  const SkeletonModel& m = model();
  PoseTrack t;
  t.frames = {0, 3};
  PoseState p = m.bind_state();
  p[5] = 0.1 + 1e-13;
  p[0] = -1234.56789012345;
  t.poses = {m.bind_state(), p};
  t.scores = {0.25, 1.0 / 3};
  const auto path = (fs::temp_directory_path() / "mocaplab_track.csv").string();
  write_pose_track(path, t, m);
  const PoseTrack back = read_pose_track(path);
  CHECK(back.frames == t.frames);
  CHECK(back.poses == t.poses);
  CHECK(back.scores == t.scores);
  CHECK(pose_track_csv(back, m) == pose_track_csv(t, m));
  fs::remove(path);
  CHECK(pose_column_names(m).front() == "Pelvis.t_x");
  CHECK(code_of([] { read_pose_track("/nonexistent/track.csv"); }) == ErrorCode::BadInput);
}

TEST_CASE("synthetic sequences") {
  const SkeletonModel& m = model();
  SynthSpec still;
  still.frames = 4;
  still.motion.terms.push_back({pose_index(m, "Left Knee.r_y"), 0.0, 1.0, 0.0, 0.3});
  const SynthSequence s = synth_render(still, m);
  for (int f = 1; f < 4; ++f)
    for (std::size_t c = 0; c < s.rig.size(); ++c) {
      CHECK(s.silhouettes[f][c] == s.silhouettes[0][c]);
      CHECK(s.edges[f][c] == s.edges[0][c]);
    }

  const SynthSpec walk = small_spec(6);
  const SynthSequence w = synth_render(walk, m);
  CHECK(w.truth[0] == walk.motion.evaluate(0.0, m));
  CHECK(w.truth[5] == walk.motion.evaluate(5 / walk.fps, m));
  for (const auto& frame : w.silhouettes)
    for (const BinaryImage& sil : frame) {
      int area = 0;
      for (auto v : sil.data()) area += v != 0;
      CHECK(area > 0);
    }

  // Same seed, same noisy frames.
  SynthSpec noisy = walk;
  noisy.noise = 0.01;
  CHECK(synth_render(noisy, m).silhouettes == synth_render(noisy, m).silhouettes);

  CHECK(code_of([&] { pose_index(m, "Left Knee.t_x"); }) == ErrorCode::BadScript);
  CHECK(code_of([&] { pose_index(m, "Nobody.r_y"); }) == ErrorCode::BadScript);
  CHECK(code_of([&] {
          synth_spec_from_json(R"({"motion":{"terms":[{"dof":"Pelvis.t_x","period":0}]}})", m);
        }) == ErrorCode::BadScript);
  SynthSpec away = still;
  away.motion.terms.push_back({0, 0.0, 1.0, 0.0, 2598.0});  // onto the first ring camera
  away.motion.terms.push_back({1, 0.0, 1.0, 0.0, 1500.0});
  CHECK(code_of([&] { synth_render(away, m); }) == ErrorCode::BadScript);
}

TEST_CASE("tracking with zero diffusion reproduces the truth") {
  const SkeletonModel& m = model();
  const SynthSequence seq = synth_render(small_spec(5), m);
  TrackOptions opt;
  opt.tracker.particles = 8;
  opt.tracker.iterations = 3;
  opt.tracker.sigma.assign(m.dof_count(), 0.0);
  opt.initial = seq.truth[0];
  for (Algorithm a : {Algorithm::Pso, Algorithm::Pf}) {
    opt.tracker.algorithm = a;
    const TrackRun run = track_sequence(SequenceSource::in_memory(seq), seq.rig, m, opt);
    REQUIRE(run.track.poses.size() == 5);
    // With no spread every hypothesis is the initial pose.
    for (const PoseState& p : run.track.poses) CHECK(p == seq.truth[0]);
  }

  // A frozen tracker evaluated against itself.
  PoseTrack truth;
  for (int f = 0; f < 5; ++f) {
    truth.frames.push_back(f);
    truth.poses.push_back(seq.truth[f]);
  }
  CHECK(evaluate(truth, truth, m).mean == 0.0);
}

TEST_CASE("realtime simulation drops frames when tracking is slow") {
  const SkeletonModel& m = model();
  const SynthSequence seq = synth_render(small_spec(10), m);
  TrackOptions opt;
  opt.tracker.particles = 4;
  opt.tracker.iterations = 1;
  opt.tracker.sigma.assign(m.dof_count(), 0.01);
  opt.tracker.validate(m.dof_count());
  opt.initial = seq.truth[0];
  opt.realtime_fps = 25.0;

  opt.cost_ms = [](int) { return 100.0; };  // 2.5 frame periods
  const TrackRun slow = track_sequence(SequenceSource::in_memory(seq), seq.rig, m, opt);
  // Done at 100, 200, 300 and 400 ms: the newest frame available then is taken next.
  CHECK(slow.track.frames == std::vector<int>{0, 2, 5, 7});

  opt.cost_ms = [](int) { return 10.0; };
  const TrackRun fast = track_sequence(SequenceSource::in_memory(seq), seq.rig, m, opt);
  CHECK(fast.track.frames.size() == 10);
}

TEST_CASE("missing frames") {
  const SkeletonModel& m = model();
  const auto dir = fs::temp_directory_path() / "mocaplab_missing";
  fs::remove_all(dir);
  const SynthSequence seq = synth_generate(small_spec(3), m, dir.string());
  const SequenceSource src = SequenceSource::open_dir(dir.string());
  CHECK(src.frames() == 3);
  BinaryImage sil, edges;
  src.features(2, 1, sil, edges);
  CHECK(sil == seq.silhouettes[2][1]);
  CHECK(code_of([&] { src.features(3, 0, sil, edges); }) == ErrorCode::MissingFrame);
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.path().filename().string().find("f00001") != std::string::npos) {
      fs::remove(entry.path());
      break;
    }
  int missing = 0;
  for (int c = 0; c < src.cameras(); ++c) {
    try {
      src.features(1, c, sil, edges);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MissingFrame);
      ++missing;
    }
  }
  CHECK(missing == 1);
  fs::remove_all(dir);
}
