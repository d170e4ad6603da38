#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "mocaplab/error.hpp"
#include "mocaplab/optimize.hpp"

using namespace mocap;

namespace {

const std::vector<double> kOptimum{1.0, -1.0, 0.5, 1.0, -0.3};

/// Negated squared distance to kOptimum: maximal (0) at the optimum.
std::vector<double> sphere(std::span<const PoseState> xs) {
  std::vector<double> out;
  for (const PoseState& x : xs) {
    double s = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d) s += (x[d] - kOptimum[d]) * (x[d] - kOptimum[d]);
    out.push_back(-s);
  }
  return out;
}

Swarm one_particle(double x, double v, double p, double g) {
  Swarm s;
  s.particles.push_back({{x}, {v}, {p}, 0.0});
  s.g = {g};
  s.f_g = 0.0;
  return s;
}

}  // namespace

TEST_CASE("RngPool") {
  RngPool a(42), b(42), c(43);
  for (int i = 0; i < 50000; ++i) {
    const double u = a.uniform();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
    CHECK(u == b.uniform());
  }
  CHECK(a.uniform() != c.uniform());

  RngPool fixed = RngPool::from_values({0.25, 0.75});
  CHECK(fixed.uniform() == 0.25);
  CHECK(fixed.uniform() == 0.75);
  CHECK(fixed.uniform() == 0.25);
  CHECK_THROWS_AS(RngPool::from_values({0.0}), Error);

  // Five normals consume three uniform pairs.
  RngPool n(7);
  std::vector<double> z(5);
  n.fill_normals(z);
  CHECK(n.cursor() == 6);

  RngPool big(9);
  double m = 0.0, v = 0.0;
  const int count = 100000;
  std::vector<double> zs(count);
  big.fill_normals(zs);
  for (double x : zs) m += x;
  m /= count;
  for (double x : zs) v += (x - m) * (x - m);
  v /= count;
  CHECK(std::abs(m) < 0.02);
  CHECK(std::abs(v - 1.0) < 0.02);
}

TEST_CASE("diffuse") {
  RngPool rng(1);
  const PoseState best{1.0, 2.0, 3.0};
  const std::vector<double> zero(3, 0.0);
  CHECK(diffuse(best, zero, rng) == best);

  const std::vector<double> sigma{0.5, 2.0, 0.1};
  const int n = 100000;
  std::vector<double> mean(3, 0.0);
  for (int i = 0; i < n; ++i) {
    const PoseState x = diffuse(best, sigma, rng);
    for (int d = 0; d < 3; ++d) mean[d] += x[d] / n;
  }
  for (int d = 0; d < 3; ++d) CHECK(std::abs(mean[d] - best[d]) < 3 * sigma[d] / std::sqrt(static_cast<double>(n)));

  std::vector<Bone> bones(1);
  bones[0] = {"root", -1, {Dof::Tx, Dof::Ty}, {}, {{-1, 1}, {0, 5}}};
  const SkeletonModel model(bones, {{0, {0, 0, 0}, {0, 0, 1}, 1, 1, 1}});
  const PoseState at_limit{1.0, 0.0};
  const std::vector<double> s2{0.3, 0.3};
  for (int i = 0; i < 1000; ++i) {
    const PoseState x = diffuse(at_limit, s2, rng, &model);
    CHECK(x[0] <= 1.0);
    CHECK(x[1] >= 0.0);
  }
}

TEST_CASE("PSO velocity update worked examples") {
  RngPool r = RngPool::from_values({0.5});
  Swarm s = one_particle(4.0, 2.0, 4.0, 4.0);
  pso_move(s, 0.5, 0.0, 0.0, r);
  CHECK(s.particles[0].v[0] == 1.0);
  CHECK(s.particles[0].x[0] == 5.0);

  Swarm z = one_particle(3.0, 1.5, 3.0, 3.0);
  RngPool r2(5);
  pso_move(z, 0.7, 2.0, 2.0, r2);
  CHECK(z.particles[0].v[0] == doctest::Approx(0.7 * 1.5));

  Swarm h = one_particle(0.0, 0.0, 1.0, 2.0);
  RngPool half = RngPool::from_values({0.5});
  pso_move(h, 1.0, 2.0, 2.0, half);
  CHECK(h.particles[0].v[0] == 3.0);
  CHECK(h.particles[0].x[0] == 3.0);
}

TEST_CASE("PSO best updates use strict comparison") {
  Swarm s;
  s.particles.resize(2);
  s.particles[0] = {{1.0}, {0.0}, {1.0}};
  s.particles[1] = {{2.0}, {0.0}, {2.0}};
  s.g = {0.0};
  const std::vector<double> first{0.5, 0.5};
  pso_update_bests(s, first);
  CHECK(s.f_g == 0.5);
  CHECK(s.g == PoseState{1.0});  // the tie keeps the first particle that reached 0.5

  s.particles[0].x = {9.0};
  const std::vector<double> same{0.5, 0.1};
  pso_update_bests(s, same);
  CHECK(s.particles[0].p_best == PoseState{1.0});
  CHECK(s.particles[1].p_best == PoseState{2.0});
  CHECK(s.particles[1].f_best == 0.5);
  CHECK_THROWS_AS(pso_update_bests(s, std::vector<double>{1.0}), Error);
}

TEST_CASE("pso_track_frame") {
  TrackerConfig cfg;
  cfg.particles = 96;
  cfg.iterations = 20;
  cfg.sigma.assign(5, 1.0);
  cfg.omega = 0.5;
  cfg.omega_end = 0.1;
  cfg.validate(5);
  const PoseState start(5, 0.0);

  std::vector<double> errs;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    cfg.seed = seed;
    RngPool rng(seed);
    const PsoFrameResult r = pso_track_frame(start, sphere, cfg, rng);
    CHECK(r.evaluations == 96 * 20);
    CHECK(r.f_g_history.size() == 20);
    for (std::size_t k = 1; k < r.f_g_history.size(); ++k) CHECK(r.f_g_history[k] >= r.f_g_history[k - 1]);
    double e = 0.0;
    for (int d = 0; d < 5; ++d) e = std::max(e, std::abs(r.best[d] - kOptimum[d]));
    errs.push_back(e);
  }
  std::nth_element(errs.begin(), errs.begin() + 15, errs.end());
  CHECK(errs[15] < 1e-3);

  // Elitism: the returned score never falls below the starting pose's score.
  RngPool rng(3);
  cfg.iterations = 3;
  cfg.particles = 8;
  const PoseState near_opt = kOptimum;
  const PsoFrameResult r = pso_track_frame(near_opt, sphere, cfg, rng);
  CHECK(r.score == 0.0);
  CHECK(r.best == near_opt);

  cfg.iterations = 0;
  const PsoFrameResult none = pso_track_frame(start, sphere, cfg, rng);
  CHECK(none.best == start);
  CHECK(none.evaluations == 1);
}

TEST_CASE("inertia schedule") {
  TrackerConfig cfg;
  cfg.iterations = 5;
  cfg.omega = 0.8;
  cfg.omega_end = 0.4;
  CHECK(inertia_at(cfg, 0) == 0.8);
  CHECK(inertia_at(cfg, 4) == doctest::Approx(0.4));
  CHECK(inertia_at(cfg, 2) == doctest::Approx(0.6));
}

TEST_CASE("systematic resampling traces") {
  const std::vector<double> uniform(4, 0.25);
  for (double u1 : {0.01, 0.1, 0.2499}) CHECK(systematic_resample_indices(uniform, u1) == std::vector<int>{0, 1, 2, 3});
  const std::vector<double> one_hot{1.0, 0.0, 0.0, 0.0};
  CHECK(systematic_resample_indices(one_hot, 0.2) == std::vector<int>{0, 0, 0, 0});
  const std::vector<double> halves{0.5, 0.5, 0.0, 0.0};
  CHECK(systematic_resample_indices(halves, 0.1) == std::vector<int>{0, 0, 1, 1});
}

TEST_CASE("pf_resample") {
  RngPool rng(11);
  ParticleSet ps;
  for (int i = 0; i < 5; ++i) ps.x.push_back({static_cast<double>(i)});
  ps.w.assign(5, 0.2);
  const ParticleSet same = pf_resample(ps, rng);
  CHECK(same.x == ps.x);
  CHECK(same.w == std::vector<double>(5, 0.2));

  ps.w = {0.6, 0.1, 0.1, 0.1, 0.1};
  const ParticleSet r = pf_resample(ps, rng);
  CHECK(r.x.size() == 5);
  CHECK(std::accumulate(r.w.begin(), r.w.end(), 0.0) == doctest::Approx(1.0));

  ps.w = {0.5, 0.1, 0.1, 0.1, 0.3};
  try {
    pf_resample(ps, rng);
    FAIL("expected UnnormalizedWeights");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnnormalizedWeights);
  }
  ps.w = {1.2, -0.2, 0.0, 0.0, 0.0};
  CHECK_THROWS_AS(pf_resample(ps, rng), Error);

  // Copy counts stay within one of N * w_i and average to it.
  const std::vector<double> w{0.37, 0.05, 0.21, 0.0, 0.29, 0.08};
  ParticleSet q;
  for (int i = 0; i < 6; ++i) q.x.push_back({static_cast<double>(i)});
  q.w = w;
  std::vector<double> mean(6, 0.0);
  const int reps = 10000;
  for (int k = 0; k < reps; ++k) {
    const ParticleSet out = pf_resample(q, rng);
    std::vector<int> cnt(6, 0);
    for (const auto& x : out.x) ++cnt[static_cast<int>(x[0])];
    for (int i = 0; i < 6; ++i) {
      CHECK(std::abs(cnt[i] - 6 * w[i]) < 1.0 + 1e-9);
      mean[i] += static_cast<double>(cnt[i]) / reps;
    }
  }
  for (int i = 0; i < 6; ++i) CHECK(std::abs(mean[i] - 6 * w[i]) <= 0.01 * 6 * w[i] + 1e-12);
}

TEST_CASE("PF weights and frame step") {
  for (double sz : {0.05, 0.1, 0.5})
    for (double f = 0.0; f < 1.0; f += 0.05) CHECK(pf_weight(f, sz) < pf_weight(1.0, sz));

  TrackerConfig cfg;
  cfg.algorithm = Algorithm::Pf;
  cfg.particles = 4;
  cfg.sigma.assign(2, 0.0);
  cfg.sigma_z = 0.01;
  cfg.validate(2);
  RngPool rng(2);

  // One particle scores 1, the others about 0: the estimate lands on it.
  ParticleSet ps;
  ps.x = {{0, 0}, {1, 1}, {5, -3}, {2, 2}};
  ps.w.assign(4, 0.25);
  const BatchObjective pick = [](std::span<const PoseState> xs) {
    std::vector<double> s;
    for (const auto& x : xs) s.push_back(x[0] == 5 ? 1.0 : 1e-3);
    return s;
  };
  const PfFrameResult r = pf_track_frame(ps, pick, cfg, rng);
  CHECK(r.estimate[0] == doctest::Approx(5.0));
  CHECK(r.estimate[1] == doctest::Approx(-3.0));
  CHECK(std::abs(r.weight_sum - 1.0) < 1e-12);
  for (const auto& x : ps.x) CHECK(x == PoseState{5, -3});

  // Equal scores: unweighted mean, multiset preserved.
  ParticleSet eq;
  eq.x = {{0, 0}, {1, 1}, {2, 4}, {3, 7}};
  eq.w.assign(4, 0.25);
  const BatchObjective flat = [](std::span<const PoseState> xs) { return std::vector<double>(xs.size(), 0.7); };
  const PfFrameResult m = pf_track_frame(eq, flat, cfg, rng);
  CHECK(m.estimate[0] == doctest::Approx(1.5));
  CHECK(m.estimate[1] == doctest::Approx(3.0));
  CHECK(eq.x == std::vector<PoseState>{{0, 0}, {1, 1}, {2, 4}, {3, 7}});

  // Non-finite scores everywhere: weights reset to uniform and the frame is flagged.
  ParticleSet bad = init_particle_set({1, 1}, 3);
  const BatchObjective nan = [](std::span<const PoseState> xs) {
    return std::vector<double>(xs.size(), std::numeric_limits<double>::quiet_NaN());
  };
  const PfFrameResult z = pf_track_frame(bad, nan, cfg, rng);
  CHECK(z.all_zero_weights);
  CHECK(std::abs(z.weight_sum - 1.0) < 1e-12);
}

TEST_CASE("tracker config JSON") {
  const TrackerConfig c = tracker_config_from_json(
      R"({"algorithm":"pf","particles":10,"iterations":2,"sigma":0.5,"sigma_z":0.2,"seed":9,
          "objective":{"variant":"AoSP","beta":0.3}})");
  CHECK(c.algorithm == Algorithm::Pf);
  CHECK(c.particles == 10);
  CHECK(c.seed == 9);
  CHECK(c.objective.variant == ObjectiveVariant::AoSP);
  CHECK(c.objective.beta == 0.3);
  TrackerConfig b = c;
  b.validate(4);
  CHECK(b.sigma == std::vector<double>(4, 0.5));
  const TrackerConfig back = tracker_config_from_json(tracker_config_to_json(b));
  CHECK(back.sigma == b.sigma);
  CHECK(back.sigma_z == b.sigma_z);

  for (const char* bad : {R"({"algorithm":"ga"})", R"({"particles":0})", R"({"sigma":[1,2]})", "not json"}) {
    try {
      TrackerConfig t = tracker_config_from_json(bad);
      t.validate(4);
      FAIL("expected ConfigError for " << bad);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ConfigError);
    }
  }
}
