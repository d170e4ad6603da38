#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mocaplab/objective.hpp"
#include "mocaplab/rng.hpp"
#include "mocaplab/skeleton.hpp"

namespace mocap {

/// Scores a batch of hypotheses; output order matches input order.
using BatchObjective = std::function<std::vector<double>(std::span<const PoseState>)>;

enum class Algorithm { Pso, Pf };

struct TrackerConfig {
  Algorithm algorithm = Algorithm::Pso;
  int particles = 96;
  int iterations = 10;
  double omega = 0.8;      // inertia at the first iteration
  double omega_end = 0.4;  // inertia at the last iteration (linear decay)
  double c1 = 2.05 * 0.72;
  double c2 = 2.05 * 0.72;
  std::vector<double> sigma;  // diffusion std-dev per state dimension
  double sigma_z = 0.1;       // observation noise of the PF likelihood
  std::uint64_t seed = 1;
  ObjectiveConfig objective;

  /// Checks ranges; with `dims` > 0 also broadcasts a scalar sigma and checks
  /// its length. Throws Error{ConfigError}.
  void validate(int dims = 0);
};

/// Parses {algorithm, particles, iterations, omega, omega_end, c1, c2, sigma,
/// sigma_z, seed, objective{variant, beta, w1, w2, omega1, omega2}}.
TrackerConfig tracker_config_from_json(const std::string& text);
TrackerConfig load_tracker_config(const std::string& path);
std::string tracker_config_to_json(const TrackerConfig& cfg);

/// best + sigma_d * N(0,1) per dimension, then joint limits when `model` is set.
PoseState diffuse(const PoseState& best, std::span<const double> sigma, RngPool& rng,
                  const SkeletonModel* model = nullptr);

struct Particle {
  PoseState x;
  std::vector<double> v;
  PoseState p_best;
  double f_best = -std::numeric_limits<double>::infinity();
};

struct Swarm {
  std::vector<Particle> particles;
  PoseState g;
  double f_g = -std::numeric_limits<double>::infinity();
};

/// Particle 0 sits on `center`, the rest are diffused around it; v = 0.
Swarm init_swarm(const PoseState& center, int n, std::span<const double> sigma, RngPool& rng,
                 const SkeletonModel* model = nullptr);

/// Personal and global bests from `scores` (strict > replaces).
void pso_update_bests(Swarm& s, std::span<const double> scores);
/// Velocity and position update with fresh r1, r2 per particle and dimension.
void pso_move(Swarm& s, double omega, double c1, double c2, RngPool& rng, const SkeletonModel* model = nullptr);
/// One synchronous iteration: bests first, then the move.
void pso_iteration(Swarm& s, std::span<const double> scores, double omega, double c1, double c2, RngPool& rng,
                   const SkeletonModel* model = nullptr);

/// Inertia of iteration k out of `iterations`.
double inertia_at(const TrackerConfig& cfg, int k);

struct PsoFrameResult {
  PoseState best;
  double score = 0.0;
  std::vector<double> f_g_history;  // f_g after every iteration
  int evaluations = 0;
};

PsoFrameResult pso_track_frame(const PoseState& prev_best, const BatchObjective& f, const TrackerConfig& cfg,
                               RngPool& rng, const SkeletonModel* model = nullptr);

struct ParticleSet {
  std::vector<PoseState> x;
  std::vector<double> w;
};

ParticleSet init_particle_set(const PoseState& pose, int n);

/// Unnormalized likelihood exp(-(1 - f)^2 / sigma_z^2) / (sigma_z sqrt(2 pi)).
double pf_weight(double f, double sigma_z);

/// Systematic resampling with the first pointer at `u1` in [0, 1/N).
std::vector<int> systematic_resample_indices(std::span<const double> w, double u1);

/// Throws Error{UnnormalizedWeights} unless weights are nonnegative and sum to 1.
ParticleSet pf_resample(const ParticleSet& ps, RngPool& rng);

struct PfFrameResult {
  PoseState estimate;
  double score = 0.0;       // best particle score of the frame
  double weight_sum = 0.0;  // sum of normalized weights
  bool all_zero_weights = false;
  int evaluations = 0;
};

/// Predict, weigh, normalize, estimate (weighted mean), resample.
PfFrameResult pf_track_frame(ParticleSet& ps, const BatchObjective& f, const TrackerConfig& cfg, RngPool& rng,
                             const SkeletonModel* model = nullptr);

}  // namespace mocap
