#include "mocaplab/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "mocaplab/error.hpp"

namespace mocap {

using nlohmann::json;

void TrackerConfig::validate(int dims) {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::ConfigError, m); };
  if (particles < 1) fail("particles must be >= 1");
  if (iterations < 0) fail("iterations must be >= 0");
  if (c1 < 0.0 || c2 < 0.0) fail("c1 and c2 must be nonnegative");
  if (!(sigma_z > 0.0)) fail("sigma_z must be positive");
  for (double s : sigma)
    if (!(s >= 0.0) || !std::isfinite(s)) fail("sigma entries must be finite and nonnegative");
  if (dims > 0) {
    if (sigma.empty()) fail("sigma is required");
    if (sigma.size() == 1) sigma.assign(static_cast<std::size_t>(dims), sigma.front());
    if (static_cast<int>(sigma.size()) != dims)
      fail("sigma has " + std::to_string(sigma.size()) + " entries, state has " + std::to_string(dims));
  }
  try {
    objective.validate();
  } catch (const Error& e) {
    fail(e.what());
  }
}

TrackerConfig tracker_config_from_json(const std::string& text) {
  TrackerConfig cfg;
  try {
    const json j = json::parse(text);
    const std::string algo = j.value("algorithm", std::string("pso"));
    if (algo == "pso")
      cfg.algorithm = Algorithm::Pso;
    else if (algo == "pf")
      cfg.algorithm = Algorithm::Pf;
    else
      throw Error(ErrorCode::ConfigError, "algorithm must be \"pso\" or \"pf\"");
    cfg.particles = j.value("particles", cfg.particles);
    cfg.iterations = j.value("iterations", cfg.iterations);
    cfg.omega = j.value("omega", cfg.omega);
    cfg.omega_end = j.value("omega_end", cfg.omega_end);
    cfg.c1 = j.value("c1", cfg.c1);
    cfg.c2 = j.value("c2", cfg.c2);
    cfg.sigma_z = j.value("sigma_z", cfg.sigma_z);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("sigma")) {
      const json& s = j.at("sigma");
      if (s.is_number())
        cfg.sigma = {s.get<double>()};
      else
        cfg.sigma = s.get<std::vector<double>>();
    }
    if (j.contains("objective")) {
      const json& o = j.at("objective");
      if (o.contains("variant")) cfg.objective.variant = objective_variant_from(o.at("variant").get<std::string>());
      cfg.objective.beta = o.value("beta", cfg.objective.beta);
      cfg.objective.w1 = o.value("w1", cfg.objective.w1);
      cfg.objective.w2 = o.value("w2", cfg.objective.w2);
      cfg.objective.omega1 = o.value("omega1", cfg.objective.omega1);
      cfg.objective.omega2 = o.value("omega2", cfg.objective.omega2);
      if (o.contains("label_weights")) cfg.objective.label_weights = o.at("label_weights").get<std::vector<double>>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("tracker config: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    throw Error(ErrorCode::ConfigError, e.what());
  }
  cfg.validate();
  return cfg;
}

TrackerConfig load_tracker_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open tracker config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return tracker_config_from_json(ss.str());
}

std::string tracker_config_to_json(const TrackerConfig& cfg) {
  json j;
  j["algorithm"] = cfg.algorithm == Algorithm::Pso ? "pso" : "pf";
  j["particles"] = cfg.particles;
  j["iterations"] = cfg.iterations;
  j["omega"] = cfg.omega;
  j["omega_end"] = cfg.omega_end;
  j["c1"] = cfg.c1;
  j["c2"] = cfg.c2;
  j["sigma"] = cfg.sigma;
  j["sigma_z"] = cfg.sigma_z;
  j["seed"] = cfg.seed;
  j["objective"] = {{"variant", to_string(cfg.objective.variant)},
                    {"beta", cfg.objective.beta},
                    {"w1", cfg.objective.w1},
                    {"w2", cfg.objective.w2},
                    {"omega1", cfg.objective.omega1},
                    {"omega2", cfg.objective.omega2}};
  if (!cfg.objective.label_weights.empty()) j["objective"]["label_weights"] = cfg.objective.label_weights;
  return j.dump(2);
}

PoseState diffuse(const PoseState& best, std::span<const double> sigma, RngPool& rng, const SkeletonModel* model) {
  if (sigma.size() != best.size())
    throw Error(ErrorCode::LengthMismatch, "diffusion sigma length differs from state length");
  PoseState out(best.size());
  rng.fill_normals(out);
  for (std::size_t d = 0; d < out.size(); ++d) out[d] = best[d] + sigma[d] * out[d];
  if (model) clamp_limits_in_place(out, *model);
  return out;
}

Swarm init_swarm(const PoseState& center, int n, std::span<const double> sigma, RngPool& rng,
                 const SkeletonModel* model) {
  Swarm s;
  s.particles.resize(static_cast<std::size_t>(std::max(n, 0)));
  for (int i = 0; i < n; ++i) {
    Particle& p = s.particles[i];
    p.x = i == 0 ? center : diffuse(center, sigma, rng, model);
    p.v.assign(center.size(), 0.0);
    p.p_best = p.x;
  }
  s.g = center;
  return s;
}

void pso_update_bests(Swarm& s, std::span<const double> scores) {
  if (scores.size() != s.particles.size())
    throw Error(ErrorCode::LengthMismatch, "one score per particle is required");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    Particle& p = s.particles[i];
    if (scores[i] > p.f_best) {
      p.f_best = scores[i];
      p.p_best = p.x;
    }
    if (p.f_best > s.f_g) {
      s.f_g = p.f_best;
      s.g = p.p_best;
    }
  }
}

void pso_move(Swarm& s, double omega, double c1, double c2, RngPool& rng, const SkeletonModel* model) {
  if (s.particles.empty()) return;
  rng.reserve(2 * s.particles.size() * s.g.size());
  for (Particle& p : s.particles) {
    for (std::size_t d = 0; d < p.x.size(); ++d) {
      const double r1 = rng.uniform();
      const double r2 = rng.uniform();
      p.v[d] = omega * p.v[d] + c1 * r1 * (p.p_best[d] - p.x[d]) + c2 * r2 * (s.g[d] - p.x[d]);
      p.x[d] += p.v[d];
    }
    if (model) clamp_limits_in_place(p.x, *model);
  }
}

void pso_iteration(Swarm& s, std::span<const double> scores, double omega, double c1, double c2, RngPool& rng,
                   const SkeletonModel* model) {
  pso_update_bests(s, scores);
  pso_move(s, omega, c1, c2, rng, model);
}

double inertia_at(const TrackerConfig& cfg, int k) {
  if (cfg.iterations <= 1) return cfg.omega;
  return cfg.omega + (cfg.omega_end - cfg.omega) * static_cast<double>(k) / (cfg.iterations - 1);
}

namespace {

std::vector<PoseState> positions(const Swarm& s) {
  std::vector<PoseState> xs;
  xs.reserve(s.particles.size());
  for (const Particle& p : s.particles) xs.push_back(p.x);
  return xs;
}

std::vector<double> checked_scores(const BatchObjective& f, std::span<const PoseState> xs) {
  std::vector<double> scores = f(xs);
  if (scores.size() != xs.size()) throw Error(ErrorCode::LengthMismatch, "objective returned the wrong count");
  return scores;
}

}  // namespace

PsoFrameResult pso_track_frame(const PoseState& prev_best, const BatchObjective& f, const TrackerConfig& cfg,
                               RngPool& rng, const SkeletonModel* model) {
  PsoFrameResult r;
  if (cfg.iterations == 0) {
    const std::vector<PoseState> one{prev_best};
    r.best = prev_best;
    r.score = checked_scores(f, one).front();
    r.evaluations = 1;
    return r;
  }
  Swarm s = init_swarm(prev_best, cfg.particles, cfg.sigma, rng, model);
  for (int k = 0; k < cfg.iterations; ++k) {
    const std::vector<PoseState> xs = positions(s);
    const std::vector<double> scores = checked_scores(f, xs);
    r.evaluations += static_cast<int>(xs.size());
    pso_update_bests(s, scores);
    r.f_g_history.push_back(s.f_g);
    // The last move would never be scored, so it is skipped; the RNG
    // sequence of later frames does not depend on it either way.
    if (k + 1 < cfg.iterations) pso_move(s, inertia_at(cfg, k), cfg.c1, cfg.c2, rng, model);
  }
  r.best = s.g;
  r.score = s.f_g;
  return r;
}

ParticleSet init_particle_set(const PoseState& pose, int n) {
  ParticleSet ps;
  ps.x.assign(static_cast<std::size_t>(n), pose);
  ps.w.assign(static_cast<std::size_t>(n), n > 0 ? 1.0 / n : 0.0);
  return ps;
}

double pf_weight(double f, double sigma_z) {
  const double e = 1.0 - f;
  return std::exp(-(e * e) / (sigma_z * sigma_z)) / (sigma_z * std::sqrt(2.0 * std::numbers::pi));
}

std::vector<int> systematic_resample_indices(std::span<const double> w, double u1) {
  const int n = static_cast<int>(w.size());
  std::vector<int> idx(static_cast<std::size_t>(n));
  if (n == 0) return idx;
  const double step = 1.0 / n;
  double c = w[0];
  int i = 0;
  for (int j = 0; j < n; ++j) {
    const double u = u1 + step * j;
    while (u > c && i < n - 1) c += w[++i];
    idx[j] = i;
  }
  return idx;
}

ParticleSet pf_resample(const ParticleSet& ps, RngPool& rng) {
  double sum = 0.0;
  for (double w : ps.w) {
    if (!(w >= 0.0)) throw Error(ErrorCode::UnnormalizedWeights, "negative or NaN weight");
    sum += w;
  }
  if (ps.w.empty() || std::abs(sum - 1.0) > 1e-9)
    throw Error(ErrorCode::UnnormalizedWeights, "weights sum to " + std::to_string(sum));
  const std::size_t n = ps.w.size();
  const double u1 = rng.uniform() / static_cast<double>(n);
  const std::vector<int> idx = systematic_resample_indices(ps.w, u1);
  ParticleSet out;
  out.x.reserve(n);
  for (int i : idx) out.x.push_back(ps.x[i]);
  out.w.assign(n, 1.0 / static_cast<double>(n));
  return out;
}

PfFrameResult pf_track_frame(ParticleSet& ps, const BatchObjective& f, const TrackerConfig& cfg, RngPool& rng,
                             const SkeletonModel* model) {
  PfFrameResult r;
  const std::size_t n = ps.x.size();
  if (n == 0) throw Error(ErrorCode::BadParams, "particle set is empty");
  for (PoseState& x : ps.x) x = diffuse(x, cfg.sigma, rng, model);

  const std::vector<double> scores = checked_scores(f, ps.x);
  r.evaluations = static_cast<int>(n);
  r.score = *std::max_element(scores.begin(), scores.end());

  // Weights are formed relative to the best particle: the constant factor
  // exp(-e_min^2 / sigma_z^2) cancels in the normalization but keeps the
  // largest weight at 1 instead of underflowing for small sigma_z.
  double e2_min = std::numeric_limits<double>::infinity();
  for (double s : scores)
    if (std::isfinite(s)) e2_min = std::min(e2_min, (1.0 - s) * (1.0 - s));
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = 1.0 - scores[i];
    const double w = std::isfinite(scores[i]) ? std::exp(-(e * e - e2_min) / (cfg.sigma_z * cfg.sigma_z)) : 0.0;
    ps.w[i] = ps.w[i] * w;
    sum += ps.w[i];
  }
  if (!(sum > 0.0) || !std::isfinite(sum)) {
    r.all_zero_weights = true;
    std::fill(ps.w.begin(), ps.w.end(), 1.0 / static_cast<double>(n));
  } else {
    for (double& w : ps.w) w /= sum;
  }
  r.weight_sum = 0.0;
  for (double w : ps.w) r.weight_sum += w;

  r.estimate.assign(ps.x.front().size(), 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < r.estimate.size(); ++d) r.estimate[d] += ps.w[i] * ps.x[i][d];
  if (model) clamp_limits_in_place(r.estimate, *model);

  if (std::abs(r.weight_sum - 1.0) > 1e-9) throw Error(ErrorCode::UnnormalizedWeights, "normalization failed");
  ps = pf_resample(ps, rng);
  return r;
}

}  // namespace mocap
