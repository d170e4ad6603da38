#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace mocap {

/// Deterministic source of uniform and normal draws for the optimizers.
/// Draws are generated a block at a time from a seeded engine and consumed
/// through a cursor, so one seed always yields one sequence. A pool built
/// from explicit values replays them cyclically (for hand-traced tests).
class RngPool {
 public:
  explicit RngPool(std::uint64_t seed, std::size_t block = 1 << 14);
  static RngPool from_values(std::vector<double> values);

  /// Uniform draw in the open interval (0, 1).
  double uniform();
  /// Standard normal via Box-Muller. Consumes one uniform pair and drops the
  /// second normal of the pair.
  double normal();
  /// Fills `out` with standard normals, two per uniform pair; an odd tail
  /// consumes a full pair and drops the unused half.
  void fill_normals(std::span<double> out);

  /// Makes sure the next `n` uniforms are pre-generated.
  void reserve(std::size_t n);

  std::uint64_t seed() const { return seed_; }
  std::size_t cursor() const { return cursor_; }
  std::size_t pool_size() const { return pool_.size(); }

 private:
  RngPool() = default;
  void refill(std::size_t at_least);

  std::uint64_t seed_ = 0;
  std::size_t block_ = 0;
  bool fixed_ = false;
  std::mt19937_64 engine_;
  std::vector<double> pool_;
  std::size_t cursor_ = 0;
};

}  // namespace mocap
