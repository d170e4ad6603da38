#include "mocaplab/rng.hpp"

#include <cmath>
#include <numbers>

#include "mocaplab/error.hpp"

namespace mocap {

RngPool::RngPool(std::uint64_t seed, std::size_t block) : seed_(seed), block_(block == 0 ? 1 : block), engine_(seed) {
  refill(block_);
}

RngPool RngPool::from_values(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::BadParams, "fixed RNG pool needs at least one value");
  for (double v : values)
    if (!(v > 0.0 && v < 1.0)) throw Error(ErrorCode::BadParams, "fixed RNG values must lie in (0,1)");
  RngPool p;
  p.fixed_ = true;
  p.pool_ = std::move(values);
  return p;
}

void RngPool::refill(std::size_t at_least) {
  // Unconsumed draws move to the front, fresh ones follow. The engine output is
  // mapped by hand (53 high bits, half-ulp offset) so the sequence does not
  // depend on the standard library's distribution implementation.
  std::vector<double> next(pool_.begin() + static_cast<std::ptrdiff_t>(cursor_), pool_.end());
  const std::size_t target = std::max(at_least, block_);
  while (next.size() < target) {
    const std::uint64_t bits = engine_() >> 11;
    next.push_back((static_cast<double>(bits) + 0.5) * 0x1.0p-53);
  }
  pool_ = std::move(next);
  cursor_ = 0;
}

void RngPool::reserve(std::size_t n) {
  if (fixed_ || pool_.size() - cursor_ >= n) return;
  refill(n);
}

double RngPool::uniform() {
  if (cursor_ == pool_.size()) {
    if (fixed_)
      cursor_ = 0;
    else
      refill(block_);
  }
  return pool_[cursor_++];
}

namespace {

std::pair<double, double> box_muller(double u1, double u2) {
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(a), r * std::sin(a)};
}

}  // namespace

double RngPool::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return box_muller(u1, u2).first;
}

void RngPool::fill_normals(std::span<double> out) {
  reserve(out.size() + 1);
  for (std::size_t i = 0; i < out.size(); i += 2) {
    const double u1 = uniform();
    const double u2 = uniform();
    const auto [z0, z1] = box_muller(u1, u2);
    out[i] = z0;
    if (i + 1 < out.size()) out[i + 1] = z1;
  }
}

}  // namespace mocap
