#include "mocaplab/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <numeric>

#include "mocaplab/error.hpp"

namespace mocap {

// ---------------------------------------------------------------------------
// MoG
// ---------------------------------------------------------------------------

double mog_weight_update(double weight, double alpha, bool matched) {
  return (1.0 - alpha) * weight + alpha * (matched ? 1.0 : 0.0);
}

void mog_component_update(MogComponent& c, double x, double rho, double variance_min) {
  c.mean = (1.0 - rho) * c.mean + rho * x;
  const double diff = x - c.mean;
  c.variance = std::max(variance_min, (1.0 - rho) * c.variance + rho * diff * diff);
}

double gaussian_density(double x, double mean, double variance) {
  const double d = x - mean;
  return std::exp(-0.5 * d * d / variance) / std::sqrt(2.0 * std::numbers::pi * variance);
}

MogModel::MogModel(int width, int height, MogParams params) : width_(width), height_(height), params_(params) {
  if (width < 1 || height < 1) throw Error(ErrorCode::BadParams, "MoG model needs a non-empty image");
  if (params_.components < 1) throw Error(ErrorCode::BadParams, "MoG needs at least one component");
  if (!(params_.learning_rate > 0.0 && params_.learning_rate <= 1.0))
    throw Error(ErrorCode::BadParams, "MoG learning rate must be in (0,1]");
  comps_.resize(static_cast<std::size_t>(width) * height * params_.components);
}

bool MogModel::update_pixel(MogComponent* mix, double x) const {
  const int k_count = params_.components;
  const double alpha = params_.learning_rate;

  int hit = -1;
  for (int k = 0; k < k_count; ++k) {
    const MogComponent& c = mix[k];
    if (c.weight > 0.0 && std::abs(x - c.mean) <= params_.match_sigmas * std::sqrt(c.variance)) {
      hit = k;
      break;
    }
  }

  if (hit >= 0) {
    const double rho = alpha * gaussian_density(x, mix[hit].mean, mix[hit].variance);
    for (int k = 0; k < k_count; ++k) mix[k].weight = mog_weight_update(mix[k].weight, alpha, k == hit);
    mog_component_update(mix[hit], x, rho, params_.variance_min);
  } else {
    hit = 0;
    for (int k = 1; k < k_count; ++k)
      if (mix[k].weight < mix[hit].weight) hit = k;
    for (int k = 0; k < k_count; ++k) mix[k].weight = mog_weight_update(mix[k].weight, alpha, false);
    mix[hit] = {params_.weight_init, x, params_.sigma_init * params_.sigma_init};
  }

  double total = 0.0;
  for (int k = 0; k < k_count; ++k) total += mix[k].weight;
  for (int k = 0; k < k_count; ++k) mix[k].weight /= total;

  // Insertion sort by weight/sigma, tracking where the hit component lands.
  for (int i = 1; i < k_count; ++i) {
    for (int j = i; j > 0; --j) {
      const double a = mix[j - 1].weight / std::sqrt(mix[j - 1].variance);
      const double b = mix[j].weight / std::sqrt(mix[j].variance);
      if (b <= a) break;
      std::swap(mix[j - 1], mix[j]);
      if (hit == j) hit = j - 1;
      else if (hit == j - 1) hit = j;
    }
  }

  double cumulative = 0.0;
  int background_count = k_count;
  for (int k = 0; k < k_count; ++k) {
    cumulative += mix[k].weight;
    if (cumulative >= params_.background_fraction) {
      background_count = k + 1;
      break;
    }
  }
  return hit >= background_count;
}

BinaryImage MogModel::apply(const GrayImage& frame) {
  if (!frame.same_size(width_, height_)) throw Error(ErrorCode::DimensionMismatch, "frame size differs from MoG model");
  const int k_count = params_.components;
  BinaryImage fg(width_, height_, 0);
  if (!initialized_) {
    for (std::size_t i = 0; i < frame.size(); ++i) {
      MogComponent* mix = comps_.data() + i * k_count;
      mix[0] = {1.0, static_cast<double>(frame.data()[i]), params_.sigma_init * params_.sigma_init};
      for (int k = 1; k < k_count; ++k) mix[k] = {0.0, 0.0, params_.sigma_init * params_.sigma_init};
    }
    initialized_ = true;
    return fg;
  }
  for (std::size_t i = 0; i < frame.size(); ++i)
    fg.data()[i] = update_pixel(comps_.data() + i * k_count, frame.data()[i]) ? 1 : 0;
  return fg;
}

// ---------------------------------------------------------------------------
// Edges and morphology
// ---------------------------------------------------------------------------

RealImage gaussian3x3(const GrayImage& frame) {
  const int w = frame.width(), h = frame.height();
  RealImage out(w, h);
  auto at = [&](int x, int y) { return static_cast<int>(frame(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1))); };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int s = at(x - 1, y - 1) + 2 * at(x, y - 1) + at(x + 1, y - 1) + 2 * at(x - 1, y) + 4 * at(x, y) +
                    2 * at(x + 1, y) + at(x - 1, y + 1) + 2 * at(x, y + 1) + at(x + 1, y + 1);
      out(x, y) = s / 16.0;
    }
  }
  return out;
}

RealImage sobel_magnitude(const GrayImage& frame, bool smooth) {
  const int w = frame.width(), h = frame.height();
  if (w < 3 || h < 3) throw Error(ErrorCode::ImageTooSmall, "Sobel needs at least 3x3 pixels");
  RealImage src;
  if (smooth) {
    src = gaussian3x3(frame);
  } else {
    src = RealImage(w, h);
    std::copy(frame.data().begin(), frame.data().end(), src.data().begin());
  }
  RealImage mag(w, h, 0.0);
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const double gx = (src(x + 1, y - 1) + 2.0 * src(x + 1, y) + src(x + 1, y + 1)) -
                        (src(x - 1, y - 1) + 2.0 * src(x - 1, y) + src(x - 1, y + 1));
      const double gy = (src(x - 1, y + 1) + 2.0 * src(x, y + 1) + src(x + 1, y + 1)) -
                        (src(x - 1, y - 1) + 2.0 * src(x, y - 1) + src(x + 1, y - 1));
      mag(x, y) = std::abs(gx) + std::abs(gy);
    }
  }
  return mag;
}

BinaryImage sobel_edges(const GrayImage& frame, double threshold, bool smooth) {
  if (!(threshold > 0.0)) throw Error(ErrorCode::BadParams, "edge threshold must be positive");
  const RealImage mag = sobel_magnitude(frame, smooth);
  BinaryImage out(frame.width(), frame.height(), 0);
  for (std::size_t i = 0; i < mag.size(); ++i) out.data()[i] = mag.data()[i] >= threshold ? 1 : 0;
  return out;
}

BinaryImage dilate3x3(const BinaryImage& mask, int iterations) {
  BinaryImage cur = mask;
  const int w = mask.width(), h = mask.height();
  for (int it = 0; it < iterations; ++it) {
    BinaryImage next(w, h, 0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        std::uint8_t v = 0;
        for (int dy = -1; dy <= 1 && !v; ++dy) {
          const int yy = y + dy;
          if (yy < 0 || yy >= h) continue;
          for (int dx = -1; dx <= 1; ++dx) {
            const int xx = x + dx;
            if (xx >= 0 && xx < w && cur(xx, yy)) {
              v = 1;
              break;
            }
          }
        }
        next(x, y) = v;
      }
    }
    cur = std::move(next);
  }
  return cur;
}

BinaryImage mask_edges(const BinaryImage& edges, const BinaryImage& silhouette, int dilate_iterations) {
  if (!edges.same_size(silhouette)) throw Error(ErrorCode::DimensionMismatch, "edge and silhouette sizes differ");
  const BinaryImage grown = dilate3x3(silhouette, dilate_iterations);
  BinaryImage out(edges.width(), edges.height(), 0);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = (edges.data()[i] && grown.data()[i]) ? 1 : 0;
  return out;
}

// ---------------------------------------------------------------------------
// Distance maps
// ---------------------------------------------------------------------------

double metric_distance(DistanceMetric metric, int dx, int dy) {
  const double ax = std::abs(dx), ay = std::abs(dy);
  switch (metric) {
    case DistanceMetric::Euclidean: return std::sqrt(ax * ax + ay * ay);
    case DistanceMetric::CityBlock: return ax + ay;
    case DistanceMetric::Chessboard: return std::max(ax, ay);
    case DistanceMetric::Quasi:
      return ax > ay ? ax + (std::numbers::sqrt2 - 1.0) * ay : (std::numbers::sqrt2 - 1.0) * ax + ay;
  }
  return 0.0;
}

namespace {

constexpr double kUnreached = 1e30;

void chamfer(RealImage& d, double straight, double diagonal) {
  const int w = d.width(), h = d.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double v = d(x, y);
      if (x > 0) v = std::min(v, d(x - 1, y) + straight);
      if (y > 0) {
        v = std::min(v, d(x, y - 1) + straight);
        if (x > 0) v = std::min(v, d(x - 1, y - 1) + diagonal);
        if (x + 1 < w) v = std::min(v, d(x + 1, y - 1) + diagonal);
      }
      d(x, y) = v;
    }
  }
  for (int y = h - 1; y >= 0; --y) {
    for (int x = w - 1; x >= 0; --x) {
      double v = d(x, y);
      if (x + 1 < w) v = std::min(v, d(x + 1, y) + straight);
      if (y + 1 < h) {
        v = std::min(v, d(x, y + 1) + straight);
        if (x + 1 < w) v = std::min(v, d(x + 1, y + 1) + diagonal);
        if (x > 0) v = std::min(v, d(x - 1, y + 1) + diagonal);
      }
      d(x, y) = v;
    }
  }
}

// Lower envelope of parabolas: out[q] = min_p (q - p)^2 + f[p].
void squared_distance_1d(const std::vector<double>& f, std::vector<double>& out, std::vector<int>& v,
                         std::vector<double>& z) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const int n = static_cast<int>(f.size());
  int k = 0;
  v[0] = 0;
  z[0] = -inf;
  z[1] = inf;
  for (int q = 1; q < n; ++q) {
    double s = 0.0;
    while (true) {
      const int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
      if (s > z[k]) break;
      --k;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double d = q - v[k];
    out[q] = d * d + f[v[k]];
  }
}

void euclidean(RealImage& d) {
  const int w = d.width(), h = d.height();
  const int n = std::max(w, h);
  std::vector<double> f(n), out(n), z(n + 1);
  std::vector<int> v(n);
  // Column pass then row pass on squared distances.
  f.resize(h);
  out.resize(h);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[y] = d(x, y);
    squared_distance_1d(f, out, v, z);
    for (int y = 0; y < h; ++y) d(x, y) = out[y];
  }
  f.resize(w);
  out.resize(w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f[x] = d(x, y);
    squared_distance_1d(f, out, v, z);
    for (int x = 0; x < w; ++x) d(x, y) = std::sqrt(out[x]);
  }
}

}  // namespace

DistanceMap distance_map(const BinaryImage& edges, DistanceMetric metric, double saturation) {
  DistanceMap out;
  const int w = edges.width(), h = edges.height();
  const bool any = std::any_of(edges.data().begin(), edges.data().end(), [](std::uint8_t v) { return v != 0; });
  if (!any) {
    out.values = RealImage(w, h, saturation);
    out.no_edges = true;
    return out;
  }
  out.values = RealImage(w, h, kUnreached);
  for (std::size_t i = 0; i < edges.size(); ++i)
    if (edges.data()[i]) out.values.data()[i] = 0.0;
  switch (metric) {
    case DistanceMetric::CityBlock: chamfer(out.values, 1.0, kUnreached); break;
    case DistanceMetric::Chessboard: chamfer(out.values, 1.0, 1.0); break;
    case DistanceMetric::Quasi: chamfer(out.values, 1.0, std::numbers::sqrt2); break;
    case DistanceMetric::Euclidean: euclidean(out.values); break;
  }
  return out;
}

void validate(const NormalizeParams& p, NormalizeFn fn) {
  if (fn == NormalizeFn::Impulse) return;
  if (!(p.d_min < p.d_max)) throw Error(ErrorCode::BadParams, "d_min must be below d_max");
  if (!(p.n_range > 0.0 && p.n_range <= 1.0)) throw Error(ErrorCode::BadParams, "n_range must be in (0,1]");
  if (fn == NormalizeFn::Exponential && !(p.m > 0.0 && p.m < 1.0))
    throw Error(ErrorCode::BadParams, "exponential rate m must be in (0,1)");
}

double normalize_value(double d, NormalizeFn fn, const NormalizeParams& p) {
  switch (fn) {
    case NormalizeFn::Impulse: return d == 0.0 ? 1.0 : 0.0;
    case NormalizeFn::Proportional:
      if (d <= p.d_min) return 1.0;
      if (d >= p.d_max) return 0.0;
      return 1.0 - p.n_range * (d - p.d_min) / (p.d_max - p.d_min);
    case NormalizeFn::Exponential:
      if (d <= p.d_min) return 1.0;
      if (d >= p.d_max) return 0.0;
      return p.n_range * std::exp(-p.m * (d - p.d_min)) + (1.0 - p.n_range);
  }
  return 0.0;
}

RealImage normalize_map(const DistanceMap& d, NormalizeFn fn, const NormalizeParams& p) {
  validate(p, fn);
  RealImage out(d.values.width(), d.values.height());
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = normalize_value(d.values.data()[i], fn, p);
  return out;
}

// ---------------------------------------------------------------------------
// ROI and encoding
// ---------------------------------------------------------------------------

RoiRect compute_roi(const BinaryImage& silhouette, const RoiParams& params) {
  const int w = silhouette.width(), h = silhouette.height();
  struct Blob {
    int area = 0;
    int x0, y0, x1, y1;
  };
  std::vector<Blob> blobs;
  std::vector<int> seen(silhouette.size(), 0);
  std::vector<int> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * w + x;
      if (!silhouette.data()[idx] || seen[idx]) continue;
      Blob b{0, x, y, x, y};
      seen[idx] = 1;
      stack.assign(1, static_cast<int>(idx));
      while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        const int cx = cur % w, cy = cur / w;
        ++b.area;
        b.x0 = std::min(b.x0, cx);
        b.x1 = std::max(b.x1, cx);
        b.y0 = std::min(b.y0, cy);
        b.y1 = std::max(b.y1, cy);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const std::size_t n = static_cast<std::size_t>(ny) * w + nx;
            if (silhouette.data()[n] && !seen[n]) {
              seen[n] = 1;
              stack.push_back(static_cast<int>(n));
            }
          }
        }
      }
      if (b.area >= params.min_area) blobs.push_back(b);
    }
  }
  if (blobs.empty()) return full_roi(w, h);
  std::stable_sort(blobs.begin(), blobs.end(), [](const Blob& a, const Blob& b) { return a.area > b.area; });
  if (static_cast<int>(blobs.size()) > params.max_objects) blobs.resize(params.max_objects);
  int x0 = w, y0 = h, x1 = -1, y1 = -1;
  for (const Blob& b : blobs) {
    x0 = std::min(x0, b.x0);
    y0 = std::min(y0, b.y0);
    x1 = std::max(x1, b.x1);
    y1 = std::max(y1, b.y1);
  }
  const RoiRect grown{x0 - params.margin, y0 - params.margin, x1 - x0 + 1 + 2 * params.margin,
                      y1 - y0 + 1 + 2 * params.margin};
  return clamp_roi(grown, w, h);
}

std::uint8_t quantize_distance(double n) {
  const double clamped = std::clamp(n, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(127.0 * clamped + 0.5));
}

EncodedImage encode_reference(const BinaryImage& silhouette, const RealImage& normalized) {
  if (!silhouette.same_size(normalized)) throw Error(ErrorCode::DimensionMismatch, "silhouette and map sizes differ");
  EncodedImage out(silhouette.width(), silhouette.height(), 0);
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = static_cast<std::uint8_t>(quantize_distance(normalized.data()[i]) |
                                              (silhouette.data()[i] ? kFlagBit : 0));
  return out;
}

}  // namespace mocap
