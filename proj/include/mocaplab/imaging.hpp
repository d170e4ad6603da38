#pragma once

#include <cstdint>
#include <vector>

#include "mocaplab/image.hpp"

namespace mocap {

// ---------------------------------------------------------------------------
// Mixture-of-Gaussians background model (grayscale)
// ---------------------------------------------------------------------------

struct MogParams {
  int components = 3;                 // K
  double learning_rate = 0.01;        // alpha
  double match_sigmas = 2.5;          // match if |X - mu| <= match_sigmas * sigma
  double background_fraction = 0.7;   // T
  double sigma_init = 30.0;           // intensity levels
  double weight_init = 0.05;
  double variance_min = 4.0;
};

struct MogComponent {
  double weight = 0.0;
  double mean = 0.0;
  double variance = 0.0;
};

/// Weight step: (1 - alpha) * w + alpha * M, M = 1 for the matched component.
double mog_weight_update(double weight, double alpha, bool matched);
/// Mean then variance update of a matched component with learning factor rho.
void mog_component_update(MogComponent& c, double x, double rho, double variance_min);
double gaussian_density(double x, double mean, double variance);

/// Per-pixel mixtures, kept sorted by weight/sigma descending. The first
/// frame initializes the model and is reported as background.
class MogModel {
 public:
  MogModel(int width, int height, MogParams params = {});

  int width() const { return width_; }
  int height() const { return height_; }
  const MogParams& params() const { return params_; }
  bool initialized() const { return initialized_; }
  /// Mixture of pixel (x, y); `components` entries.
  const MogComponent* pixel(int x, int y) const {
    return comps_.data() + (static_cast<std::size_t>(y) * width_ + x) * params_.components;
  }

  /// Classifies `frame` (1 = foreground) and updates the mixtures.
  /// Throws Error{DimensionMismatch}.
  BinaryImage apply(const GrayImage& frame);

 private:
  bool update_pixel(MogComponent* mix, double x) const;

  int width_;
  int height_;
  MogParams params_;
  bool initialized_ = false;
  std::vector<MogComponent> comps_;
};

inline BinaryImage mog_apply(MogModel& model, const GrayImage& frame) { return model.apply(frame); }

// ---------------------------------------------------------------------------
// Edges and morphology
// ---------------------------------------------------------------------------

/// 3x3 binomial smoothing, border pixels replicated. Values scaled to intensity.
RealImage gaussian3x3(const GrayImage& frame);

/// |G_x| + |G_y| with the 3x3 Sobel masks; border pixels are 0.
/// Throws Error{ImageTooSmall} below 3x3.
RealImage sobel_magnitude(const GrayImage& frame, bool smooth = true);

/// Pixels with magnitude >= threshold (threshold > 0). Throws Error{BadParams}.
BinaryImage sobel_edges(const GrayImage& frame, double threshold, bool smooth = true);

BinaryImage dilate3x3(const BinaryImage& mask, int iterations);

/// edges AND dilate3x3(silhouette, dilate_iterations). Throws Error{DimensionMismatch}.
BinaryImage mask_edges(const BinaryImage& edges, const BinaryImage& silhouette, int dilate_iterations = 1);

// ---------------------------------------------------------------------------
// Distance maps and normalization
// ---------------------------------------------------------------------------

enum class DistanceMetric { Euclidean, CityBlock, Chessboard, Quasi };

double metric_distance(DistanceMetric metric, int dx, int dy);

struct DistanceMap {
  RealImage values;
  bool no_edges = false;  // set when the edge mask was empty; values hold the saturation
};

/// Exact distance from every pixel to the nearest edge pixel: two-pass chamfer
/// for the 8-neighbour metrics, separable squared-distance transform for Euclidean.
/// An empty edge mask yields a map filled with `saturation` and no_edges set.
DistanceMap distance_map(const BinaryImage& edges, DistanceMetric metric, double saturation = 1e9);

enum class NormalizeFn { Impulse, Proportional, Exponential };

struct NormalizeParams {
  double d_min = 0.0;
  double d_max = 20.0;
  double n_range = 1.0;
  double m = 0.1;  // exponential decay rate
};

/// Throws Error{BadParams} on d_min >= d_max, n_range outside (0, 1] or m outside (0, 1).
void validate(const NormalizeParams& p, NormalizeFn fn);
double normalize_value(double d, NormalizeFn fn, const NormalizeParams& p);
RealImage normalize_map(const DistanceMap& d, NormalizeFn fn, const NormalizeParams& p);

// ---------------------------------------------------------------------------
// Region of interest and reference encoding
// ---------------------------------------------------------------------------

struct RoiParams {
  int margin = 10;     // px added on every side
  int min_area = 4;    // components smaller than this are ignored
  int max_objects = 4;  // largest components kept
};

/// Bounding box of the largest 8-connected silhouette components, grown by the
/// margin and clamped to the image; full image when nothing qualifies.
RoiRect compute_roi(const BinaryImage& silhouette, const RoiParams& params = {});

/// round-half-up(127 * n) in bits 0-6.
std::uint8_t quantize_distance(double n);
inline double decode_distance(std::uint8_t px) { return (px & kPayloadMask) / 127.0; }

/// byte = quantize(n) | (silhouette ? 0x80 : 0). Throws Error{DimensionMismatch}.
EncodedImage encode_reference(const BinaryImage& silhouette, const RealImage& normalized);

}  // namespace mocap
