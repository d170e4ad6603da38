#pragma once

#include <cstdint>

namespace mocap {

/// Per-camera comparison counts between a model image and a reference image.
struct FitnessComponents {
  std::int64_t area_ref = 0;    // reference silhouette pixels
  std::int64_t area_model = 0;  // pixels with a nonzero model label
  std::int64_t overlap = 0;     // model label set and reference silhouette set
  std::int64_t edge_count = 0;  // model edge pixels
  std::int64_t distance_q = 0;  // sum of quantized reference distance (0..127) at model edge pixels

  bool operator==(const FitnessComponents&) const = default;

  /// Sum of decoded normalized distances; integer accumulation keeps the
  /// result independent of pixel visiting order.
  double distance_sum() const { return static_cast<double>(distance_q) / 127.0; }

  FitnessComponents& operator+=(const FitnessComponents& o) {
    area_ref += o.area_ref;
    area_model += o.area_model;
    overlap += o.overlap;
    edge_count += o.edge_count;
    distance_q += o.distance_q;
    return *this;
  }
};

}  // namespace mocap
