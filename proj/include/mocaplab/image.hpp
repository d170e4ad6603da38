#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mocap {

/// Dense row-major raster.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  const T& operator()(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  T* row(int y) { return data_.data() + static_cast<std::size_t>(y) * width_; }
  const T* row(int y) const { return data_.data() + static_cast<std::size_t>(y) * width_; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool same_size(int w, int h) const { return width_ == w && height_ == h; }
  template <typename U>
  bool same_size(const Image<U>& o) const {
    return width_ == o.width() && height_ == o.height();
  }

  bool operator==(const Image&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// 8-bit luminance frame.
using GrayImage = Image<std::uint8_t>;
/// 0/1 mask (silhouette, edges).
using BinaryImage = Image<std::uint8_t>;
/// Packed byte image: 7-bit payload in bits 0-6, flag in bit 7.
using EncodedImage = Image<std::uint8_t>;
using RealImage = Image<double>;

inline constexpr std::uint8_t kFlagBit = 0x80;
inline constexpr std::uint8_t kPayloadMask = 0x7F;

/// Axis-aligned pixel rectangle; (x, y) is the top-left corner.
struct RoiRect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool operator==(const RoiRect&) const = default;
  bool empty() const { return w <= 0 || h <= 0; }
  int x_end() const { return x + w; }
  int y_end() const { return y + h; }
};

inline RoiRect full_roi(int width, int height) { return {0, 0, width, height}; }
/// Intersection with the image rectangle.
RoiRect clamp_roi(const RoiRect& r, int width, int height);

/// Binary PGM (P5, maxval 255).
GrayImage read_pgm(const std::string& path);
void write_pgm(const std::string& path, const GrayImage& img);

}  // namespace mocap
