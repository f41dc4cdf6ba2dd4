// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace refsd::imaging {

/// Integer pixel rectangle, [x0, x1) x [y0, y1).
struct BBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const noexcept { return x1 - x0; }
  int height() const noexcept { return y1 - y0; }
  long long area() const noexcept {
    return is_valid() ? static_cast<long long>(width()) * height() : 0;
  }
  bool is_valid() const noexcept { return x0 >= 0 && y0 >= 0 && x0 < x1 && y0 < y1; }
  bool contains(int x, int y) const noexcept { return x >= x0 && x < x1 && y >= y0 && y < y1; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Interleaved 8-bit raster with 1 (gray) or 3 (RGB) channels.
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(int width, int height, int channels, std::uint8_t fill = 0);
  ImageBuffer(int width, int height, int channels, std::vector<std::uint8_t> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }

  std::span<const std::uint8_t> data() const noexcept { return data_; }
  std::span<std::uint8_t> data() noexcept { return data_; }

  std::uint8_t at(int x, int y, int c = 0) const noexcept {
    return data_[index(x, y, c)];
  }
  std::uint8_t& at(int x, int y, int c = 0) noexcept { return data_[index(x, y, c)]; }

  BBox bounds() const noexcept { return {0, 0, width_, height_}; }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Per-pixel blend weights in [0, 1].
class SoftMask {
 public:
  SoftMask() = default;
  SoftMask(int width, int height, float fill = 0.0f);
  SoftMask(int width, int height, std::vector<float> weights);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return weights_.empty(); }

  std::span<const float> weights() const noexcept { return weights_; }

  float at(int x, int y) const noexcept { return weights_[static_cast<std::size_t>(y) * width_ + x]; }
  // Caller keeps the value in [0, 1].
  float& at(int x, int y) noexcept { return weights_[static_cast<std::size_t>(y) * width_ + x]; }

  /// Tight box around weights strictly above `threshold`. The box is
  /// invalid (all zero) when no weight qualifies.
  BBox support(float threshold = 0.0f) const noexcept;

  friend bool operator==(const SoftMask&, const SoftMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> weights_;
};

/// Binary edge flags (0 or 1).
class EdgeMap {
 public:
  EdgeMap() = default;
  EdgeMap(int width, int height);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::span<const std::uint8_t> flags() const noexcept { return flags_; }

  bool at(int x, int y) const noexcept { return flags_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int x, int y, bool on) noexcept {
    flags_[static_cast<std::size_t>(y) * width_ + x] = on ? 1 : 0;
  }
  std::size_t count() const noexcept;

  friend bool operator==(const EdgeMap&, const EdgeMap&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> flags_;
};

struct CannyParams {
  double low = 100.0;
  double high = 200.0;
  double sigma = 1.4;
};

inline constexpr double kDefaultFeatherSigma = 3.0;

/// Radius used for every Gaussian kernel in this module: ceil(3 sigma).
int gaussian_radius(double sigma);

/// Normalized sampled Gaussian of length 2 * gaussian_radius(sigma) + 1.
std::vector<double> gaussian_kernel(double sigma);

/// Separable Gaussian blur with replicated borders, clamped to [0, 1].
SoftMask feather_mask(const SoftMask& mask, double sigma);

/// out = base * (1 - a) + overlay * a, rounded half away from zero.
ImageBuffer alpha_composite(const ImageBuffer& base, const ImageBuffer& overlay, const SoftMask& mask);

struct CropResult {
  ImageBuffer image;
  BBox box;  // effective box after padding and clamping
};

/// Sub-image of `box` grown by `pad` on every side and clamped to the image.
CropResult crop(const ImageBuffer& image, const BBox& box, int pad = 0);

SoftMask crop_mask(const SoftMask& mask, const BBox& box);

/// Bilinear resize. Corner samples map onto corner samples, so equal sizes
/// copy exactly and constants stay constant.
ImageBuffer resize_bilinear(const ImageBuffer& image, int width, int height);

/// Returns `canvas` with `patch` resampled into `box`; pixels outside `box`
/// are untouched.
ImageBuffer paste_resample(const ImageBuffer& canvas, const ImageBuffer& patch, const BBox& box);

/// Per-pixel maximum. An empty list yields an all-zero width x height mask.
SoftMask mask_union(std::span<const SoftMask> masks, int width, int height);

/// Rec. 601 luma for RGB, identity for gray, as doubles on the 0-255 scale.
std::vector<double> luminance(const ImageBuffer& image);

/// Gaussian smoothing, Sobel gradients, non-maximum suppression and
/// hysteresis thresholding on the luminance of `image`.
EdgeMap canny_edges(const ImageBuffer& image, const CannyParams& params = {});

ImageBuffer to_rgb(const ImageBuffer& image);
ImageBuffer edge_image(const EdgeMap& edges);  // gray, 0 / 255
ImageBuffer mask_image(const SoftMask& mask);  // gray, round(255 * w)
SoftMask mask_from_image(const ImageBuffer& gray);  // w = value / 255

}  // namespace refsd::imaging
