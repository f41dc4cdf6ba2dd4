// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

#include "refsd/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "blur.hpp"
#include "refsd/errors.hpp"

namespace refsd::imaging {

namespace {

void check_dims(int width, int height) {
  if (width < 1 || height < 1) {
    fail(ErrorKind::kShape, "image dimensions must be >= 1, got " + std::to_string(width) + "x" +
                                std::to_string(height));
  }
}

std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

void require_same_size(int w0, int h0, int w1, int h1, const char* what) {
  if (w0 != w1 || h0 != h1) {
    fail(ErrorKind::kShape, std::string(what) + ": dimension mismatch " + std::to_string(w0) + "x" +
                                std::to_string(h0) + " vs " + std::to_string(w1) + "x" +
                                std::to_string(h1));
  }
}

// Source coordinate for destination sample `d` when mapping `dst` samples
// onto `src` samples corner-to-corner.
double source_coord(int d, int dst, int src) {
  if (dst == 1) return (src - 1) * 0.5;
  return static_cast<double>(d) * (src - 1) / (dst - 1);
}

}  // namespace

ImageBuffer::ImageBuffer(int width, int height, int channels, std::uint8_t fill)
    : width_(width), height_(height), channels_(channels) {
  check_dims(width, height);
  if (channels != 1 && channels != 3) {
    fail(ErrorKind::kShape, "channels must be 1 or 3, got " + std::to_string(channels));
  }
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

ImageBuffer::ImageBuffer(int width, int height, int channels, std::vector<std::uint8_t> data)
    : ImageBuffer(width, height, channels) {
  if (data.size() != data_.size()) {
    fail(ErrorKind::kShape, "pixel buffer holds " + std::to_string(data.size()) + " bytes, expected " +
                                std::to_string(data_.size()));
  }
  data_ = std::move(data);
}

SoftMask::SoftMask(int width, int height, float fill) : width_(width), height_(height) {
  check_dims(width, height);
  if (!(fill >= 0.0f && fill <= 1.0f)) fail(ErrorKind::kParameter, "mask weight outside [0, 1]");
  weights_.assign(static_cast<std::size_t>(width) * height, fill);
}

SoftMask::SoftMask(int width, int height, std::vector<float> weights) : width_(width), height_(height) {
  check_dims(width, height);
  if (weights.size() != static_cast<std::size_t>(width) * height) {
    fail(ErrorKind::kShape, "mask holds " + std::to_string(weights.size()) + " weights, expected " +
                                std::to_string(static_cast<std::size_t>(width) * height));
  }
  for (float w : weights) {
    if (!(w >= 0.0f && w <= 1.0f)) fail(ErrorKind::kParameter, "mask weight outside [0, 1]");
  }
  weights_ = std::move(weights);
}

BBox SoftMask::support(float threshold) const noexcept {
  BBox box{width_, height_, -1, -1};
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      if (at(x, y) > threshold) {
        box.x0 = std::min(box.x0, x);
        box.y0 = std::min(box.y0, y);
        box.x1 = std::max(box.x1, x + 1);
        box.y1 = std::max(box.y1, y + 1);
      }
    }
  }
  if (box.x1 < 0) return {};
  return box;
}

EdgeMap::EdgeMap(int width, int height) : width_(width), height_(height) {
  check_dims(width, height);
  flags_.assign(static_cast<std::size_t>(width) * height, 0);
}

std::size_t EdgeMap::count() const noexcept {
  return static_cast<std::size_t>(std::count(flags_.begin(), flags_.end(), std::uint8_t{1}));
}

int gaussian_radius(double sigma) { return static_cast<int>(std::ceil(3.0 * sigma)); }

std::vector<double> gaussian_kernel(double sigma) {
  if (!std::isfinite(sigma) || sigma <= 0.0) {
    fail(ErrorKind::kParameter, "gaussian sigma must be finite and > 0");
  }
  const int radius = gaussian_radius(sigma);
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    const double w = std::exp(-(k * k) / (2.0 * sigma * sigma));
    kernel[k + radius] = w;
    sum += w;
  }
  for (double& w : kernel) w /= sum;
  return kernel;
}

namespace detail {

// Separable convolution of a width x height plane with replicated borders.
std::vector<double> blur_plane(const std::vector<double>& plane, int width, int height, double sigma) {
  const std::vector<double> kernel = gaussian_kernel(sigma);
  const int radius = static_cast<int>(kernel.size() / 2);
  std::vector<double> tmp(plane.size());
  std::vector<double> out(plane.size());
  for (int y = 0; y < height; ++y) {
    const double* row = plane.data() + static_cast<std::size_t>(y) * width;
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[k + radius] * row[std::clamp(x + k, 0, width - 1)];
      }
      tmp[static_cast<std::size_t>(y) * width + x] = acc;
    }
  }
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[k + radius] * tmp[static_cast<std::size_t>(std::clamp(y + k, 0, height - 1)) * width + x];
      }
      out[static_cast<std::size_t>(y) * width + x] = acc;
    }
  }
  return out;
}

}  // namespace detail

SoftMask feather_mask(const SoftMask& mask, double sigma) {
  if (mask.empty()) fail(ErrorKind::kShape, "feather_mask: empty mask");
  if (!std::isfinite(sigma) || sigma <= 0.0) {
    fail(ErrorKind::kParameter, "feather_mask: sigma must be finite and > 0");
  }
  std::vector<double> plane(mask.weights().begin(), mask.weights().end());
  const std::vector<double> blurred = detail::blur_plane(plane, mask.width(), mask.height(), sigma);
  std::vector<float> out(blurred.size());
  std::transform(blurred.begin(), blurred.end(), out.begin(),
                 [](double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); });
  return SoftMask(mask.width(), mask.height(), std::move(out));
}

ImageBuffer alpha_composite(const ImageBuffer& base, const ImageBuffer& overlay, const SoftMask& mask) {
  require_same_size(base.width(), base.height(), overlay.width(), overlay.height(), "alpha_composite");
  require_same_size(base.width(), base.height(), mask.width(), mask.height(), "alpha_composite");
  if (base.channels() != overlay.channels()) {
    fail(ErrorKind::kShape, "alpha_composite: channel mismatch");
  }
  ImageBuffer out = base;
  const int channels = base.channels();
  auto src = base.data();
  auto over = overlay.data();
  auto dst = out.data();
  auto weights = mask.weights();
  for (std::size_t p = 0; p < weights.size(); ++p) {
    const double a = weights[p];
    if (a == 0.0) continue;
    for (int c = 0; c < channels; ++c) {
      const std::size_t i = p * channels + c;
      dst[i] = a == 1.0 ? over[i] : to_u8(src[i] * (1.0 - a) + over[i] * a);
    }
  }
  return out;
}

CropResult crop(const ImageBuffer& image, const BBox& box, int pad) {
  if (pad < 0) fail(ErrorKind::kParameter, "crop: pad must be >= 0");
  if (box.x0 >= box.x1 || box.y0 >= box.y1) fail(ErrorKind::kShape, "crop: degenerate box");
  if (box.x1 <= 0 || box.y1 <= 0 || box.x0 >= image.width() || box.y0 >= image.height()) {
    fail(ErrorKind::kEmptyCrop, "crop: box lies entirely outside the image");
  }
  const BBox eff{std::max(0, box.x0 - pad), std::max(0, box.y0 - pad),
                 std::min(image.width(), box.x1 + pad), std::min(image.height(), box.y1 + pad)};
  ImageBuffer out(eff.width(), eff.height(), image.channels());
  const std::size_t row_bytes = static_cast<std::size_t>(eff.width()) * image.channels();
  for (int y = 0; y < eff.height(); ++y) {
    const auto* src = image.data().data() +
                      (static_cast<std::size_t>(eff.y0 + y) * image.width() + eff.x0) * image.channels();
    std::copy_n(src, row_bytes, out.data().data() + y * row_bytes);
  }
  return {std::move(out), eff};
}

SoftMask crop_mask(const SoftMask& mask, const BBox& box) {
  if (!box.is_valid() || box.x1 > mask.width() || box.y1 > mask.height()) {
    fail(ErrorKind::kShape, "crop_mask: box outside mask");
  }
  std::vector<float> out;
  out.reserve(static_cast<std::size_t>(box.area()));
  for (int y = box.y0; y < box.y1; ++y) {
    for (int x = box.x0; x < box.x1; ++x) out.push_back(mask.at(x, y));
  }
  return SoftMask(box.width(), box.height(), std::move(out));
}

ImageBuffer resize_bilinear(const ImageBuffer& image, int width, int height) {
  check_dims(width, height);
  if (width == image.width() && height == image.height()) return image;
  ImageBuffer out(width, height, image.channels());
  const int channels = image.channels();
  for (int y = 0; y < height; ++y) {
    const double sy = source_coord(y, height, image.height());
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, image.height() - 1);
    const double fy = sy - y0;
    for (int x = 0; x < width; ++x) {
      const double sx = source_coord(x, width, image.width());
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, image.width() - 1);
      const double fx = sx - x0;
      for (int c = 0; c < channels; ++c) {
        const double top = image.at(x0, y0, c) * (1.0 - fx) + image.at(x1, y0, c) * fx;
        const double bottom = image.at(x0, y1, c) * (1.0 - fx) + image.at(x1, y1, c) * fx;
        out.at(x, y, c) = to_u8(top * (1.0 - fy) + bottom * fy);
      }
    }
  }
  return out;
}

ImageBuffer paste_resample(const ImageBuffer& canvas, const ImageBuffer& patch, const BBox& box) {
  if (!box.is_valid()) fail(ErrorKind::kShape, "paste_resample: degenerate box");
  if (box.x1 > canvas.width() || box.y1 > canvas.height()) {
    fail(ErrorKind::kShape, "paste_resample: box exceeds canvas");
  }
  if (patch.channels() != canvas.channels()) fail(ErrorKind::kShape, "paste_resample: channel mismatch");
  const ImageBuffer scaled = resize_bilinear(patch, box.width(), box.height());
  ImageBuffer out = canvas;
  const std::size_t row_bytes = static_cast<std::size_t>(box.width()) * canvas.channels();
  for (int y = 0; y < box.height(); ++y) {
    auto* dst = out.data().data() +
                (static_cast<std::size_t>(box.y0 + y) * canvas.width() + box.x0) * canvas.channels();
    std::copy_n(scaled.data().data() + y * row_bytes, row_bytes, dst);
  }
  return out;
}

SoftMask mask_union(std::span<const SoftMask> masks, int width, int height) {
  check_dims(width, height);
  std::vector<float> acc(static_cast<std::size_t>(width) * height, 0.0f);
  for (const SoftMask& m : masks) {
    require_same_size(width, height, m.width(), m.height(), "mask_union");
    auto w = m.weights();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] = std::max(acc[i], w[i]);
  }
  return SoftMask(width, height, std::move(acc));
}

std::vector<double> luminance(const ImageBuffer& image) {
  std::vector<double> out(image.pixel_count());
  auto px = image.data();
  if (image.channels() == 1) {
    std::copy(px.begin(), px.end(), out.begin());
    return out;
  }
  for (std::size_t p = 0; p < out.size(); ++p) {
    out[p] = 0.299 * px[3 * p] + 0.587 * px[3 * p + 1] + 0.114 * px[3 * p + 2];
  }
  return out;
}

ImageBuffer to_rgb(const ImageBuffer& image) {
  if (image.channels() == 3) return image;
  ImageBuffer out(image.width(), image.height(), 3);
  auto src = image.data();
  auto dst = out.data();
  for (std::size_t p = 0; p < src.size(); ++p) dst[3 * p] = dst[3 * p + 1] = dst[3 * p + 2] = src[p];
  return out;
}

ImageBuffer edge_image(const EdgeMap& edges) {
  ImageBuffer out(edges.width(), edges.height(), 1);
  auto flags = edges.flags();
  auto dst = out.data();
  for (std::size_t i = 0; i < flags.size(); ++i) dst[i] = flags[i] ? 255 : 0;
  return out;
}

ImageBuffer mask_image(const SoftMask& mask) {
  ImageBuffer out(mask.width(), mask.height(), 1);
  auto w = mask.weights();
  auto dst = out.data();
  for (std::size_t i = 0; i < w.size(); ++i) dst[i] = to_u8(255.0 * w[i]);
  return out;
}

SoftMask mask_from_image(const ImageBuffer& gray) {
  if (gray.channels() != 1) fail(ErrorKind::kShape, "mask image must be single-channel");
  std::vector<float> w(gray.pixel_count());
  auto src = gray.data();
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<float>(src[i] / 255.0);
  return SoftMask(gray.width(), gray.height(), std::move(w));
}

}  // namespace refsd::imaging
