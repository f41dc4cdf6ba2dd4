// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <vector>

#include "blur.hpp"
#include "refsd/errors.hpp"
#include "refsd/imaging.hpp"

namespace refsd::imaging {

namespace {

// Neighbour offset along the quantized gradient direction (y grows down).
struct Step {
  int dx;
  int dy;
};

Step quantize_direction(double gx, double gy) {
  double angle = std::atan2(gy, gx) * 180.0 / M_PI;
  if (angle < 0) angle += 180.0;
  if (angle < 22.5 || angle >= 157.5) return {1, 0};
  if (angle < 67.5) return {1, 1};
  if (angle < 112.5) return {0, 1};
  return {-1, 1};
}

}  // namespace

EdgeMap canny_edges(const ImageBuffer& image, const CannyParams& params) {
  if (!(params.low >= 0.0) || !(params.low < params.high)) {
    fail(ErrorKind::kParameter, "canny: thresholds must satisfy 0 <= low < high");
  }
  if (!std::isfinite(params.sigma) || params.sigma <= 0.0) {
    fail(ErrorKind::kParameter, "canny: sigma must be finite and > 0");
  }
  const int w = image.width();
  const int h = image.height();
  const std::vector<double> smooth = detail::blur_plane(luminance(image), w, h, params.sigma);
  auto px = [&](int x, int y) {
    return smooth[static_cast<std::size_t>(std::clamp(y, 0, h - 1)) * w + std::clamp(x, 0, w - 1)];
  };

  std::vector<double> mag(smooth.size());
  std::vector<Step> dir(smooth.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = (px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1)) -
                        (px(x - 1, y - 1) + 2 * px(x - 1, y) + px(x - 1, y + 1));
      const double gy = (px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1)) -
                        (px(x - 1, y - 1) + 2 * px(x, y - 1) + px(x + 1, y - 1));
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      mag[i] = std::hypot(gx, gy);
      dir[i] = quantize_direction(gx, gy);
    }
  }

  auto mag_at = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= w || y >= h) return 0.0;
    return mag[static_cast<std::size_t>(y) * w + x];
  };

  // 0 = suppressed, 1 = weak, 2 = strong. Ties along the gradient keep the
  // pixel on the lower-coordinate side so plateaus thin to one pixel.
  std::vector<std::uint8_t> cls(smooth.size(), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double m = mag[i];
      if (m < params.low || m == 0.0) continue;
      const Step s = dir[i];
      if (m > mag_at(x - s.dx, y - s.dy) && m >= mag_at(x + s.dx, y + s.dy)) {
        cls[i] = m >= params.high ? 2 : 1;
      }
    }
  }

  EdgeMap edges(w, h);
  std::vector<int> stack;
  for (int i = 0; i < static_cast<int>(cls.size()); ++i) {
    if (cls[i] != 2) continue;
    stack.push_back(i);
    cls[i] = 3;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      const int x = p % w;
      const int y = p / w;
      edges.set(x, y, true);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx;
          const int ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const int q = ny * w + nx;
          if (cls[q] == 1 || cls[q] == 2) {
            cls[q] = 3;
            stack.push_back(q);
          }
        }
      }
    }
  }
  return edges;
}

}  // namespace refsd::imaging
