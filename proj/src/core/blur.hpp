// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

namespace refsd::imaging::detail {

// Separable Gaussian convolution of a row-major plane, replicated borders.
std::vector<double> blur_plane(const std::vector<double>& plane, int width, int height, double sigma);

}  // namespace refsd::imaging::detail
