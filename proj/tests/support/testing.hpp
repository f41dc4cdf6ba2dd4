// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <gtest/gtest.h>

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "refsd/errors.hpp"
#include "refsd/imaging.hpp"

namespace refsd::testing {

template <typename Fn>
void expect_error(ErrorKind kind, Fn&& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected " << to_string(kind) << " error, nothing thrown";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

inline imaging::ImageBuffer random_image(std::mt19937& rng, int w, int h, int c) {
  std::uniform_int_distribution<int> dist(0, 255);
  imaging::ImageBuffer img(w, h, c);
  for (auto& v : img.data()) v = static_cast<std::uint8_t>(dist(rng));
  return img;
}

inline imaging::SoftMask random_mask(std::mt19937& rng, int w, int h) {
  std::uniform_real_distribution<float> dist(0.0f, 1.0f);
  std::vector<float> weights(static_cast<std::size_t>(w) * h);
  for (auto& v : weights) v = dist(rng);
  return imaging::SoftMask(w, h, std::move(weights));
}

inline imaging::SoftMask rect_mask(int w, int h, const imaging::BBox& box) {
  imaging::SoftMask m(w, h, 0.0f);
  for (int y = box.y0; y < box.y1; ++y)
    for (int x = box.x0; x < box.x1; ++x) m.at(x, y) = 1.0f;
  return m;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("refsd-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace refsd::testing
