// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

#include "refsd/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "refsd/codec.hpp"
#include "refsd/errors.hpp"
#include "rng.hpp"

namespace refsd::corpus {

namespace {

using imaging::BBox;
using imaging::ImageBuffer;

BBox random_box(rng::Engine& eng, int w, int h, int min_side, int max_side) {
  const int bw = min_side + static_cast<int>(rng::uniform_index(eng, static_cast<std::size_t>(max_side - min_side + 1)));
  const int bh = std::min(h - 2, bw + static_cast<int>(rng::uniform_index(eng, static_cast<std::size_t>(bw))));
  const int x0 = static_cast<int>(rng::uniform_index(eng, static_cast<std::size_t>(w - bw)));
  const int y0 = static_cast<int>(rng::uniform_index(eng, static_cast<std::size_t>(h - bh)));
  return {x0, y0, x0 + bw, y0 + bh};
}

void paint_background(ImageBuffer& img, rng::Engine& eng) {
  const double fx = rng::uniform_real(eng, 0.02, 0.08);
  const double fy = rng::uniform_real(eng, 0.02, 0.08);
  const int base = 60 + static_cast<int>(rng::uniform_index(eng, 80));
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        const double wave = 40.0 * std::sin(fx * x + 1.3 * c) + 30.0 * std::cos(fy * y - 0.7 * c);
        const int noise = static_cast<int>(rng::uniform_index(eng, 17)) - 8;
        img.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(base + static_cast<int>(wave) + noise, 0, 255));
      }
    }
  }
}

// Head disc over a torso block, in a per-subject colour.
void paint_person(ImageBuffer& img, const BBox& box, rng::Engine& eng) {
  std::uint8_t colour[3];
  for (auto& v : colour) v = static_cast<std::uint8_t>(30 + rng::uniform_index(eng, 200));
  const double cx = 0.5 * (box.x0 + box.x1);
  const double head_r = 0.22 * box.width();
  const double head_cy = box.y0 + head_r + 1;
  for (int y = box.y0; y < box.y1; ++y) {
    for (int x = box.x0; x < box.x1; ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - head_cy;
      const bool head = dx * dx + dy * dy <= head_r * head_r;
      const bool torso = y >= head_cy + head_r && std::abs(dx) <= 0.4 * box.width();
      if (!head && !torso) continue;
      for (int c = 0; c < img.channels(); ++c) img.at(x, y, c) = colour[c % 3];
    }
  }
}

void paint_sign(ImageBuffer& img, const BBox& box) {
  for (int y = box.y0; y < box.y1; ++y) {
    for (int x = box.x0; x < box.x1; ++x) {
      const bool stripe = ((x - box.x0) / 3) % 2 == 0 && y > box.y0 + 1 && y < box.y1 - 2;
      for (int c = 0; c < img.channels(); ++c) img.at(x, y, c) = stripe ? 25 : 235;
    }
  }
}

}  // namespace

std::vector<CorpusImage> planted_corpus(std::size_t count, std::uint64_t seed) {
  std::vector<CorpusImage> out;
  for (std::size_t i = 0; i < count; ++i) {
    auto eng = rng::engine(seed, rng::mix(rng::stream_id("corpus"), i));
    const int w = 160 + 24 * static_cast<int>(i % 5);
    const int h = 128 + 16 * static_cast<int>(i % 4);
    const int channels = i == 9 ? 1 : 3;
    CorpusImage ci;
    char id[32];
    std::snprintf(id, sizeof id, "scene_%02zu", i);
    ci.id = id;
    ci.image = ImageBuffer(w, h, channels);
    paint_background(ci.image, eng);
    if (i % 5 != 0) {
      const int subjects = 1 + static_cast<int>(i % 3);
      for (int s = 0; s < subjects; ++s) {
        backend::PlantedSubject p;
        p.box = random_box(eng, w, h, 24, std::min(w, h) / 2);
        p.yaw_deg = rng::uniform_real(eng, -60.0, 60.0);
        ci.scene.subjects.push_back(p);
      }
      if (i == 3) {
        const BBox& a = ci.scene.subjects.front().box;
        backend::PlantedSubject p;
        p.box = {a.x0 + a.width() / 3, a.y0 + a.height() / 4, std::min(w, a.x1 + a.width() / 3),
                 std::min(h, a.y1 + a.height() / 4)};
        ci.scene.subjects.push_back(p);
      }
      if (i == 7) ci.scene.subjects.push_back({BBox{w - 10, h - 10, w - 5, h - 5}, 0.0, std::nullopt});
      if (i % 2 == 1) {
        const BBox sign = random_box(eng, w, h, 16, 28);
        const BBox plate{sign.x0, sign.y0, sign.x1, std::min(sign.y1, sign.y0 + 10)};
        ci.scene.pii.push_back({i % 4 == 1 ? "license plate" : "street sign", plate});
      }
      for (const auto& p : ci.scene.subjects) paint_person(ci.image, p.box, eng);
      for (const auto& r : ci.scene.pii) paint_sign(ci.image, r.box);
    }
    out.push_back(std::move(ci));
  }
  return out;
}

void write_corpus(const std::vector<CorpusImage>& corpus, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
  for (const auto& ci : corpus) {
    const auto png = dir / (ci.id + ".png");
    codec::write_png(png, ci.image);
    codec::write_file(backend::sidecar_path(png), backend::scene_to_json(ci.scene));
  }
}

}  // namespace refsd::corpus
