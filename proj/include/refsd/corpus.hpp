// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "refsd/backend.hpp"
#include "refsd/imaging.hpp"

namespace refsd::corpus {

inline constexpr std::size_t kDefaultCorpusSize = 20;
inline constexpr std::uint64_t kDefaultCorpusSeed = 2026;

struct CorpusImage {
  std::string id;  // "scene_00" ...
  imaging::ImageBuffer image;
  backend::Scene scene;
};

/// Synthetic planted-scene corpus. Every fifth image (0, 5, ...) has no
/// subjects and no PII; image 3 has overlapping subjects, image 7 carries a
/// sub-8-px subject, image 9 is grayscale; odd images plant "license plate"
/// or "street sign" regions.
std::vector<CorpusImage> planted_corpus(std::size_t count = kDefaultCorpusSize,
                                        std::uint64_t seed = kDefaultCorpusSeed);

/// Writes {id}.png plus its {id}.scene.json sidecar for each image.
void write_corpus(const std::vector<CorpusImage>& corpus, const std::filesystem::path& dir);

}  // namespace refsd::corpus
