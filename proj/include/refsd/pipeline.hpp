// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "refsd/backend.hpp"
#include "refsd/imaging.hpp"
#include "refsd/prompt.hpp"

namespace refsd::pipeline {

inline constexpr std::string_view kInpaintPrompt = "background scenery, no text, no people";
inline constexpr int kMinSubjectSide = 8;
inline constexpr int kMinGeneratorResolution = 256;

struct PromptConfig {
  prompt::Strategy strategy = prompt::Strategy::kRandom;
  prompt::PromptLevel level = prompt::PromptLevel::kSimple;
  prompt::Attributes labels;  // used by the preserve strategy
};

struct PipelineConfig {
  double feather_sigma = imaging::kDefaultFeatherSigma;  // 0 disables feathering
  double crop_pad_fraction = 0.1;
  int generator_resolution = 1024;
  imaging::CannyParams canny;
  std::vector<std::string> pii_descriptions;
  std::uint64_t seed = 0;
  int max_concurrency = 4;  // concurrent backend calls per Pipeline
  std::map<backend::Role, std::string> backends;
  double timeout_s = 120.0;
  int retries = 3;
  std::string auth_token;
  PromptConfig prompt;
  /// Explicit per-subject prompts; subject i uses prompts[i mod n]. When
  /// empty, prompts come from `prompt.strategy`.
  std::vector<prompt::PromptSpec> prompts;

  /// Throws kParameter naming the offending field.
  void validate() const;
};

/// Parses a JSON config document. Unknown keys are errors. Missing keys keep
/// their defaults.
PipelineConfig parse_config(std::string_view json_text);
PipelineConfig load_config(const std::filesystem::path& path);
/// JSON snapshot; the auth token is redacted.
std::string config_to_json(const PipelineConfig& config);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

/// Applies REFSD_* variables: SEED, FEATHER_SIGMA, CROP_PAD_FRACTION,
/// GENERATOR_RESOLUTION, MAX_CONCURRENCY, TIMEOUT_S, RETRIES, AUTH_TOKEN,
/// PII_DESCRIPTIONS (comma separated), PROMPT_STRATEGY, PROMPT_LEVEL,
/// BACKEND_URL (every role) and BACKEND_<ROLE>_URL (e.g. BACKEND_DETECT_PII_URL).
void apply_env_overrides(PipelineConfig& config, const EnvLookup& env);

backend::HttpOptions http_options(const PipelineConfig& config);

/// Square generator canvas geometry: the crop is scaled so its longer side
/// equals `size`, then centred; the margin replicates the crop's edge pixels.
struct Letterbox {
  int size = 0;
  double scale = 1.0;
  int offset_x = 0;
  int offset_y = 0;
  int content_width = 0;
  int content_height = 0;

  bool is_identity() const noexcept {
    return scale == 1.0 && offset_x == 0 && offset_y == 0 && content_width == size && content_height == size;
  }
  friend bool operator==(const Letterbox&, const Letterbox&) = default;
};

Letterbox letterbox_geometry(int width, int height, int size);
imaging::ImageBuffer apply_letterbox(const imaging::ImageBuffer& image, const Letterbox& box);
/// Cuts the content rectangle out of a generator-sized image and resamples it
/// back to width x height.
imaging::ImageBuffer remove_letterbox(const imaging::ImageBuffer& image, const Letterbox& box, int width,
                                      int height);

/// Padding around a subject box: max(round(fraction * longer side), feather radius).
int crop_padding(const imaging::BBox& box, const PipelineConfig& config);

struct SubjectRecord {
  int index = 0;
  backend::SmplParams params;
  imaging::SoftMask mask;  // a_i, feathered, full frame
  imaging::BBox box;       // b_i
  prompt::PromptSpec prompt_spec;
};

struct ProcessedSubject {
  imaging::ImageBuffer composite;  // x'_crop at the effective box
  imaging::ImageBuffer generated;  // generator output, generator resolution
  imaging::EdgeMap edges;          // e_i, generator resolution
  std::string orientation;         // s_i
  std::string prompt;              // t_i'
  std::string negative_prompt;
  imaging::BBox effective_box;
  Letterbox letterbox;
};

/// Composites the rendered avatar into the padded crop, letterboxes it to the
/// generator resolution, computes edges on the identically transformed avatar
/// and calls the generator. `avatar` is m_i at full-frame size: the rendering
/// inside b_i with its border pixels replicated outward.
ProcessedSubject process_subject(backend::Backend& backend, const imaging::ImageBuffer& image,
                                 const SubjectRecord& subject, const imaging::ImageBuffer& avatar,
                                 const PipelineConfig& config);

struct Reintegration {
  imaging::ImageBuffer generated;
  imaging::SoftMask mask;
  imaging::BBox effective_box;
  Letterbox letterbox;
};

/// Sequential over-compositing in list order; the later subject wins where
/// masks overlap.
imaging::ImageBuffer reintegrate(const imaging::ImageBuffer& image, const std::vector<Reintegration>& subjects);

struct PiiResult {
  imaging::ImageBuffer image;
  std::vector<std::string> labels;
  std::vector<imaging::SoftMask> regions;  // feathered
};

/// Detects `descriptions` on `source`, inpaints the union of the feathered
/// regions on `target` with the generic background prompt, and composites the
/// result under that union.
PiiResult pii_pass(backend::Backend& backend, const imaging::ImageBuffer& source, const imaging::ImageBuffer& target,
                   const std::vector<std::string>& descriptions, const PipelineConfig& config);

struct SubjectArtifacts {
  int index = 0;
  bool skipped = false;
  std::string skip_reason;
  imaging::BBox box;
  imaging::SoftMask mask;
  imaging::ImageBuffer avatar;  // rendering at b_i size
  ProcessedSubject processed;
};

struct PseudonymizationResult {
  imaging::ImageBuffer output;
  std::vector<SubjectArtifacts> subjects;
  PiiResult pii;
  std::string manifest_json;
  std::string manifest_hash;  // covers everything but timings
  std::string input_hash;
  std::string output_hash;
};

struct RunOptions {
  std::string image_id = "image";
  /// Offset of this image's subjects in a batch, so diversify/random prompt
  /// strategies continue across images.
  std::size_t batch_offset = 0;
};

/// Algorithm 1 orchestrator. Per-subject work runs concurrently; every
/// backend call passes through a limiter of `max_concurrency` slots shared by
/// all runs on this object.
class Pipeline {
 public:
  Pipeline(PipelineConfig config, std::shared_ptr<backend::Backend> backend);
  ~Pipeline();

  const PipelineConfig& config() const noexcept { return config_; }

  PseudonymizationResult run(const imaging::ImageBuffer& image, const RunOptions& options = {});

 private:
  PipelineConfig config_;
  std::shared_ptr<backend::Backend> backend_;
};

/// Writes final.png, subjects/{i}/{avatar,edges,crop}.png, subjects/{i}/prompt.txt
/// and manifest.json under `dir`.
void write_artifacts(const PseudonymizationResult& result, const std::filesystem::path& dir);

/// Image identifier used for output directories: the file stem.
std::string image_id_for(const std::filesystem::path& path);

}  // namespace refsd::pipeline
