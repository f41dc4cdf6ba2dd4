// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

#include "refsd/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <semaphore>
#include <thread>

#include "refsd/codec.hpp"
#include "refsd/errors.hpp"
#include "rng.hpp"

namespace refsd::pipeline {

using imaging::BBox;
using imaging::ImageBuffer;
using imaging::SoftMask;
using nlohmann::json;

namespace {

constexpr float kSupportTolerance = 0.01f;

ImageBuffer match_channels(const ImageBuffer& image, int channels) {
  if (image.channels() == channels) return image;
  if (channels == 3) return imaging::to_rgb(image);
  const std::vector<double> y = imaging::luminance(image);
  ImageBuffer out(image.width(), image.height(), 1);
  for (std::size_t i = 0; i < y.size(); ++i) {
    out.data()[i] = static_cast<std::uint8_t>(std::clamp(std::lround(y[i]), 0L, 255L));
  }
  return out;
}

void expect_dims(const ImageBuffer& image, int width, int height, const char* what) {
  if (image.width() != width || image.height() != height) {
    fail(ErrorKind::kProtocol, std::string(what) + " returned " + std::to_string(image.width()) + "x" +
                                   std::to_string(image.height()) + ", expected " + std::to_string(width) + "x" +
                                   std::to_string(height));
  }
}

void expect_dims(const SoftMask& mask, int width, int height, const char* what) {
  if (mask.width() != width || mask.height() != height) {
    fail(ErrorKind::kProtocol, std::string(what) + " returned a " + std::to_string(mask.width()) + "x" +
                                   std::to_string(mask.height()) + " mask, expected " + std::to_string(width) + "x" +
                                   std::to_string(height));
  }
}

SoftMask feathered(const SoftMask& mask, double sigma) {
  return sigma > 0 ? imaging::feather_mask(mask, sigma) : mask;
}

/// Full-frame avatar: the rendering inside `box`, its border pixels
/// replicated outward elsewhere.
ImageBuffer avatar_canvas(const ImageBuffer& render, const BBox& box, int width, int height) {
  ImageBuffer out(width, height, render.channels());
  for (int y = 0; y < height; ++y) {
    const int sy = std::clamp(y - box.y0, 0, render.height() - 1);
    for (int x = 0; x < width; ++x) {
      const int sx = std::clamp(x - box.x0, 0, render.width() - 1);
      for (int c = 0; c < render.channels(); ++c) out.at(x, y, c) = render.at(sx, sy, c);
    }
  }
  return out;
}

std::uint64_t stage_seed(std::uint64_t seed, std::string_view stage, std::uint64_t index = 0) {
  return rng::mix(rng::mix(seed, rng::stream_id(stage)), index);
}

json box_json(const BBox& b) { return json::array({b.x0, b.y0, b.x1, b.y1}); }

/// Forwards every call to `inner` while holding one of `slots` permits.
class LimitedBackend final : public backend::Backend {
 public:
  LimitedBackend(std::shared_ptr<backend::Backend> inner, int slots) : inner_(std::move(inner)), slots_(slots) {}

 private:
  template <typename F>
  auto guarded(F&& f) {
    slots_.acquire();
    struct Release {
      std::counting_semaphore<>& s;
      ~Release() { s.release(); }
    } release{slots_};
    return f();
  }

 public:
  backend::EstimateResponse estimate(const backend::EstimateRequest& r) override {
    return guarded([&] { return inner_->estimate(r); });
  }
  backend::SegmentResponse segment(const backend::SegmentRequest& r) override {
    return guarded([&] { return inner_->segment(r); });
  }
  backend::RenderResponse render(const backend::RenderRequest& r) override {
    return guarded([&] { return inner_->render(r); });
  }
  backend::GenerateResponse generate(const backend::GenerateRequest& r) override {
    return guarded([&] { return inner_->generate(r); });
  }
  backend::DetectPiiResponse detect_pii(const backend::DetectPiiRequest& r) override {
    return guarded([&] { return inner_->detect_pii(r); });
  }
  backend::InpaintResponse inpaint(const backend::InpaintRequest& r) override {
    return guarded([&] { return inner_->inpaint(r); });
  }
  backend::BackendInfo info(backend::Role role) override { return inner_->info(role); }

 private:
  std::shared_ptr<backend::Backend> inner_;
  std::counting_semaphore<> slots_;
};

}  // namespace

Letterbox letterbox_geometry(int width, int height, int size) {
  if (width <= 0 || height <= 0 || size <= 0) {
    fail(ErrorKind::kShape, "letterbox needs positive dimensions");
  }
  Letterbox lb;
  lb.size = size;
  const int longer = std::max(width, height);
  lb.scale = static_cast<double>(size) / longer;
  lb.content_width = width == longer ? size : std::clamp(static_cast<int>(std::lround(width * lb.scale)), 1, size);
  lb.content_height = height == longer ? size : std::clamp(static_cast<int>(std::lround(height * lb.scale)), 1, size);
  lb.offset_x = (size - lb.content_width) / 2;
  lb.offset_y = (size - lb.content_height) / 2;
  return lb;
}

ImageBuffer apply_letterbox(const ImageBuffer& image, const Letterbox& lb) {
  const ImageBuffer content = imaging::resize_bilinear(image, lb.content_width, lb.content_height);
  if (lb.is_identity()) return content;
  ImageBuffer out(lb.size, lb.size, image.channels());
  for (int y = 0; y < lb.size; ++y) {
    const int sy = std::clamp(y - lb.offset_y, 0, lb.content_height - 1);
    for (int x = 0; x < lb.size; ++x) {
      const int sx = std::clamp(x - lb.offset_x, 0, lb.content_width - 1);
      for (int c = 0; c < image.channels(); ++c) out.at(x, y, c) = content.at(sx, sy, c);
    }
  }
  return out;
}

ImageBuffer remove_letterbox(const ImageBuffer& image, const Letterbox& lb, int width, int height) {
  expect_dims(image, lb.size, lb.size, "generator");
  const BBox content{lb.offset_x, lb.offset_y, lb.offset_x + lb.content_width, lb.offset_y + lb.content_height};
  return imaging::resize_bilinear(imaging::crop(image, content).image, width, height);
}

int crop_padding(const BBox& box, const PipelineConfig& config) {
  const int from_fraction =
      static_cast<int>(std::lround(config.crop_pad_fraction * std::max(box.width(), box.height())));
  const int from_feather = config.feather_sigma > 0 ? imaging::gaussian_radius(config.feather_sigma) : 0;
  return std::max(from_fraction, from_feather);
}

ProcessedSubject process_subject(backend::Backend& backend, const ImageBuffer& image, const SubjectRecord& subject,
                                 const ImageBuffer& avatar, const PipelineConfig& config) {
  expect_dims(avatar, image.width(), image.height(), "avatar canvas");
  expect_dims(subject.mask, image.width(), image.height(), "subject mask");
  ProcessedSubject out;
  const imaging::CropResult xc = imaging::crop(image, subject.box, crop_padding(subject.box, config));
  out.effective_box = xc.box;
  const ImageBuffer mc = match_channels(imaging::crop(avatar, xc.box).image, image.channels());
  out.composite = imaging::alpha_composite(xc.image, mc, imaging::crop_mask(subject.mask, xc.box));

  const int res = config.generator_resolution;
  out.letterbox = letterbox_geometry(xc.box.width(), xc.box.height(), res);
  const ImageBuffer canvas = apply_letterbox(out.composite, out.letterbox);
  out.edges = imaging::canny_edges(apply_letterbox(mc, out.letterbox), config.canny);

  prompt::PromptSpec spec = subject.prompt_spec;
  spec.orientation_text.reset();
  const prompt::PromptText text = prompt::build_prompt(spec);
  out.orientation = prompt::prompt_attr(subject.params.theta, subject.params.beta);
  out.prompt = out.orientation + " " + text.positive;
  out.negative_prompt = text.negative;

  backend::GenerateRequest req;
  req.crop = canvas;
  req.edges = out.edges;
  req.prompt = out.prompt;
  req.negative_prompt = out.negative_prompt;
  req.seed = stage_seed(config.seed, "generate", static_cast<std::uint64_t>(subject.index));
  ImageBuffer generated = backend.generate(req).image;
  expect_dims(generated, res, res, "generator");
  out.generated = match_channels(generated, image.channels());
  return out;
}

ImageBuffer reintegrate(const ImageBuffer& image, const std::vector<Reintegration>& subjects) {
  ImageBuffer out = image;
  for (const Reintegration& s : subjects) {
    const ImageBuffer patch = remove_letterbox(match_channels(s.generated, image.channels()), s.letterbox,
                                               s.effective_box.width(), s.effective_box.height());
    out = imaging::alpha_composite(out, imaging::paste_resample(out, patch, s.effective_box), s.mask);
  }
  return out;
}

PiiResult pii_pass(backend::Backend& backend, const ImageBuffer& source, const ImageBuffer& target,
                   const std::vector<std::string>& descriptions, const PipelineConfig& config) {
  if (source.width() != target.width() || source.height() != target.height()) {
    fail(ErrorKind::kShape, "pii pass needs source and target of equal size");
  }
  PiiResult out;
  out.image = target;
  if (descriptions.empty()) return out;
  backend::DetectPiiRequest req{source, descriptions, stage_seed(config.seed, "detect_pii")};
  for (const backend::PiiRegion& region : backend.detect_pii(req).regions) {
    expect_dims(region.mask, source.width(), source.height(), "detect_pii");
    out.labels.push_back(region.label);
    out.regions.push_back(feathered(region.mask, config.feather_sigma));
  }
  const SoftMask mask = imaging::mask_union(out.regions, source.width(), source.height());
  if (!mask.support().is_valid()) return out;
  backend::InpaintRequest ireq{target, mask, std::string(kInpaintPrompt), stage_seed(config.seed, "inpaint")};
  const ImageBuffer filled = backend.inpaint(ireq).image;
  expect_dims(filled, target.width(), target.height(), "inpaint");
  out.image = imaging::alpha_composite(target, match_channels(filled, target.channels()), mask);
  return out;
}

Pipeline::Pipeline(PipelineConfig config, std::shared_ptr<backend::Backend> backend) : config_(std::move(config)) {
  config_.validate();
  if (!backend) fail(ErrorKind::kParameter, "pipeline needs a backend");
  backend_ = std::make_shared<LimitedBackend>(std::move(backend), config_.max_concurrency);
}

Pipeline::~Pipeline() = default;

PseudonymizationResult Pipeline::run(const ImageBuffer& image, const RunOptions& options) {
  using Clock = std::chrono::steady_clock;
  auto ms_since = [](Clock::time_point t) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t).count();
  };
  if (image.empty()) fail(ErrorKind::kShape, "input image is empty");
  const auto t_start = Clock::now();
  const int W = image.width();
  const int H = image.height();
  backend::Backend& be = *backend_;

  PseudonymizationResult result;
  result.input_hash = codec::image_hash(image);

  auto t = Clock::now();
  const std::vector<backend::SmplParams> params =
      be.estimate({image, stage_seed(config_.seed, "estimate")}).subjects;
  const double estimate_ms = ms_since(t);
  for (const auto& p : params) {
    if (p.theta.size() != prompt::kPoseLength || p.beta.size() != prompt::kShapeLength) {
      fail(ErrorKind::kProtocol, "estimator returned pose/shape vectors of the wrong length");
    }
  }

  const std::size_t n = params.size();
  result.subjects.resize(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};

  auto work = [&](std::size_t i) {
    SubjectArtifacts& art = result.subjects[i];
    art.index = static_cast<int>(i);
    backend::SegmentResponse seg =
        be.segment({image, static_cast<int>(i), stage_seed(config_.seed, "segment", i)});
    expect_dims(seg.mask, W, H, "segment");
    const BBox box{std::max(seg.box.x0, 0), std::max(seg.box.y0, 0), std::min(seg.box.x1, W), std::min(seg.box.y1, H)};
    art.box = box;
    if (box.width() < kMinSubjectSide || box.height() < kMinSubjectSide) {
      art.skipped = true;
      art.skip_reason = "degenerate box " + std::to_string(std::max(box.width(), 0)) + "x" +
                        std::to_string(std::max(box.height(), 0)) + " below " + std::to_string(kMinSubjectSide) +
                        " px";
      return;
    }
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        if (!box.contains(x, y) && seg.mask.at(x, y) > kSupportTolerance) {
          fail(ErrorKind::kProtocol, "segmentation mask " + std::to_string(i) + " has weight outside its box");
        }
      }
    }
    art.mask = feathered(seg.mask, config_.feather_sigma);

    SubjectRecord rec;
    rec.index = static_cast<int>(i);
    rec.params = params[i];
    rec.mask = art.mask;
    rec.box = box;
    if (!config_.prompts.empty()) {
      rec.prompt_spec = config_.prompts[i % config_.prompts.size()];
    } else {
      rec.prompt_spec = prompt::assign_strategy(config_.prompt.strategy, config_.prompt.labels, config_.seed,
                                                options.batch_offset + i, config_.prompt.level);
    }

    ImageBuffer render =
        be.render({params[i], box.width(), box.height(), stage_seed(config_.seed, "render", i)}).image;
    expect_dims(render, box.width(), box.height(), "render");
    art.avatar = match_channels(render, image.channels());
    art.processed = process_subject(be, image, rec, avatar_canvas(art.avatar, box, W, H), config_);
  };

  t = Clock::now();
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(config_.max_concurrency));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        work(i);
      } catch (...) {
        errors[i] = std::current_exception();
        break;
      }
    }
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            work(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  const double subjects_ms = ms_since(t);

  t = Clock::now();
  std::vector<Reintegration> items;
  for (const SubjectArtifacts& s : result.subjects) {
    if (s.skipped) continue;
    items.push_back({s.processed.generated, s.mask, s.processed.effective_box, s.processed.letterbox});
  }
  const ImageBuffer x_hat = reintegrate(image, items);
  const double reintegrate_ms = ms_since(t);

  t = Clock::now();
  result.pii = pii_pass(be, image, x_hat, config_.pii_descriptions, config_);
  const double pii_ms = ms_since(t);
  result.output = result.pii.image;
  result.output_hash = codec::image_hash(result.output);

  json backends = json::object();
  for (backend::Role role : backend::kAllRoles) {
    try {
      const backend::BackendInfo info = be.info(role);
      backends[std::string(backend::to_string(role))] = {{"name", info.name}, {"version", info.version}};
    } catch (const Error& e) {
      backends[std::string(backend::to_string(role))] = {{"error", e.what()}};
    }
  }
  json subjects = json::array();
  for (const SubjectArtifacts& s : result.subjects) {
    json js = {{"index", s.index}, {"box", box_json(s.box)}, {"status", s.skipped ? "skipped" : "processed"}};
    if (s.skipped) {
      js["reason"] = s.skip_reason;
    } else {
      const ProcessedSubject& p = s.processed;
      js["effective_box"] = box_json(p.effective_box);
      js["orientation"] = p.orientation;
      js["prompt"] = p.prompt;
      js["negative_prompt"] = p.negative_prompt;
      js["letterbox"] = {{"size", p.letterbox.size},
                         {"scale", p.letterbox.scale},
                         {"offset_x", p.letterbox.offset_x},
                         {"offset_y", p.letterbox.offset_y},
                         {"content_width", p.letterbox.content_width},
                         {"content_height", p.letterbox.content_height}};
      js["hashes"] = {{"avatar", codec::image_hash(s.avatar)},
                      {"edges", codec::image_hash(imaging::edge_image(p.edges))},
                      {"crop", codec::image_hash(p.generated)}};
    }
    subjects.push_back(std::move(js));
  }
  json pii_regions = json::array();
  for (std::size_t i = 0; i < result.pii.regions.size(); ++i) {
    pii_regions.push_back({{"label", result.pii.labels[i]}, {"support", box_json(result.pii.regions[i].support())}});
  }
  json manifest = {
      {"schema", "refsd.manifest.v1"},
      {"image_id", options.image_id},
      {"batch_offset", options.batch_offset},
      {"input", {{"width", W}, {"height", H}, {"channels", image.channels()}, {"sha256", result.input_hash}}},
      {"output", {{"sha256", result.output_hash}}},
      {"seed", config_.seed},
      {"config", json::parse(config_to_json(config_))},
      {"vocabulary_version", prompt::VocabularyRegistry::builtin().version()},
      {"backends", backends},
      {"subjects", subjects},
      {"pii", {{"descriptions", config_.pii_descriptions}, {"regions", pii_regions}}},
  };
  result.manifest_hash = codec::sha256_hex(manifest.dump());
  manifest["manifest_hash"] = result.manifest_hash;
  manifest["timings_ms"] = {{"estimate", estimate_ms},
                            {"subjects", subjects_ms},
                            {"reintegrate", reintegrate_ms},
                            {"pii", pii_ms},
                            {"total", ms_since(t_start)}};
  result.manifest_json = manifest.dump(2);
  return result;
}

void write_artifacts(const PseudonymizationResult& result, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
  codec::write_png(dir / "final.png", result.output);
  for (const SubjectArtifacts& s : result.subjects) {
    if (s.skipped) continue;
    const fs::path sub = dir / "subjects" / std::to_string(s.index);
    fs::create_directories(sub, ec);
    if (ec) fail(ErrorKind::kIo, "cannot create " + sub.string() + ": " + ec.message());
    codec::write_png(sub / "avatar.png", s.avatar);
    codec::write_png(sub / "edges.png", imaging::edge_image(s.processed.edges));
    codec::write_png(sub / "crop.png", s.processed.generated);
    codec::write_file(sub / "prompt.txt", s.processed.prompt + "\n");
  }
  codec::write_file(dir / "manifest.json", result.manifest_json + "\n");
}

std::string image_id_for(const std::filesystem::path& path) { return path.stem().string(); }

}  // namespace refsd::pipeline
