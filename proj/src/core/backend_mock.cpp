// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

#include <json.hpp>

#include <algorithm>
#include <cmath>

#include "refsd/backend.hpp"
#include "refsd/codec.hpp"
#include "refsd/errors.hpp"
#include "refsd/prompt.hpp"
#include "rng.hpp"

namespace refsd::backend {

using imaging::BBox;
using imaging::ImageBuffer;
using imaging::SoftMask;
using nlohmann::json;

namespace {

BBox box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) fail(ErrorKind::kParameter, "scene box must be [x0, y0, x1, y1]");
  BBox b{j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
  if (!b.is_valid()) fail(ErrorKind::kParameter, "scene box is degenerate");
  return b;
}

SoftMask box_mask(int w, int h, const BBox& box) {
  SoftMask m(w, h, 0.0f);
  const BBox c{std::max(box.x0, 0), std::max(box.y0, 0), std::min(box.x1, w), std::min(box.y1, h)};
  for (int y = c.y0; y < c.y1; ++y)
    for (int x = c.x0; x < c.x1; ++x) m.at(x, y) = 1.0f;
  return m;
}

void check_params(const SmplParams& p) {
  if (p.theta.size() != prompt::kPoseLength) {
    fail(ErrorKind::kShape, "theta must have 72 values, got " + std::to_string(p.theta.size()));
  }
  if (p.beta.size() != prompt::kShapeLength) {
    fail(ErrorKind::kShape, "beta must have 10 values, got " + std::to_string(p.beta.size()));
  }
}

std::uint8_t round_mean(std::uint64_t sum, std::uint64_t count) {
  return static_cast<std::uint8_t>((2 * sum + count) / (2 * count));
}

}  // namespace

Scene parse_scene(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::kParameter, std::string("scene: ") + e.what());
  }
  if (j.value("version", 0) != 1) fail(ErrorKind::kParameter, "scene: unsupported version");
  Scene scene;
  for (const json& s : j.value("subjects", json::array())) {
    PlantedSubject subject{box_from_json(s.at("box")), s.value("yaw_deg", 0.0), std::nullopt};
    if (s.contains("beta")) {
      subject.beta = s.at("beta").get<std::vector<double>>();
      if (subject.beta->size() != prompt::kShapeLength) fail(ErrorKind::kShape, "scene: beta must have 10 values");
    }
    scene.subjects.push_back(std::move(subject));
  }
  for (const json& r : j.value("pii", json::array())) {
    scene.pii.push_back({r.at("label").get<std::string>(), box_from_json(r.at("box"))});
  }
  return scene;
}

std::string scene_to_json(const Scene& scene) {
  json subjects = json::array();
  for (const PlantedSubject& s : scene.subjects) {
    json o = {{"box", {s.box.x0, s.box.y0, s.box.x1, s.box.y1}}, {"yaw_deg", s.yaw_deg}};
    if (s.beta) o["beta"] = *s.beta;
    subjects.push_back(o);
  }
  json pii = json::array();
  for (const PlantedRegion& r : scene.pii) {
    pii.push_back({{"label", r.label}, {"box", {r.box.x0, r.box.y0, r.box.x1, r.box.y1}}});
  }
  return json{{"version", 1}, {"subjects", subjects}, {"pii", pii}}.dump(2);
}

std::filesystem::path sidecar_path(const std::filesystem::path& image_path) {
  std::filesystem::path p = image_path;
  p.replace_extension(".scene.json");
  return p;
}

void SceneRegistry::add(const ImageBuffer& image, Scene scene) {
  const std::string key = codec::image_hash(image);
  std::lock_guard lock(mutex_);
  scenes_[key] = std::move(scene);
}

bool SceneRegistry::add_file(const std::filesystem::path& image_path) {
  const auto sidecar = sidecar_path(image_path);
  if (!std::filesystem::exists(sidecar)) return false;
  add(codec::read_png(image_path), parse_scene(codec::read_file(sidecar)));
  return true;
}

std::size_t SceneRegistry::add_directory(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> images;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") images.push_back(entry.path());
  }
  std::sort(images.begin(), images.end());
  std::size_t n = 0;
  for (const auto& p : images) n += add_file(p) ? 1 : 0;
  return n;
}

std::optional<Scene> SceneRegistry::find(const ImageBuffer& image) const {
  const std::string key = codec::image_hash(image);
  std::lock_guard lock(mutex_);
  auto it = scenes_.find(key);
  if (it == scenes_.end()) return std::nullopt;
  return it->second;
}

std::size_t SceneRegistry::size() const {
  std::lock_guard lock(mutex_);
  return scenes_.size();
}

std::string_view to_string(GenerateMode mode) {
  switch (mode) {
    case GenerateMode::kEcho: return "echo";
    case GenerateMode::kFlat: return "flat";
    case GenerateMode::kEdgePaint: return "edge-paint";
  }
  return "unknown";
}

GenerateMode parse_generate_mode(std::string_view name) {
  for (GenerateMode m : {GenerateMode::kEcho, GenerateMode::kFlat, GenerateMode::kEdgePaint}) {
    if (to_string(m) == name) return m;
  }
  fail(ErrorKind::kParameter, "unknown generate mode '" + std::string(name) + "'");
}

ImageBuffer render_silhouette(const SmplParams& params, int width, int height) {
  check_params(params);
  if (width < 1 || height < 1) fail(ErrorKind::kShape, "render: dimensions must be >= 1");
  const double yaw = prompt::root_yaw_degrees(params.theta) * M_PI / 180.0;
  const double s = std::sin(yaw);
  const double c = std::cos(yaw);
  const double girth = std::clamp(1.0 + 0.05 * params.beta[0], 0.8, 1.2);
  const double w = width;
  const double h = height;
  const double cx = (width - 1) / 2.0;
  const int facing = std::abs(s) > 0.2 ? (s > 0 ? 1 : -1) : 0;

  const double head_cx = cx + 0.08 * w * s;
  const double head_rx = 0.11 * w * girth;
  const double head_ry = 0.09 * h;
  const double torso_half = 0.2 * w * girth * (0.55 + 0.45 * std::abs(c));
  const double arm_width = 0.07 * w;

  ImageBuffer out(width, height, 3, kSilhouetteBackground);
  auto paint = [&](int x, int y, int shade) {
    out.at(x, y, 0) = static_cast<std::uint8_t>(shade);
    out.at(x, y, 1) = static_cast<std::uint8_t>(shade - 10);
    out.at(x, y, 2) = static_cast<std::uint8_t>(shade - 20);
  };
  for (int y = 0; y < height; ++y) {
    const double v = y / h;
    for (int x = 0; x < width; ++x) {
      const double dx = x - cx;
      const double ax = std::abs(dx);
      const double hx = (x - head_cx) / head_rx;
      const double hy = (y - 0.12 * h) / head_ry;
      if (hx * hx + hy * hy <= 1.0) {
        paint(x, y, 235);
      } else if (facing != 0 && v >= 0.10 && v <= 0.15 && facing * (x - head_cx) >= 0.8 * head_rx &&
                 facing * (x - head_cx) <= head_rx + 0.05 * w) {
        paint(x, y, 235);  // nose
      } else if (v >= 0.22 && v <= 0.58 && ax <= torso_half) {
        paint(x, y, 200);
      } else if (v >= 0.24 && v <= 0.55 && ax > torso_half && ax <= torso_half + arm_width) {
        paint(x, y, 180);
      } else if (facing != 0 && v >= 0.30 && v <= 0.36 && facing * dx > 0 && facing * dx <= 0.38 * w) {
        paint(x, y, 180);  // forward-reaching arm
      } else if (v > 0.58 && v <= 0.98 && ax >= 0.02 * w && ax <= 0.13 * w * girth) {
        paint(x, y, 190);
      } else if (facing != 0 && v >= 0.93 && v <= 0.98 && facing * dx > 0 && facing * dx <= 0.22 * w) {
        paint(x, y, 190);  // feet
      }
    }
  }
  return out;
}

MockBackend::MockBackend(std::shared_ptr<const SceneRegistry> scenes, MockOptions options)
    : scenes_(scenes ? std::move(scenes) : std::make_shared<const SceneRegistry>()), options_(options) {}

EstimateResponse MockBackend::estimate(const EstimateRequest& request) {
  if (request.image.empty()) fail(ErrorKind::kProtocol, "estimate: empty image");
  EstimateResponse response;
  const auto scene = scenes_->find(request.image);
  if (!scene) return response;
  const std::uint64_t image_stream = rng::stream_id(codec::image_hash(request.image));
  for (std::size_t i = 0; i < scene->subjects.size(); ++i) {
    const PlantedSubject& planted = scene->subjects[i];
    rng::Engine eng = rng::engine(request.seed, rng::mix(image_stream, i));
    SmplParams p;
    p.theta.assign(prompt::kPoseLength, 0.0);
    p.theta[1] = planted.yaw_deg * M_PI / 180.0;
    for (std::size_t k = 3; k < prompt::kPoseLength; ++k) p.theta[k] = rng::uniform_real(eng, -0.1, 0.1);
    if (planted.beta) {
      p.beta = *planted.beta;
    } else {
      p.beta.resize(prompt::kShapeLength);
      for (double& b : p.beta) b = rng::uniform_real(eng, -1.0, 1.0);
    }
    response.subjects.push_back(std::move(p));
  }
  return response;
}

SegmentResponse MockBackend::segment(const SegmentRequest& request) {
  const auto scene = scenes_->find(request.image);
  const std::size_t count = scene ? scene->subjects.size() : 0;
  if (request.subject_index < 0 || static_cast<std::size_t>(request.subject_index) >= count) {
    fail(ErrorKind::kProtocol, "segment: subject index " + std::to_string(request.subject_index) +
                                   " out of range (" + std::to_string(count) + " subjects)");
  }
  const BBox& planted = scene->subjects[request.subject_index].box;
  const int w = request.image.width();
  const int h = request.image.height();
  const BBox box{std::max(planted.x0, 0), std::max(planted.y0, 0), std::min(planted.x1, w),
                 std::min(planted.y1, h)};
  if (!box.is_valid()) fail(ErrorKind::kProtocol, "segment: planted box lies outside the image");
  return {box_mask(w, h, box), box};
}

RenderResponse MockBackend::render(const RenderRequest& request) {
  return {render_silhouette(request.params, request.width, request.height)};
}

GenerateResponse MockBackend::generate(const GenerateRequest& request) {
  const ImageBuffer& crop = request.crop;
  if (crop.empty()) fail(ErrorKind::kProtocol, "generate: empty crop");
  if (request.edges.width() != crop.width() || request.edges.height() != crop.height()) {
    fail(ErrorKind::kProtocol, "generate: edge map dimensions differ from the crop");
  }
  switch (options_.generate_mode) {
    case GenerateMode::kEcho: return {crop};
    case GenerateMode::kFlat: {
      std::array<std::uint8_t, 3> rgb{};
      if (options_.flat_color) {
        rgb = *options_.flat_color;
      } else {
        const std::string digest = codec::sha256_hex(request.prompt + "\n" + std::to_string(request.seed));
        for (int k = 0; k < 3; ++k) rgb[k] = static_cast<std::uint8_t>(std::stoi(digest.substr(2 * k, 2), nullptr, 16));
      }
      ImageBuffer out(crop.width(), crop.height(), crop.channels());
      for (int y = 0; y < crop.height(); ++y)
        for (int x = 0; x < crop.width(); ++x)
          for (int ch = 0; ch < crop.channels(); ++ch) out.at(x, y, ch) = rgb[crop.channels() == 3 ? ch : 0];
      return {out};
    }
    case GenerateMode::kEdgePaint: {
      ImageBuffer out = crop;
      for (int y = 0; y < crop.height(); ++y)
        for (int x = 0; x < crop.width(); ++x)
          if (request.edges.at(x, y))
            for (int ch = 0; ch < crop.channels(); ++ch) out.at(x, y, ch) = 255 - crop.at(x, y, ch);
      return {out};
    }
  }
  fail(ErrorKind::kProtocol, "generate: unknown mode");
}

DetectPiiResponse MockBackend::detect_pii(const DetectPiiRequest& request) {
  DetectPiiResponse response;
  const auto scene = scenes_->find(request.image);
  if (!scene) return response;
  for (const PlantedRegion& region : scene->pii) {
    if (std::find(request.descriptions.begin(), request.descriptions.end(), region.label) !=
        request.descriptions.end()) {
      response.regions.push_back(
          {region.label, box_mask(request.image.width(), request.image.height(), region.box)});
    }
  }
  return response;
}

InpaintResponse MockBackend::inpaint(const InpaintRequest& request) {
  const ImageBuffer& img = request.image;
  const SoftMask& mask = request.mask;
  if (mask.width() != img.width() || mask.height() != img.height()) {
    fail(ErrorKind::kProtocol, "inpaint: mask dimensions differ from the image");
  }
  const int w = img.width();
  const int h = img.height();
  const ImageBuffer quantized = imaging::mask_image(mask);
  std::vector<std::uint8_t> region(static_cast<std::size_t>(w) * h);
  bool any = false;
  for (std::size_t i = 0; i < region.size(); ++i) any |= (region[i] = quantized.data()[i] > 0 ? 1 : 0);
  if (!any) return {img};

  // Chebyshev dilation by 4 px as two separable max passes.
  constexpr int kRing = 4;
  std::vector<std::uint8_t> rows(region.size()), grown(region.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::uint8_t v = 0;
      for (int k = std::max(0, x - kRing); k <= std::min(w - 1, x + kRing) && !v; ++k) v = region[y * w + k];
      rows[y * w + x] = v;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::uint8_t v = 0;
      for (int k = std::max(0, y - kRing); k <= std::min(h - 1, y + kRing) && !v; ++k) v = rows[k * w + x];
      grown[y * w + x] = v;
    }

  const int channels = img.channels();
  std::array<std::uint64_t, 3> ring_sum{}, all_sum{};
  std::uint64_t ring_count = 0;
  for (std::size_t p = 0; p < region.size(); ++p) {
    const bool ring = grown[p] && !region[p];
    ring_count += ring;
    for (int ch = 0; ch < channels; ++ch) {
      const std::uint8_t v = img.data()[p * channels + ch];
      all_sum[ch] += v;
      if (ring) ring_sum[ch] += v;
    }
  }
  std::array<std::uint8_t, 3> fill{};
  for (int ch = 0; ch < channels; ++ch) {
    fill[ch] = ring_count ? round_mean(ring_sum[ch], ring_count) : round_mean(all_sum[ch], region.size());
  }
  if (options_.inpaint_color) fill = *options_.inpaint_color;

  ImageBuffer out = img;
  for (std::size_t p = 0; p < region.size(); ++p) {
    if (!region[p]) continue;
    for (int ch = 0; ch < channels; ++ch) out.data()[p * channels + ch] = fill[channels == 3 ? ch : 0];
  }
  return {out};
}

BackendInfo MockBackend::info(Role role) {
  std::string version(kMockVersion);
  if (role == Role::kGenerate) version += "+" + std::string(to_string(options_.generate_mode));
  return {std::string(kMockName), version};
}

}  // namespace refsd::backend
