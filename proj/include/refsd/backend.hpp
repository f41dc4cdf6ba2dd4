// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "refsd/imaging.hpp"

namespace refsd::backend {

/// The six model roles of the replacement algorithm.
enum class Role { kEstimate, kSegment, kRender, kGenerate, kDetectPii, kInpaint };

inline constexpr std::array kAllRoles = {Role::kEstimate, Role::kSegment,   Role::kRender,
                                         Role::kGenerate, Role::kDetectPii, Role::kInpaint};

std::string_view to_string(Role role);  // "estimate", ..., "detect_pii", "inpaint"
Role parse_role(std::string_view name);
std::string_view endpoint(Role role);  // "/v1/estimate", ..., "/v1/detect-pii"

inline constexpr std::string_view kSchema = "refsd.backend.v1";
inline constexpr std::string_view kHealthPath = "/v1/healthz";
inline constexpr std::string_view kContentType = "application/json";

struct SmplParams {
  std::vector<double> theta;  // 72
  std::vector<double> beta;   // 10

  friend bool operator==(const SmplParams&, const SmplParams&) = default;
};

struct EstimateRequest {
  imaging::ImageBuffer image;
  std::uint64_t seed = 0;
  friend bool operator==(const EstimateRequest&, const EstimateRequest&) = default;
};
struct EstimateResponse {
  std::vector<SmplParams> subjects;
  friend bool operator==(const EstimateResponse&, const EstimateResponse&) = default;
};

struct SegmentRequest {
  imaging::ImageBuffer image;
  int subject_index = 0;
  std::uint64_t seed = 0;
  friend bool operator==(const SegmentRequest&, const SegmentRequest&) = default;
};
struct SegmentResponse {
  imaging::SoftMask mask;
  imaging::BBox box;
  friend bool operator==(const SegmentResponse&, const SegmentResponse&) = default;
};

struct RenderRequest {
  SmplParams params;
  int width = 0;
  int height = 0;
  std::uint64_t seed = 0;
  friend bool operator==(const RenderRequest&, const RenderRequest&) = default;
};
struct RenderResponse {
  imaging::ImageBuffer image;
  friend bool operator==(const RenderResponse&, const RenderResponse&) = default;
};

struct GenerateRequest {
  imaging::ImageBuffer crop;
  imaging::EdgeMap edges;
  std::string prompt;
  std::string negative_prompt;
  std::uint64_t seed = 0;
  friend bool operator==(const GenerateRequest&, const GenerateRequest&) = default;
};
struct GenerateResponse {
  imaging::ImageBuffer image;
  friend bool operator==(const GenerateResponse&, const GenerateResponse&) = default;
};

struct DetectPiiRequest {
  imaging::ImageBuffer image;
  std::vector<std::string> descriptions;
  std::uint64_t seed = 0;
  friend bool operator==(const DetectPiiRequest&, const DetectPiiRequest&) = default;
};
struct PiiRegion {
  std::string label;
  imaging::SoftMask mask;
  friend bool operator==(const PiiRegion&, const PiiRegion&) = default;
};
struct DetectPiiResponse {
  std::vector<PiiRegion> regions;
  friend bool operator==(const DetectPiiResponse&, const DetectPiiResponse&) = default;
};

struct InpaintRequest {
  imaging::ImageBuffer image;
  imaging::SoftMask mask;
  std::string prompt;
  std::uint64_t seed = 0;
  friend bool operator==(const InpaintRequest&, const InpaintRequest&) = default;
};
struct InpaintResponse {
  imaging::ImageBuffer image;
  friend bool operator==(const InpaintResponse&, const InpaintResponse&) = default;
};

struct BackendInfo {
  std::string name;
  std::string version;
  friend bool operator==(const BackendInfo&, const BackendInfo&) = default;
};

// Wire encoding. Every message is a JSON envelope
//   {"schema": "refsd.backend.v1", "role": ..., "request_id": ..., "payload": {...}}
// with images as {"width", "height", "channels", "png": base64}. Masks travel
// as 8-bit grayscale PNG (weight = value / 255), so encode/decode is exact for
// weights on that grid.
namespace wire {

template <typename Message>
std::string encode_payload(const Message& message);

template <typename Message>
Message decode_payload(std::string_view payload_json);

/// Request id for a payload: "<role>-" + first 16 hex chars of its SHA-256.
std::string request_id(Role role, std::string_view payload_json);

std::string envelope(Role role, std::string_view request_id, std::string_view payload_json,
                     const std::optional<BackendInfo>& backend = std::nullopt);

struct Envelope {
  Role role;
  std::string request_id;
  std::string payload;  // compact JSON text
  std::optional<BackendInfo> backend;
};

/// Throws kProtocol on schema mismatch or missing fields; an error envelope
/// ({"error": {"kind", "message"}}) is rethrown as the error it carries.
Envelope open_envelope(std::string_view body);

std::string error_body(std::string_view kind, std::string_view message, std::string_view request_id = {});

}  // namespace wire

class Backend {
 public:
  virtual ~Backend() = default;

  virtual EstimateResponse estimate(const EstimateRequest& request) = 0;
  virtual SegmentResponse segment(const SegmentRequest& request) = 0;
  virtual RenderResponse render(const RenderRequest& request) = 0;
  virtual GenerateResponse generate(const GenerateRequest& request) = 0;
  virtual DetectPiiResponse detect_pii(const DetectPiiRequest& request) = 0;
  virtual InpaintResponse inpaint(const InpaintRequest& request) = 0;

  virtual BackendInfo info(Role role) = 0;
};

/// Decodes `body` for `role`, calls `backend`, and returns the response
/// envelope echoing the request id. Shared by every server front-end.
std::string dispatch(Backend& backend, Role role, std::string_view body);

// ---- planted scenes --------------------------------------------------------

struct PlantedSubject {
  imaging::BBox box;
  double yaw_deg = 0.0;
  std::optional<std::vector<double>> beta;
  friend bool operator==(const PlantedSubject&, const PlantedSubject&) = default;
};

struct PlantedRegion {
  std::string label;
  imaging::BBox box;
  friend bool operator==(const PlantedRegion&, const PlantedRegion&) = default;
};

/// Sidecar `<stem>.scene.json` next to a test image:
///   {"version": 1, "subjects": [{"box": [x0,y0,x1,y1], "yaw_deg": 30, "beta": [...]}],
///    "pii": [{"label": "license plate", "box": [x0,y0,x1,y1]}]}
struct Scene {
  std::vector<PlantedSubject> subjects;
  std::vector<PlantedRegion> pii;
  friend bool operator==(const Scene&, const Scene&) = default;
};

Scene parse_scene(std::string_view json_text);
std::string scene_to_json(const Scene& scene);
std::filesystem::path sidecar_path(const std::filesystem::path& image_path);

/// Scenes keyed by image content hash, so mocks recognise an image however it
/// reaches them.
class SceneRegistry {
 public:
  void add(const imaging::ImageBuffer& image, Scene scene);
  /// Registers `<image>` with its sidecar; returns false when none exists.
  bool add_file(const std::filesystem::path& image_path);
  /// Registers every PNG under `dir` that has a sidecar. Returns the count.
  std::size_t add_directory(const std::filesystem::path& dir);

  std::optional<Scene> find(const imaging::ImageBuffer& image) const;
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::unordered_map<std::string, Scene> scenes_;
};

enum class GenerateMode { kEcho, kFlat, kEdgePaint };

std::string_view to_string(GenerateMode mode);
GenerateMode parse_generate_mode(std::string_view name);

struct MockOptions {
  GenerateMode generate_mode = GenerateMode::kEdgePaint;
  std::optional<std::array<std::uint8_t, 3>> flat_color;  // overrides the prompt-hash colour
  std::optional<std::array<std::uint8_t, 3>> inpaint_color;  // overrides the ring mean
};

inline constexpr std::string_view kMockName = "refsd-mock";
inline constexpr std::string_view kMockVersion = "1.0.0";

/// Deterministic stand-ins for the six model roles.
///  - estimate: one record per planted subject; root yaw from the scene,
///    other joints seeded noise.
///  - segment: binary mask of the planted box.
///  - render: flat-shaded humanoid silhouette on a dark background, turned
///    according to root yaw.
///  - generate: echo / flat colour / edge-paint (edge pixels inverted).
///  - detect_pii: planted regions whose label equals a description exactly.
///  - inpaint: fills {round(255 a) > 0} with the mean of the 4-px ring around
///    it (Chebyshev distance), or the whole-image mean when no ring exists.
class MockBackend final : public Backend {
 public:
  explicit MockBackend(std::shared_ptr<const SceneRegistry> scenes, MockOptions options = {});

  EstimateResponse estimate(const EstimateRequest& request) override;
  SegmentResponse segment(const SegmentRequest& request) override;
  RenderResponse render(const RenderRequest& request) override;
  GenerateResponse generate(const GenerateRequest& request) override;
  DetectPiiResponse detect_pii(const DetectPiiRequest& request) override;
  InpaintResponse inpaint(const InpaintRequest& request) override;
  BackendInfo info(Role role) override;

  const MockOptions& options() const noexcept { return options_; }

 private:
  std::shared_ptr<const SceneRegistry> scenes_;
  MockOptions options_;
};

/// Mock silhouette renderer, exposed for tests and the corpus tool.
imaging::ImageBuffer render_silhouette(const SmplParams& params, int width, int height);

inline constexpr std::uint8_t kSilhouetteBackground = 20;

// ---- HTTP client -----------------------------------------------------------

struct HttpOptions {
  std::map<Role, std::string> endpoints;  // base URL per role, e.g. http://127.0.0.1:8700
  std::chrono::milliseconds timeout{120000};
  int retries = 3;
  std::chrono::milliseconds backoff{200};  // doubled per attempt
  std::string auth_token;                  // sent as "Authorization: Bearer ..."
};

/// Backend speaking the wire protocol. Safe to share across threads; each call
/// opens its own connection. Connection failures, timeouts and 5xx replies are
/// retried; after the last attempt a TransportError names the role. 4xx
/// replies raise the error kind the server reported.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpOptions options);

  EstimateResponse estimate(const EstimateRequest& request) override;
  SegmentResponse segment(const SegmentRequest& request) override;
  RenderResponse render(const RenderRequest& request) override;
  GenerateResponse generate(const GenerateRequest& request) override;
  DetectPiiResponse detect_pii(const DetectPiiRequest& request) override;
  InpaintResponse inpaint(const InpaintRequest& request) override;
  BackendInfo info(Role role) override;

 private:
  std::string call(Role role, const std::string& payload);
  template <typename Response, typename Request>
  Response roundtrip(Role role, const Request& request);

  HttpOptions options_;
  std::mutex info_mutex_;
  std::map<Role, BackendInfo> info_;
};

// ---- HTTP server -----------------------------------------------------------

/// Serves the six role endpoints plus health for any Backend.
class BackendServer {
 public:
  BackendServer(std::shared_ptr<Backend> backend, std::string auth_token = {});
  ~BackendServer();
  BackendServer(const BackendServer&) = delete;
  BackendServer& operator=(const BackendServer&) = delete;

  /// Binds host:port (port 0 picks a free port); returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks serving requests until stop().
  void run();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace refsd::backend
