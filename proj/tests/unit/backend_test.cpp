// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <httplib.h>

#include <cmath>
#include <random>
#include <thread>

#include "refsd/backend.hpp"
#include "refsd/codec.hpp"
#include "refsd/prompt.hpp"
#include "testing.hpp"

namespace refsd::backend {
namespace {

using imaging::BBox;
using imaging::ImageBuffer;
using imaging::SoftMask;
using refsd::testing::expect_error;

ImageBuffer gradient_image(int w, int h) {
  ImageBuffer img(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      img.at(x, y, 0) = static_cast<std::uint8_t>(x * 3);
      img.at(x, y, 1) = static_cast<std::uint8_t>(y * 2);
      img.at(x, y, 2) = static_cast<std::uint8_t>((x + y) % 256);
    }
  return img;
}

struct Fixture {
  ImageBuffer image = gradient_image(80, 100);
  std::shared_ptr<SceneRegistry> scenes = std::make_shared<SceneRegistry>();

  Fixture() {
    Scene scene;
    scene.subjects.push_back({{10, 10, 50, 90}, 0.0, std::nullopt});
    scene.subjects.push_back({{55, 20, 75, 60}, 90.0, std::vector<double>(10, 0.5)});
    scene.pii.push_back({"license plate", {60, 80, 78, 92}});
    scene.pii.push_back({"street sign", {2, 2, 9, 8}});
    scenes->add(image, scene);
  }
};

SmplParams yaw_params(double degrees) {
  SmplParams p{std::vector<double>(72, 0.0), std::vector<double>(10, 0.0)};
  p.theta[1] = degrees * M_PI / 180.0;
  return p;
}

TEST(Scene, JsonRoundTrip) {
  Scene s;
  s.subjects.push_back({{1, 2, 30, 40}, -45.0, std::vector<double>(10, 0.25)});
  s.pii.push_back({"license plate", {5, 6, 7, 8}});
  EXPECT_EQ(parse_scene(scene_to_json(s)), s);
  EXPECT_EQ(sidecar_path("a/b/img_01.png"), std::filesystem::path("a/b/img_01.scene.json"));
  expect_error(ErrorKind::kParameter, [] { parse_scene(R"({"version": 2})"); });
}

TEST(MockEstimate, PlantedCountAndDeterminism) {
  Fixture f;
  MockBackend mock(f.scenes);
  const auto a = mock.estimate({f.image, 7});
  ASSERT_EQ(a.subjects.size(), 2u);
  for (const auto& s : a.subjects) {
    EXPECT_EQ(s.theta.size(), 72u);
    EXPECT_EQ(s.beta.size(), 10u);
  }
  EXPECT_EQ(mock.estimate({f.image, 7}), a);
  EXPECT_NEAR(prompt::root_yaw_degrees(a.subjects[1].theta), 90.0, 1e-9);
  EXPECT_EQ(a.subjects[1].beta, std::vector<double>(10, 0.5));
  EXPECT_TRUE(mock.estimate({gradient_image(10, 10), 7}).subjects.empty());
}

TEST(MockSegment, PlantedRectangle) {
  Fixture f;
  MockBackend mock(f.scenes);
  const auto r = mock.segment({f.image, 0, 1});
  EXPECT_EQ(r.box, (BBox{10, 10, 50, 90}));
  for (int y = 0; y < 100; ++y)
    for (int x = 0; x < 80; ++x) ASSERT_EQ(r.mask.at(x, y), r.box.contains(x, y) ? 1.0f : 0.0f);
  EXPECT_EQ(r.mask.support(0.01f), r.box);
  const auto other = mock.segment({f.image, 1, 1});
  for (std::size_t i = 0; i < r.mask.weights().size(); ++i)
    ASSERT_FALSE(r.mask.weights()[i] > 0 && other.mask.weights()[i] > 0);
  expect_error(ErrorKind::kProtocol, [&] { mock.segment({f.image, 2, 1}); });
  expect_error(ErrorKind::kProtocol, [&] { mock.segment({f.image, -1, 1}); });
}

TEST(MockRender, FrontFacingIsMirrorSymmetric) {
  const ImageBuffer img = render_silhouette(yaw_params(0), 61, 120);
  for (int y = 0; y < 120; ++y)
    for (int x = 0; x < 61; ++x) ASSERT_EQ(img.at(x, y, 0), img.at(60 - x, y, 0)) << x << "," << y;
  EXPECT_EQ(render_silhouette(yaw_params(0), 61, 120), img);
}

TEST(MockRender, TurnedSilhouetteIsAsymmetric) {
  const ImageBuffer front = render_silhouette(yaw_params(0), 64, 128);
  const ImageBuffer side = render_silhouette(yaw_params(90), 64, 128);
  auto column_counts = [](const ImageBuffer& img) {
    std::vector<int> cols(img.width(), 0);
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) cols[x] += img.at(x, y, 0) != kSilhouetteBackground;
    return cols;
  };
  auto imbalance = [](const std::vector<int>& cols) {
    int left = 0, right = 0;
    const int n = static_cast<int>(cols.size());
    for (int x = 0; x < n / 2; ++x) left += cols[x];
    for (int x = n - n / 2; x < n; ++x) right += cols[x];
    return right - left;
  };
  EXPECT_EQ(imbalance(column_counts(front)), 0);
  EXPECT_GT(imbalance(column_counts(side)), 50);
  EXPECT_LT(imbalance(column_counts(render_silhouette(yaw_params(-90), 64, 128))), -50);
}

TEST(MockRender, ShapeErrors) {
  SmplParams bad{std::vector<double>(71), std::vector<double>(10)};
  expect_error(ErrorKind::kShape, [&] { render_silhouette(bad, 10, 10); });
  bad = {std::vector<double>(72), std::vector<double>(3)};
  expect_error(ErrorKind::kShape, [&] { render_silhouette(bad, 10, 10); });
}

TEST(MockGenerate, Modes) {
  std::mt19937 rng(3);
  const ImageBuffer crop = refsd::testing::random_image(rng, 32, 32, 3);
  imaging::EdgeMap edges(32, 32);
  for (int i = 4; i < 28; ++i) edges.set(i, 10, true);
  const GenerateRequest req{crop, edges, "a prompt", "neg", 5};

  EXPECT_EQ(MockBackend(nullptr, {GenerateMode::kEcho}).generate(req).image, crop);

  MockBackend flat(nullptr, {GenerateMode::kFlat});
  const ImageBuffer a = flat.generate(req).image;
  EXPECT_EQ(flat.generate(req).image, a);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) ASSERT_EQ(a.at(x, y, 1), a.at(0, 0, 1));
  MockBackend magenta(nullptr, {GenerateMode::kFlat, std::array<std::uint8_t, 3>{255, 0, 255}});
  EXPECT_EQ(magenta.generate(req).image.at(3, 3, 1), 0);

  const ImageBuffer painted = MockBackend(nullptr, {GenerateMode::kEdgePaint}).generate(req).image;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      bool differs = false;
      for (int c = 0; c < 3; ++c) differs |= painted.at(x, y, c) != crop.at(x, y, c);
      // 255 - v == v never holds for integers, so every edge pixel changes.
      ASSERT_EQ(differs, edges.at(x, y)) << x << "," << y;
    }

  GenerateRequest wrong = req;
  wrong.edges = imaging::EdgeMap(31, 32);
  expect_error(ErrorKind::kProtocol, [&] { MockBackend(nullptr).generate(wrong); });
}

TEST(MockDetectPii, ExactLabelMatch) {
  Fixture f;
  MockBackend mock(f.scenes);
  auto r = mock.detect_pii({f.image, {"license plate"}, 0});
  ASSERT_EQ(r.regions.size(), 1u);
  EXPECT_EQ(r.regions[0].mask.support(), (BBox{60, 80, 78, 92}));
  EXPECT_TRUE(mock.detect_pii({f.image, {"mailbox"}, 0}).regions.empty());
  EXPECT_TRUE(mock.detect_pii({f.image, {"License plate"}, 0}).regions.empty());
  EXPECT_EQ(mock.detect_pii({f.image, {"license plate", "street sign"}, 0}).regions.size(), 2u);
}

TEST(MockInpaint, IdentityAndConstant) {
  MockBackend mock(nullptr);
  const ImageBuffer img = gradient_image(30, 20);
  EXPECT_EQ(mock.inpaint({img, SoftMask(30, 20, 0.0f), "p", 0}).image, img);
  const ImageBuffer flat(30, 20, 3, 93);
  EXPECT_EQ(mock.inpaint({flat, SoftMask(30, 20, 1.0f), "p", 0}).image, flat);
}

TEST(MockInpaint, FillEqualsRingMean) {
  MockBackend mock(nullptr);
  const ImageBuffer img = gradient_image(60, 50);
  const BBox rect{20, 15, 35, 30};
  const ImageBuffer out = mock.inpaint({img, refsd::testing::rect_mask(60, 50, rect), "p", 0}).image;
  for (int c = 0; c < 3; ++c) {
    double sum = 0;
    int n = 0;
    for (int y = rect.y0 - 4; y < rect.y1 + 4; ++y)
      for (int x = rect.x0 - 4; x < rect.x1 + 4; ++x)
        if (!rect.contains(x, y)) sum += img.at(x, y, c), ++n;
    const int want = static_cast<int>(std::floor(sum / n + 0.5));
    for (int y = 0; y < 50; ++y)
      for (int x = 0; x < 60; ++x) ASSERT_EQ(out.at(x, y, c), rect.contains(x, y) ? want : img.at(x, y, c));
  }
}

TEST(Wire, RoundTripsAreLossless) {
  std::mt19937 rng(12);
  const ImageBuffer img = refsd::testing::random_image(rng, 17, 13, 3);
  std::vector<float> w(17 * 13);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<float>((rng() % 256) / 255.0);
  const SoftMask mask(17, 13, w);
  imaging::EdgeMap edges(17, 13);
  edges.set(3, 4, true);
  SmplParams params = yaw_params(33.3);
  params.theta[50] = 1.0 / 3.0;

  auto check = [](const auto& message) {
    using T = std::decay_t<decltype(message)>;
    EXPECT_EQ(wire::decode_payload<T>(wire::encode_payload(message)), message);
  };
  check(EstimateRequest{img, 99});
  check(EstimateResponse{{params, params}});
  check(SegmentRequest{img, 3, 1});
  check(SegmentResponse{mask, {1, 2, 3, 4}});
  check(RenderRequest{params, 20, 30, 2});
  check(RenderResponse{img});
  check(GenerateRequest{img, edges, "prompt ü", "neg", 18446744073709551615ULL});
  check(GenerateResponse{img});
  check(DetectPiiRequest{img, {"a", "b"}, 4});
  check(DetectPiiResponse{{{"a", mask}}});
  check(InpaintRequest{img, mask, "background", 5});
  check(InpaintResponse{img});
}

TEST(Wire, EnvelopeAndErrors) {
  const std::string payload = wire::encode_payload(EstimateRequest{ImageBuffer(2, 2, 3), 1});
  const std::string id = wire::request_id(Role::kEstimate, payload);
  EXPECT_EQ(id.rfind("estimate-", 0), 0u);
  EXPECT_EQ(id.size(), std::string("estimate-").size() + 16);
  const auto env = wire::open_envelope(wire::envelope(Role::kEstimate, id, payload));
  EXPECT_EQ(env.request_id, id);
  EXPECT_EQ(env.role, Role::kEstimate);
  expect_error(ErrorKind::kProtocol, [] { wire::open_envelope(R"({"schema":"other","role":"render"})"); });
  expect_error(ErrorKind::kProtocol, [] { wire::open_envelope("not json"); });
  expect_error(ErrorKind::kShape, [] { wire::open_envelope(wire::error_body("shape", "bad")); });
  // Declared dimensions must match the decoded PNG.
  std::string tampered = payload;
  tampered.replace(tampered.find("\"width\":2"), 9, "\"width\":3");
  expect_error(ErrorKind::kProtocol, [&] { wire::decode_payload<EstimateRequest>(tampered); });
}

class ServerTest : public ::testing::Test {
 protected:
  void start(std::string token = {}) {
    server_ = std::make_unique<BackendServer>(std::make_shared<MockBackend>(f_.scenes), token);
    port_ = server_->bind("127.0.0.1", 0);
    thread_ = std::thread([this] { server_->run(); });
    for (int i = 0; i < 200 && !server_->running(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  void TearDown() override {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
  }
  HttpOptions options(std::string token = {}) {
    HttpOptions o;
    for (Role r : kAllRoles) o.endpoints[r] = "http://127.0.0.1:" + std::to_string(port_);
    o.timeout = std::chrono::milliseconds(5000);
    o.retries = 1;
    o.backoff = std::chrono::milliseconds(10);
    o.auth_token = std::move(token);
    return o;
  }

  Fixture f_;
  std::unique_ptr<BackendServer> server_;
  std::thread thread_;
  int port_ = 0;
};

TEST_F(ServerTest, HttpMatchesInProcess) {
  start();
  HttpBackend http(options());
  MockBackend local(f_.scenes);
  EXPECT_EQ(http.estimate({f_.image, 3}), local.estimate({f_.image, 3}));
  EXPECT_EQ(http.segment({f_.image, 1, 3}), local.segment({f_.image, 1, 3}));
  const RenderRequest rr{yaw_params(90), 40, 80, 0};
  EXPECT_EQ(http.render(rr), local.render(rr));
  EXPECT_EQ(http.detect_pii({f_.image, {"license plate"}, 0}), local.detect_pii({f_.image, {"license plate"}, 0}));
  EXPECT_EQ(http.info(Role::kRender).name, kMockName);
  expect_error(ErrorKind::kProtocol, [&] { http.segment({f_.image, 9, 3}); });
}

TEST_F(ServerTest, HealthAndIdenticalBodies) {
  start();
  httplib::Client client("127.0.0.1", port_);
  auto health = client.Get("/v1/healthz");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  const std::string payload = wire::encode_payload(EstimateRequest{f_.image, 4});
  const std::string body = wire::envelope(Role::kEstimate, wire::request_id(Role::kEstimate, payload), payload);
  auto a = client.Post("/v1/estimate", body, "application/json");
  auto b = client.Post("/v1/estimate", body, "application/json");
  ASSERT_TRUE(a && b);
  EXPECT_EQ(a->status, 200);
  EXPECT_EQ(a->body, b->body);
  auto bad = client.Post("/v1/render", body, "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
}

TEST_F(ServerTest, BearerToken) {
  start("s3cret");
  expect_error(ErrorKind::kForbidden, [&] { HttpBackend(options()).estimate({f_.image, 1}); });
  EXPECT_EQ(HttpBackend(options("s3cret")).estimate({f_.image, 1}).subjects.size(), 2u);
}

TEST(HttpBackend, UnreachableRaisesTransportErrorWithStage) {
  HttpOptions o;
  for (Role r : kAllRoles) o.endpoints[r] = "http://127.0.0.1:1";
  o.retries = 2;
  o.backoff = std::chrono::milliseconds(1);
  o.timeout = std::chrono::milliseconds(500);
  HttpBackend http(o);
  try {
    http.render({yaw_params(0), 8, 8, 0});
    FAIL() << "expected transport error";
  } catch (const TransportError& e) {
    EXPECT_EQ(e.stage(), "render");
    EXPECT_NE(std::string(e.what()).find("3 attempts"), std::string::npos);
  }
}

TEST(HttpBackend, RequiresEveryEndpoint) {
  expect_error(ErrorKind::kParameter, [] { HttpBackend(HttpOptions{}); });
}

}  // namespace
}  // namespace refsd::backend
