// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

#include <json.hpp>

#include "refsd/backend.hpp"
#include "refsd/codec.hpp"
#include "refsd/errors.hpp"

namespace refsd::backend {

using nlohmann::json;
using imaging::BBox;
using imaging::EdgeMap;
using imaging::ImageBuffer;
using imaging::SoftMask;

std::string_view to_string(Role role) {
  switch (role) {
    case Role::kEstimate: return "estimate";
    case Role::kSegment: return "segment";
    case Role::kRender: return "render";
    case Role::kGenerate: return "generate";
    case Role::kDetectPii: return "detect_pii";
    case Role::kInpaint: return "inpaint";
  }
  return "unknown";
}

Role parse_role(std::string_view name) {
  for (Role r : kAllRoles) {
    if (to_string(r) == name) return r;
  }
  if (name == "detect-pii") return Role::kDetectPii;
  fail(ErrorKind::kParameter, "unknown backend role '" + std::string(name) + "'");
}

std::string_view endpoint(Role role) {
  switch (role) {
    case Role::kEstimate: return "/v1/estimate";
    case Role::kSegment: return "/v1/segment";
    case Role::kRender: return "/v1/render";
    case Role::kGenerate: return "/v1/generate";
    case Role::kDetectPii: return "/v1/detect-pii";
    case Role::kInpaint: return "/v1/inpaint";
  }
  return "/v1/unknown";
}

namespace wire {

namespace {

template <typename T>
T field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) fail(ErrorKind::kProtocol, std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::kProtocol, std::string("field '") + key + "': " + e.what());
  }
}

const json& object(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_object()) fail(ErrorKind::kProtocol, std::string("missing object '") + key + "'");
  return *it;
}

json image_json(const ImageBuffer& img) {
  return {{"width", img.width()},
          {"height", img.height()},
          {"channels", img.channels()},
          {"png", codec::base64_encode(codec::encode_png(img))}};
}

ImageBuffer image_from(const json& j) {
  if (!j.is_object()) fail(ErrorKind::kProtocol, "image payload must be an object");
  const int w = field<int>(j, "width");
  const int h = field<int>(j, "height");
  const int c = field<int>(j, "channels");
  ImageBuffer img = codec::decode_png(codec::base64_decode(field<std::string>(j, "png")));
  if (img.width() != w || img.height() != h || img.channels() != c) {
    fail(ErrorKind::kProtocol, "image payload decodes to " + std::to_string(img.width()) + "x" +
                                   std::to_string(img.height()) + "x" + std::to_string(img.channels()) +
                                   ", declared " + std::to_string(w) + "x" + std::to_string(h) + "x" +
                                   std::to_string(c));
  }
  return img;
}

json mask_json(const SoftMask& m) { return image_json(imaging::mask_image(m)); }

SoftMask mask_from(const json& j) {
  const ImageBuffer img = image_from(j);
  if (img.channels() != 1) fail(ErrorKind::kProtocol, "mask payload must be single-channel");
  return imaging::mask_from_image(img);
}

json edges_json(const EdgeMap& e) { return image_json(imaging::edge_image(e)); }

EdgeMap edges_from(const json& j) {
  const ImageBuffer img = image_from(j);
  if (img.channels() != 1) fail(ErrorKind::kProtocol, "edge payload must be single-channel");
  EdgeMap e(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) e.set(x, y, img.at(x, y) > 127);
  return e;
}

json box_json(const BBox& b) { return json::array({b.x0, b.y0, b.x1, b.y1}); }

BBox box_from(const json& j) {
  if (!j.is_array() || j.size() != 4) fail(ErrorKind::kProtocol, "box must be [x0, y0, x1, y1]");
  try {
    return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
  } catch (const json::exception& e) {
    fail(ErrorKind::kProtocol, std::string("box: ") + e.what());
  }
}

json params_json(const SmplParams& p) { return {{"theta", p.theta}, {"beta", p.beta}}; }

SmplParams params_from(const json& j) {
  return {field<std::vector<double>>(j, "theta"), field<std::vector<double>>(j, "beta")};
}

json parse(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::kProtocol, std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace

template <>
std::string encode_payload(const EstimateRequest& m) {
  return json{{"image", image_json(m.image)}, {"seed", m.seed}}.dump();
}
template <>
EstimateRequest decode_payload(std::string_view s) {
  const json j = parse(s);
  return {image_from(object(j, "image")), field<std::uint64_t>(j, "seed")};
}
template <>
std::string encode_payload(const EstimateResponse& m) {
  json subjects = json::array();
  for (const SmplParams& p : m.subjects) subjects.push_back(params_json(p));
  return json{{"subjects", subjects}}.dump();
}
template <>
EstimateResponse decode_payload(std::string_view s) {
  const json j = parse(s);
  EstimateResponse r;
  for (const json& p : field<json>(j, "subjects")) r.subjects.push_back(params_from(p));
  return r;
}

template <>
std::string encode_payload(const SegmentRequest& m) {
  return json{{"image", image_json(m.image)}, {"subject_index", m.subject_index}, {"seed", m.seed}}.dump();
}
template <>
SegmentRequest decode_payload(std::string_view s) {
  const json j = parse(s);
  return {image_from(object(j, "image")), field<int>(j, "subject_index"), field<std::uint64_t>(j, "seed")};
}
template <>
std::string encode_payload(const SegmentResponse& m) {
  return json{{"mask", mask_json(m.mask)}, {"box", box_json(m.box)}}.dump();
}
template <>
SegmentResponse decode_payload(std::string_view s) {
  const json j = parse(s);
  return {mask_from(object(j, "mask")), box_from(field<json>(j, "box"))};
}

template <>
std::string encode_payload(const RenderRequest& m) {
  return json{{"params", params_json(m.params)}, {"width", m.width}, {"height", m.height}, {"seed", m.seed}}
      .dump();
}
template <>
RenderRequest decode_payload(std::string_view s) {
  const json j = parse(s);
  return {params_from(object(j, "params")), field<int>(j, "width"), field<int>(j, "height"),
          field<std::uint64_t>(j, "seed")};
}
template <>
std::string encode_payload(const RenderResponse& m) {
  return json{{"image", image_json(m.image)}}.dump();
}
template <>
RenderResponse decode_payload(std::string_view s) {
  return {image_from(object(parse(s), "image"))};
}

template <>
std::string encode_payload(const GenerateRequest& m) {
  return json{{"crop", image_json(m.crop)},
              {"edges", edges_json(m.edges)},
              {"prompt", m.prompt},
              {"negative_prompt", m.negative_prompt},
              {"seed", m.seed}}
      .dump();
}
template <>
GenerateRequest decode_payload(std::string_view s) {
  const json j = parse(s);
  return {image_from(object(j, "crop")), edges_from(object(j, "edges")), field<std::string>(j, "prompt"),
          field<std::string>(j, "negative_prompt"), field<std::uint64_t>(j, "seed")};
}
template <>
std::string encode_payload(const GenerateResponse& m) {
  return json{{"image", image_json(m.image)}}.dump();
}
template <>
GenerateResponse decode_payload(std::string_view s) {
  return {image_from(object(parse(s), "image"))};
}

template <>
std::string encode_payload(const DetectPiiRequest& m) {
  return json{{"image", image_json(m.image)}, {"descriptions", m.descriptions}, {"seed", m.seed}}.dump();
}
template <>
DetectPiiRequest decode_payload(std::string_view s) {
  const json j = parse(s);
  return {image_from(object(j, "image")), field<std::vector<std::string>>(j, "descriptions"),
          field<std::uint64_t>(j, "seed")};
}
template <>
std::string encode_payload(const DetectPiiResponse& m) {
  json regions = json::array();
  for (const PiiRegion& r : m.regions) regions.push_back({{"label", r.label}, {"mask", mask_json(r.mask)}});
  return json{{"regions", regions}}.dump();
}
template <>
DetectPiiResponse decode_payload(std::string_view s) {
  const json j = parse(s);
  DetectPiiResponse r;
  for (const json& region : field<json>(j, "regions")) {
    r.regions.push_back({field<std::string>(region, "label"), mask_from(object(region, "mask"))});
  }
  return r;
}

template <>
std::string encode_payload(const InpaintRequest& m) {
  return json{{"image", image_json(m.image)}, {"mask", mask_json(m.mask)}, {"prompt", m.prompt}, {"seed", m.seed}}
      .dump();
}
template <>
InpaintRequest decode_payload(std::string_view s) {
  const json j = parse(s);
  return {image_from(object(j, "image")), mask_from(object(j, "mask")), field<std::string>(j, "prompt"),
          field<std::uint64_t>(j, "seed")};
}
template <>
std::string encode_payload(const InpaintResponse& m) {
  return json{{"image", image_json(m.image)}}.dump();
}
template <>
InpaintResponse decode_payload(std::string_view s) {
  return {image_from(object(parse(s), "image"))};
}

std::string request_id(Role role, std::string_view payload_json) {
  return std::string(to_string(role)) + "-" + codec::sha256_hex(payload_json).substr(0, 16);
}

std::string envelope(Role role, std::string_view id, std::string_view payload_json,
                     const std::optional<BackendInfo>& backend) {
  json j = {{"schema", kSchema}, {"role", to_string(role)}, {"request_id", id}, {"payload", parse(payload_json)}};
  if (backend) j["backend"] = {{"name", backend->name}, {"version", backend->version}};
  return j.dump();
}

Envelope open_envelope(std::string_view body) {
  const json j = parse(body);
  if (auto err = j.find("error"); err != j.end()) {
    const std::string kind = err->value("kind", "protocol");
    const std::string message = err->value("message", "backend error");
    fail(parse_error_kind(kind), "backend: " + message);
  }
  if (field<std::string>(j, "schema") != kSchema) {
    fail(ErrorKind::kProtocol, "unsupported schema '" + j.value("schema", "") + "'");
  }
  Envelope env{parse_role(field<std::string>(j, "role")), field<std::string>(j, "request_id"),
               object(j, "payload").dump(), std::nullopt};
  if (auto b = j.find("backend"); b != j.end() && b->is_object()) {
    env.backend = BackendInfo{b->value("name", ""), b->value("version", "")};
  }
  return env;
}

std::string error_body(std::string_view kind, std::string_view message, std::string_view id) {
  json j = {{"schema", kSchema}, {"error", {{"kind", kind}, {"message", message}}}};
  if (!id.empty()) j["request_id"] = id;
  return j.dump();
}

}  // namespace wire

namespace {

template <typename Request, typename Fn>
std::string serve(Backend& backend, Role role, const wire::Envelope& env, Fn&& fn) {
  const Request request = wire::decode_payload<Request>(env.payload);
  const auto response = fn(backend, request);
  return wire::envelope(role, env.request_id, wire::encode_payload(response), backend.info(role));
}

}  // namespace

std::string dispatch(Backend& backend, Role role, std::string_view body) {
  const wire::Envelope env = wire::open_envelope(body);
  if (env.role != role) {
    fail(ErrorKind::kProtocol, "envelope role '" + std::string(to_string(env.role)) + "' posted to " +
                                   std::string(endpoint(role)));
  }
  switch (role) {
    case Role::kEstimate:
      return serve<EstimateRequest>(backend, role, env, [](Backend& b, const auto& r) { return b.estimate(r); });
    case Role::kSegment:
      return serve<SegmentRequest>(backend, role, env, [](Backend& b, const auto& r) { return b.segment(r); });
    case Role::kRender:
      return serve<RenderRequest>(backend, role, env, [](Backend& b, const auto& r) { return b.render(r); });
    case Role::kGenerate:
      return serve<GenerateRequest>(backend, role, env, [](Backend& b, const auto& r) { return b.generate(r); });
    case Role::kDetectPii:
      return serve<DetectPiiRequest>(backend, role, env, [](Backend& b, const auto& r) { return b.detect_pii(r); });
    case Role::kInpaint:
      return serve<InpaintRequest>(backend, role, env, [](Backend& b, const auto& r) { return b.inpaint(r); });
  }
  fail(ErrorKind::kProtocol, "unknown role");
}

}  // namespace refsd::backend
