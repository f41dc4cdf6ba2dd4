// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <thread>

#include "listen_control.hpp"
#include "refsd/backend.hpp"
#include "refsd/errors.hpp"

namespace refsd::backend {

using nlohmann::json;

namespace {

int status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kProtocol:
    case ErrorKind::kShape:
    case ErrorKind::kParameter:
    case ErrorKind::kVocabulary:
    case ErrorKind::kSpec:
    case ErrorKind::kEmptyCrop: return 400;
    case ErrorKind::kForbidden: return 401;
    default: return 500;
  }
}

}  // namespace

HttpBackend::HttpBackend(HttpOptions options) : options_(std::move(options)) {
  for (Role r : kAllRoles) {
    if (!options_.endpoints.count(r)) {
      fail(ErrorKind::kParameter, "no endpoint configured for backend role " + std::string(to_string(r)));
    }
  }
  if (options_.retries < 0) fail(ErrorKind::kParameter, "retries must be >= 0");
}

std::string HttpBackend::call(Role role, const std::string& payload) {
  const std::string stage(to_string(role));
  const std::string id = wire::request_id(role, payload);
  const std::string body = wire::envelope(role, id, payload);
  std::string last_error;
  for (int attempt = 0; attempt <= options_.retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(options_.backoff * (1 << (attempt - 1)));
    httplib::Client client(options_.endpoints.at(role));
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (!options_.auth_token.empty()) headers.emplace("Authorization", "Bearer " + options_.auth_token);
    auto res = client.Post(std::string(endpoint(role)), headers, body, std::string(kContentType));
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      wire::open_envelope(res->body);  // throws the reported error
      fail(ErrorKind::kProtocol, "backend answered HTTP " + std::to_string(res->status));
    }
    wire::Envelope env = wire::open_envelope(res->body);
    if (env.request_id != id) {
      fail(ErrorKind::kProtocol, "response request id '" + env.request_id + "' does not echo '" + id + "'");
    }
    if (env.role != role) fail(ErrorKind::kProtocol, "response carries role " + std::string(to_string(env.role)));
    if (env.backend) {
      std::lock_guard lock(info_mutex_);
      info_[role] = *env.backend;
    }
    return std::move(env.payload);
  }
  throw TransportError(stage, "giving up after " + std::to_string(options_.retries + 1) +
                                  " attempts to " + options_.endpoints.at(role) + ": " + last_error);
}

template <typename Response, typename Request>
Response HttpBackend::roundtrip(Role role, const Request& request) {
  return wire::decode_payload<Response>(call(role, wire::encode_payload(request)));
}

EstimateResponse HttpBackend::estimate(const EstimateRequest& r) {
  return roundtrip<EstimateResponse>(Role::kEstimate, r);
}
SegmentResponse HttpBackend::segment(const SegmentRequest& r) { return roundtrip<SegmentResponse>(Role::kSegment, r); }
RenderResponse HttpBackend::render(const RenderRequest& r) { return roundtrip<RenderResponse>(Role::kRender, r); }
GenerateResponse HttpBackend::generate(const GenerateRequest& r) {
  return roundtrip<GenerateResponse>(Role::kGenerate, r);
}
DetectPiiResponse HttpBackend::detect_pii(const DetectPiiRequest& r) {
  return roundtrip<DetectPiiResponse>(Role::kDetectPii, r);
}
InpaintResponse HttpBackend::inpaint(const InpaintRequest& r) { return roundtrip<InpaintResponse>(Role::kInpaint, r); }

BackendInfo HttpBackend::info(Role role) {
  {
    std::lock_guard lock(info_mutex_);
    if (auto it = info_.find(role); it != info_.end()) return it->second;
  }
  httplib::Client client(options_.endpoints.at(role));
  client.set_connection_timeout(5, 0);
  client.set_read_timeout(5, 0);
  httplib::Headers headers;
  if (!options_.auth_token.empty()) headers.emplace("Authorization", "Bearer " + options_.auth_token);
  auto res = client.Get(std::string(kHealthPath), headers);
  if (!res || res->status != 200) {
    throw TransportError(std::string(to_string(role)), "health check failed for " + options_.endpoints.at(role));
  }
  BackendInfo info;
  try {
    const json j = json::parse(res->body);
    info.name = j.value("name", "");
    info.version = j.contains("roles") ? j["roles"].value(std::string(to_string(role)), j.value("version", ""))
                                       : j.value("version", "");
  } catch (const json::exception& e) {
    fail(ErrorKind::kProtocol, std::string("health payload: ") + e.what());
  }
  std::lock_guard lock(info_mutex_);
  info_[role] = info;
  return info;
}

struct BackendServer::Impl {
  std::shared_ptr<Backend> backend;
  std::string token;
  httplib::Server server;
  detail::ListenControl control;
  std::atomic<bool> running{false};

  bool authorized(const httplib::Request& req, httplib::Response& res) const {
    if (token.empty()) return true;
    if (req.get_header_value("Authorization") == "Bearer " + token) return true;
    res.status = 401;
    res.set_content(wire::error_body(to_string(ErrorKind::kForbidden), "missing or invalid bearer token"),
                    std::string(kContentType));
    return false;
  }
};

BackendServer::BackendServer(std::shared_ptr<Backend> backend, std::string auth_token)
    : impl_(std::make_unique<Impl>()) {
  impl_->backend = std::move(backend);
  impl_->token = std::move(auth_token);
  Impl* impl = impl_.get();
  for (Role role : kAllRoles) {
    impl->server.Post(std::string(endpoint(role)), [impl, role](const httplib::Request& req, httplib::Response& res) {
      if (!impl->authorized(req, res)) return;
      try {
        res.set_content(dispatch(*impl->backend, role, req.body), std::string(kContentType));
      } catch (const Error& e) {
        res.status = status_for(e.kind());
        res.set_content(wire::error_body(to_string(e.kind()), e.what()), std::string(kContentType));
      } catch (const std::exception& e) {
        res.status = 500;
        res.set_content(wire::error_body("internal", e.what()), std::string(kContentType));
      }
    });
  }
  impl->server.Get(std::string(kHealthPath), [impl](const httplib::Request& req, httplib::Response& res) {
    if (!impl->authorized(req, res)) return;
    json roles = json::object();
    BackendInfo first;
    for (Role role : kAllRoles) {
      const BackendInfo info = impl->backend->info(role);
      if (first.name.empty()) first = info;
      roles[std::string(to_string(role))] = info.version;
    }
    res.set_content(json{{"status", "ok"},
                         {"schema", kSchema},
                         {"name", first.name},
                         {"version", first.version},
                         {"roles", roles}}
                        .dump(),
                    std::string(kContentType));
  });
}

BackendServer::~BackendServer() { stop(); }

int BackendServer::bind(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) fail(ErrorKind::kIo, "cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void BackendServer::run() {
  impl_->running = true;
  impl_->control.run(impl_->server);
  impl_->running = false;
}

void BackendServer::stop() {
  if (impl_) impl_->control.stop(impl_->server);
}

bool BackendServer::running() const { return impl_->running && impl_->server.is_running(); }

}  // namespace refsd::backend
