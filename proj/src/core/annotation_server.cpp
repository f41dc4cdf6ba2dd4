// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

#include <httplib.h>
#include <json.hpp>

#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "listen_control.hpp"
#include "refsd/annotation.hpp"
#include "refsd/errors.hpp"

namespace refsd::annotation {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kJson = "application/json";

int status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kValidation:
    case ErrorKind::kParameter:
    case ErrorKind::kVocabulary:
    case ErrorKind::kSpec:
    case ErrorKind::kShape:
    case ErrorKind::kProtocol: return 400;
    case ErrorKind::kForbidden: return 403;
    case ErrorKind::kNotFound: return 404;
    case ErrorKind::kConflict: return 409;
    default: return 500;
  }
}

void send_error(httplib::Response& res, int status, std::string_view kind, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", {{"kind", kind}, {"message", message}}}}.dump(), kJson);
}

json body_of(const httplib::Request& req) {
  try {
    json j = json::parse(req.body);
    if (!j.is_object()) fail(ErrorKind::kValidation, "request body must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    fail(ErrorKind::kValidation, std::string("malformed JSON body: ") + e.what());
  }
}

template <typename T>
T field(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::kValidation, std::string("field '") + key + "' has the wrong type");
  }
}

template <typename T>
T required(const json& j, const char* key) {
  if (!j.contains(key)) fail(ErrorKind::kValidation, std::string("missing field '") + key + "'");
  return field<T>(j, key, T{});
}

json view_json(const TaskView& v) {
  return {{"campaign_id", v.campaign_id}, {"task_id", v.task_id}, {"kind", v.kind},
          {"images", v.images},           {"text", v.text},       {"category", v.category},
          {"level", v.level},             {"position", v.position}, {"total", v.total}};
}

json progress_json(const std::string& id, const Progress& p, std::size_t required) {
  json per = json::object();
  for (const auto& [a, n] : p.per_annotator) per[a] = n;
  std::size_t scored = 0;
  for (const auto& [a, n] : p.per_annotator) scored += n;
  return {{"campaign_id", id},         {"tasks", p.tasks},   {"complete", p.complete},
          {"annotations", scored},     {"required", required}, {"per_annotator", per}};
}

bool safe_image_id(const std::string& id) {
  static const std::regex allowed(R"([A-Za-z0-9_\-][A-Za-z0-9_.\-]*)");
  return std::regex_match(id, allowed) && id.find("..") == std::string::npos;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

ServiceConfig parse_service_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorKind::kParameter, std::string("service config is not valid JSON: ") + e.what());
  }
  static const std::set<std::string> known = {"host",       "port",       "data_dir",      "image_dir",
                                              "static_dir", "auth_token", "snapshot_every"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) fail(ErrorKind::kParameter, "unknown service config field '" + k + "'");
  }
  ServiceConfig c;
  try {
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    c.data_dir = j.value("data_dir", c.data_dir.string());
    c.image_dir = j.value("image_dir", c.image_dir.string());
    c.static_dir = j.value("static_dir", c.static_dir.string());
    c.auth_token = j.value("auth_token", c.auth_token);
    c.snapshot_every = j.value("snapshot_every", c.snapshot_every);
  } catch (const json::exception& e) {
    fail(ErrorKind::kParameter, std::string("service config: ") + e.what());
  }
  if (c.port < 0 || c.port > 65535) fail(ErrorKind::kParameter, "port must be in [0, 65535]");
  return c;
}

void apply_env_overrides(ServiceConfig& c, const pipeline::EnvLookup& env) {
  if (auto v = env("REFSD_ANNOTATION_LISTEN")) {
    const auto colon = v->rfind(':');
    if (colon == std::string::npos) fail(ErrorKind::kParameter, "REFSD_ANNOTATION_LISTEN must be host:port");
    c.host = v->substr(0, colon);
    try {
      std::size_t used = 0;
      c.port = std::stoi(v->substr(colon + 1), &used);
      if (used != v->size() - colon - 1 || c.port < 0 || c.port > 65535) throw std::invalid_argument("port");
    } catch (const std::exception&) {
      fail(ErrorKind::kParameter, "REFSD_ANNOTATION_LISTEN has an invalid port: '" + *v + "'");
    }
  }
  if (auto v = env("REFSD_ANNOTATION_DATA_DIR")) c.data_dir = *v;
  if (auto v = env("REFSD_ANNOTATION_IMAGE_DIR")) c.image_dir = *v;
  if (auto v = env("REFSD_ANNOTATION_STATIC_DIR")) c.static_dir = *v;
  if (auto v = env("REFSD_AUTH_TOKEN")) c.auth_token = *v;
}

struct AnnotationServer::Impl {
  ServiceConfig config;
  std::unique_ptr<AnnotationStore> store;
  httplib::Server server;
  detail::ListenControl control;

  bool authorized(const httplib::Request& req, httplib::Response& res) const {
    if (config.auth_token.empty() || req.get_header_value("Authorization") == "Bearer " + config.auth_token) {
      return true;
    }
    send_error(res, 401, "unauthorized", "missing or invalid bearer token");
    return false;
  }

  // Wraps an API handler with auth and error mapping.
  template <typename F>
  httplib::Server::Handler api(F handler) {
    return [this, handler](const httplib::Request& req, httplib::Response& res) {
      if (!authorized(req, res)) return;
      try {
        handler(req, res);
      } catch (const Error& e) {
        send_error(res, status_for(e.kind()), to_string(e.kind()), e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
      }
    };
  }

  void create(const httplib::Request& req, httplib::Response& res) {
    const json body = body_of(req);
    evalkit::CampaignSpec spec;
    if (body.contains("spec")) {
      spec = evalkit::parse_campaign(body.at("spec").dump());
    } else {
      const auto kind = prompt::parse_kind(required<std::string>(body, "kind"));
      evalkit::CampaignOptions o;
      o.annotators_per_image = field<int>(body, "annotators_per_image", o.annotators_per_image);
      o.phi_a_combos_per_level = field<std::size_t>(body, "phi_a_combos_per_level", o.phi_a_combos_per_level);
      const auto sources = required<std::vector<std::string>>(body, "sources");
      if (sources.empty()) fail(ErrorKind::kValidation, "sources must not be empty");
      spec = evalkit::build_campaign(kind, sources, field<std::uint64_t>(body, "seed", 0), o);
    }
    CampaignOptions opts;
    opts.pool = field<std::vector<std::string>>(body, "pool", opts.pool);
    opts.display = parse_display_mode(field<std::string>(body, "display_mode", "attribute"));
    opts.randomize_order = field<bool>(body, "randomize_order", false);
    const std::string id = store->create_campaign(spec, opts);
    res.status = 201;
    res.set_content(json{{"campaign_id", id},
                         {"kind", to_string(spec.kind)},
                         {"tasks", spec.tasks.size()},
                         {"required_annotations", spec.required_annotations()},
                         {"pool", opts.pool}}
                        .dump(),
                    kJson);
  }

  void submit(const httplib::Request& req, httplib::Response& res) {
    const json body = body_of(req);
    std::optional<std::string> pos;
    if (body.contains("pair_position") && !body.at("pair_position").is_null()) {
      pos = required<std::string>(body, "pair_position");
    }
    const auto r = store->submit_score(required<std::string>(body, "campaign_id"),
                                       required<std::string>(body, "annotator_id"),
                                       required<std::string>(body, "task_id"), required<int>(body, "score"), pos);
    res.status = r.stored ? 201 : 200;
    json out = json::parse(evalkit::to_ndjson_line(r.record));
    out["stored"] = r.stored;
    res.set_content(out.dump(), kJson);
  }

  void routes() {
    server.Post("/campaigns", api([this](const auto& req, auto& res) { create(req, res); }));
    server.Get("/campaigns", api([this](const auto&, auto& res) {
                 res.set_content(json{{"campaigns", store->campaign_ids()}}.dump(), kJson);
               }));
    server.Get(R"(/campaigns/([^/]+))", api([this](const auto& req, auto& res) {
                 res.set_content(evalkit::campaign_to_json(store->campaign(req.matches[1])), kJson);
               }));
    server.Get(R"(/campaigns/([^/]+)/progress)", api([this](const auto& req, auto& res) {
                 const std::string id = req.matches[1];
                 const auto p = store->progress(id);
                 res.set_content(progress_json(id, p, store->campaign(id).required_annotations()).dump(), kJson);
               }));
    server.Get(R"(/campaigns/([^/]+)/export)", api([this](const auto& req, auto& res) {
                 res.set_content(store->export_ndjson(req.matches[1]), "application/x-ndjson");
               }));
    server.Get(R"(/annotators/([^/]+)/next)", api([this](const auto& req, auto& res) {
                 if (!req.has_param("campaign")) fail(ErrorKind::kValidation, "missing query parameter 'campaign'");
                 const auto v = store->next_task(req.matches[1], req.get_param_value("campaign"));
                 if (!v) {
                   res.status = 204;
                   return;
                 }
                 res.set_content(view_json(*v).dump(), kJson);
               }));
    server.Post("/scores", api([this](const auto& req, auto& res) { submit(req, res); }));
    server.Get(R"(/images/([^/]+))", api([this](const auto& req, auto& res) {
                 const std::string id = req.matches[1];
                 if (!safe_image_id(id)) fail(ErrorKind::kValidation, "invalid image id");
                 if (config.image_dir.empty()) fail(ErrorKind::kNotFound, "no image directory configured");
                 fs::path p = config.image_dir / id;
                 if (p.extension() != ".png") p += ".png";
                 if (!fs::is_regular_file(p)) fail(ErrorKind::kNotFound, "unknown image '" + id + "'");
                 res.set_content(read_file(p), "image/png");
               }));
    server.Get("/ui-config", [this](const httplib::Request&, httplib::Response& res) {
      const json labels = {{"1", "no alignment"},
                           {"2", "weak alignment"},
                           {"3", "partial alignment"},
                           {"4", "strong alignment"},
                           {"5", "perfect alignment"}};
      res.set_content(json{{"schema", "refsd.ui-config.v1"},
                           {"api_base", ""},
                           {"score_min", 1},
                           {"score_max", 5},
                           {"score_labels", labels},
                           {"display_modes", {"attribute", "prompt"}},
                           {"default_display_mode", "attribute"},
                           {"auth_required", !config.auth_token.empty()},
                           {"campaigns", store->campaign_ids()}}
                          .dump(),
                      kJson);
    });
    server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"status":"ok"})", kJson);
    });
    if (!config.static_dir.empty()) {
      if (!fs::is_directory(config.static_dir)) {
        fail(ErrorKind::kParameter, "static_dir " + config.static_dir.string() + " is not a directory");
      }
      server.set_mount_point("/ui", config.static_dir.string());
      server.Get("/", [](const httplib::Request&, httplib::Response& res) { res.set_redirect("/ui/"); });
    }
  }
};

AnnotationServer::AnnotationServer(ServiceConfig config) : impl_(std::make_unique<Impl>()) {
  impl_->config = std::move(config);
  AnnotationStore::Options o;
  o.snapshot_every = impl_->config.snapshot_every;
  o.image_dir = impl_->config.image_dir;
  impl_->store = std::make_unique<AnnotationStore>(impl_->config.data_dir, o);
  impl_->routes();
}

AnnotationServer::~AnnotationServer() { stop(); }

AnnotationStore& AnnotationServer::store() { return *impl_->store; }

int AnnotationServer::bind() {
  const auto& c = impl_->config;
  int bound = c.port;
  if (c.port == 0) {
    bound = impl_->server.bind_to_any_port(c.host);
  } else if (!impl_->server.bind_to_port(c.host, c.port)) {
    bound = -1;
  }
  if (bound < 0) fail(ErrorKind::kIo, "cannot bind " + c.host + ":" + std::to_string(c.port));
  return bound;
}

void AnnotationServer::run() { impl_->control.run(impl_->server); }

void AnnotationServer::stop() {
  if (impl_) impl_->control.stop(impl_->server);
}

}  // namespace refsd::annotation
