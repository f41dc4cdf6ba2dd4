// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

#include "refsd/refsd.h"

#include <json.hpp>

#include <cctype>
#include <cstring>
#include <sstream>

#include "refsd/annotation.hpp"
#include "refsd/backend.hpp"
#include "refsd/codec.hpp"
#include "refsd/errors.hpp"
#include "refsd/evalkit.hpp"
#include "refsd/pipeline.hpp"

using nlohmann::json;
using refsd::Error;
using refsd::ErrorKind;

struct refsd_image {
  refsd::imaging::ImageBuffer buffer;
};

struct refsd_config {
  refsd::pipeline::PipelineConfig config;
};

struct refsd_backend {
  std::shared_ptr<refsd::backend::Backend> backend;
  std::shared_ptr<refsd::backend::SceneRegistry> scenes;  // mock only
};

struct refsd_pipeline {
  std::unique_ptr<refsd::pipeline::Pipeline> pipeline;
};

struct refsd_result {
  refsd::pipeline::PseudonymizationResult result;
};

struct refsd_mock_server {
  std::unique_ptr<refsd::backend::BackendServer> server;
};

struct refsd_annotation_server {
  std::unique_ptr<refsd::annotation::AnnotationServer> server;
};

namespace {

thread_local std::string last_error;

refsd_status status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParameter: return REFSD_ERR_PARAMETER;
    case ErrorKind::kShape: return REFSD_ERR_SHAPE;
    case ErrorKind::kEmptyCrop: return REFSD_ERR_EMPTY_CROP;
    case ErrorKind::kVocabulary: return REFSD_ERR_VOCABULARY;
    case ErrorKind::kSpec: return REFSD_ERR_SPEC;
    case ErrorKind::kProtocol: return REFSD_ERR_PROTOCOL;
    case ErrorKind::kTransport: return REFSD_ERR_TRANSPORT;
    case ErrorKind::kIo: return REFSD_ERR_IO;
    case ErrorKind::kNotFound: return REFSD_ERR_NOT_FOUND;
    case ErrorKind::kConflict: return REFSD_ERR_CONFLICT;
    case ErrorKind::kValidation: return REFSD_ERR_VALIDATION;
    case ErrorKind::kForbidden: return REFSD_ERR_FORBIDDEN;
    case ErrorKind::kDegenerate: return REFSD_ERR_DEGENERATE;
  }
  return REFSD_ERR_INTERNAL;
}

template <typename F>
refsd_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return REFSD_OK;
  } catch (const Error& e) {
    last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return REFSD_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return REFSD_ERR_INTERNAL;
  }
}

struct NullArgument {};

template <typename... Ps>
void require(const Ps*... ps) {
  if (((ps == nullptr) || ...)) throw NullArgument{};
}

template <typename F>
refsd_status checked(F&& body) {
  try {
    return guarded(std::forward<F>(body));
  } catch (const NullArgument&) {
    last_error = "null argument";
    return REFSD_ERR_INVALID_ARGUMENT;
  }
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* refsd_version(void) { return "1.0.0"; }

const char* refsd_status_name(refsd_status status) {
  switch (status) {
    case REFSD_OK: return "ok";
    case REFSD_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case REFSD_ERR_INTERNAL: return "internal";
    default:
      if (status > REFSD_OK && status <= REFSD_ERR_DEGENERATE) {
        return refsd::to_string(static_cast<ErrorKind>(static_cast<int>(status) - 1));
      }
      return "unknown";
  }
}

const char* refsd_last_error(void) { return last_error.c_str(); }

void refsd_string_free(char* s) { std::free(s); }

refsd_status refsd_image_create(int width, int height, int channels, const uint8_t* pixels, refsd_image** out) {
  return checked([&] {
    require(pixels, out);
    auto img = std::make_unique<refsd_image>();
    img->buffer = refsd::imaging::ImageBuffer(width, height, channels);
    std::memcpy(img->buffer.data().data(), pixels, img->buffer.data().size());
    *out = img.release();
  });
}

refsd_status refsd_image_load(const char* png_path, refsd_image** out) {
  return checked([&] {
    require(png_path, out);
    *out = new refsd_image{refsd::codec::read_png(png_path)};
  });
}

refsd_status refsd_image_save(const refsd_image* image, const char* png_path) {
  return checked([&] {
    require(image, png_path);
    refsd::codec::write_png(png_path, image->buffer);
  });
}

int refsd_image_width(const refsd_image* image) { return image ? image->buffer.width() : 0; }
int refsd_image_height(const refsd_image* image) { return image ? image->buffer.height() : 0; }
int refsd_image_channels(const refsd_image* image) { return image ? image->buffer.channels() : 0; }
const uint8_t* refsd_image_pixels(const refsd_image* image) { return image ? image->buffer.data().data() : nullptr; }

refsd_status refsd_image_hash(const refsd_image* image, char** out) {
  return checked([&] {
    require(image, out);
    *out = dup(refsd::codec::image_hash(image->buffer));
  });
}

void refsd_image_free(refsd_image* image) { delete image; }

refsd_status refsd_config_load(const char* path, int apply_env, refsd_config** out) {
  return checked([&] {
    require(out);
    auto c = std::make_unique<refsd_config>();
    if (path) c->config = refsd::pipeline::load_config(path);
    if (apply_env) refsd::pipeline::apply_env_overrides(c->config, refsd::pipeline::process_env());
    c->config.validate();
    *out = c.release();
  });
}

refsd_status refsd_config_parse(const char* json_text, refsd_config** out) {
  return checked([&] {
    require(json_text, out);
    *out = new refsd_config{refsd::pipeline::parse_config(json_text)};
  });
}

refsd_status refsd_config_set(refsd_config* config, const char* key, const char* value) {
  return checked([&] {
    require(config, key, value);
    std::string name = "REFSD_";
    for (const char* p = key; *p; ++p) {
      name += static_cast<char>(std::toupper(static_cast<unsigned char>(*p == '-' ? '_' : *p)));
    }
    bool used = false;
    refsd::pipeline::PipelineConfig updated = config->config;
    refsd::pipeline::apply_env_overrides(updated, [&](const std::string& n) -> std::optional<std::string> {
      if (n != name) return std::nullopt;
      used = true;
      return std::string(value);
    });
    if (!used) refsd::fail(ErrorKind::kParameter, std::string("unknown config key '") + key + "'");
    updated.validate();
    config->config = std::move(updated);
  });
}

refsd_status refsd_config_to_json(const refsd_config* config, char** out) {
  return checked([&] {
    require(config, out);
    *out = dup(refsd::pipeline::config_to_json(config->config));
  });
}

void refsd_config_free(refsd_config* config) { delete config; }

refsd_status refsd_backend_mock(const char* scene_dir, refsd_backend** out) {
  return checked([&] {
    require(out);
    auto b = std::make_unique<refsd_backend>();
    b->scenes = std::make_shared<refsd::backend::SceneRegistry>();
    if (scene_dir) b->scenes->add_directory(scene_dir);
    b->backend = std::make_shared<refsd::backend::MockBackend>(b->scenes);
    *out = b.release();
  });
}

refsd_status refsd_backend_mock_add_scene_file(refsd_backend* backend, const char* image_path, int* found) {
  return checked([&] {
    require(backend, image_path);
    if (!backend->scenes) refsd::fail(ErrorKind::kParameter, "not a mock backend");
    const bool ok = backend->scenes->add_file(image_path);
    if (found) *found = ok ? 1 : 0;
  });
}

refsd_status refsd_backend_http(const refsd_config* config, refsd_backend** out) {
  return checked([&] {
    require(config, out);
    auto b = std::make_unique<refsd_backend>();
    b->backend = std::make_shared<refsd::backend::HttpBackend>(refsd::pipeline::http_options(config->config));
    *out = b.release();
  });
}

void refsd_backend_free(refsd_backend* backend) { delete backend; }

refsd_status refsd_pipeline_create(const refsd_config* config, const refsd_backend* backend, refsd_pipeline** out) {
  return checked([&] {
    require(config, backend, out);
    auto p = std::make_unique<refsd_pipeline>();
    p->pipeline = std::make_unique<refsd::pipeline::Pipeline>(config->config, backend->backend);
    *out = p.release();
  });
}

refsd_status refsd_pipeline_run(refsd_pipeline* pipeline, const refsd_image* image, const char* image_id,
                                size_t batch_offset, refsd_result** out) {
  return checked([&] {
    require(pipeline, image, out);
    refsd::pipeline::RunOptions options;
    if (image_id) options.image_id = image_id;
    options.batch_offset = batch_offset;
    *out = new refsd_result{pipeline->pipeline->run(image->buffer, options)};
  });
}

void refsd_pipeline_free(refsd_pipeline* pipeline) { delete pipeline; }

refsd_status refsd_result_output(const refsd_result* result, refsd_image** out) {
  return checked([&] {
    require(result, out);
    *out = new refsd_image{result->result.output};
  });
}

refsd_status refsd_result_manifest(const refsd_result* result, char** out) {
  return checked([&] {
    require(result, out);
    *out = dup(result->result.manifest_json);
  });
}

refsd_status refsd_result_output_hash(const refsd_result* result, char** out) {
  return checked([&] {
    require(result, out);
    *out = dup(result->result.output_hash);
  });
}

size_t refsd_result_subject_count(const refsd_result* result) { return result ? result->result.subjects.size() : 0; }

size_t refsd_result_skipped_count(const refsd_result* result) {
  if (!result) return 0;
  size_t n = 0;
  for (const auto& s : result->result.subjects) n += s.skipped ? 1 : 0;
  return n;
}

refsd_status refsd_result_write(const refsd_result* result, const char* dir) {
  return checked([&] {
    require(result, dir);
    refsd::pipeline::write_artifacts(result->result, dir);
  });
}

void refsd_result_free(refsd_result* result) { delete result; }

refsd_status refsd_campaign_create(const char* kind, const char* const* sources, size_t source_count, uint64_t seed,
                                   int annotators_per_image, char** out_json) {
  return checked([&] {
    require(kind, out_json);
    if (source_count > 0) require(sources);
    std::vector<std::string> src;
    for (size_t i = 0; i < source_count; ++i) {
      require(sources[i]);
      src.emplace_back(sources[i]);
    }
    refsd::evalkit::CampaignOptions options;
    if (annotators_per_image > 0) options.annotators_per_image = annotators_per_image;
    const auto spec = refsd::evalkit::build_campaign(refsd::prompt::parse_kind(kind), std::move(src), seed, options);
    *out_json = dup(refsd::evalkit::campaign_to_json(spec));
  });
}

refsd_status refsd_campaign_stats(const char* campaign_json, const char* records_ndjson, const char* group_by,
                                  char** out_csv) {
  return checked([&] {
    require(campaign_json, records_ndjson, group_by, out_csv);
    const auto spec = refsd::evalkit::parse_campaign(campaign_json);
    std::istringstream in(records_ndjson);
    const auto rows = refsd::evalkit::aggregate_scores(spec, refsd::evalkit::read_annotations(in),
                                                       refsd::evalkit::parse_group_by(group_by));
    *out_csv = dup(refsd::evalkit::scores_csv(rows));
  });
}

refsd_status refsd_campaign_alpha(const char* campaign_json, const char* records_ndjson, double* out_alpha) {
  return checked([&] {
    require(campaign_json, records_ndjson, out_alpha);
    const auto spec = refsd::evalkit::parse_campaign(campaign_json);
    std::istringstream in(records_ndjson);
    const auto records = refsd::evalkit::read_annotations(in);
    for (const auto& r : records) {
      if (!spec.find_task(r.task_id)) {
        refsd::fail(ErrorKind::kValidation, "record for unknown task '" + r.task_id + "'");
      }
    }
    *out_alpha = refsd::evalkit::cronbach_alpha(refsd::evalkit::rating_matrix(records, spec.annotators_per_image));
  });
}

refsd_status refsd_eval_map(const char* detections_path, const char* ground_truth_path, char** out_json) {
  return checked([&] {
    require(detections_path, ground_truth_path, out_json);
    const auto r = refsd::evalkit::mean_ap(refsd::evalkit::read_detections(detections_path),
                                           refsd::evalkit::read_ground_truth(ground_truth_path));
    *out_json = dup(json{{"map50", r.map50}, {"map50_95", r.map50_95}, {"ap50", r.ap50}, {"flagged", r.flagged}}.dump());
  });
}

refsd_status refsd_eval_accuracy(const char* predictions_path, char** out_json) {
  return checked([&] {
    require(predictions_path, out_json);
    const auto acc = refsd::evalkit::classification_accuracy(refsd::evalkit::read_predictions(predictions_path));
    *out_json = dup(json(acc).dump());
  });
}

refsd_status refsd_mock_server_create(const refsd_backend* backend, const char* auth_token, refsd_mock_server** out) {
  return checked([&] {
    require(backend, out);
    auto s = std::make_unique<refsd_mock_server>();
    s->server = std::make_unique<refsd::backend::BackendServer>(backend->backend, auth_token ? auth_token : "");
    *out = s.release();
  });
}

refsd_status refsd_mock_server_bind(refsd_mock_server* server, const char* host, int port, int* bound_port) {
  return checked([&] {
    require(server, host);
    const int p = server->server->bind(host, port);
    if (bound_port) *bound_port = p;
  });
}

refsd_status refsd_mock_server_run(refsd_mock_server* server) {
  return checked([&] {
    require(server);
    server->server->run();
  });
}

void refsd_mock_server_stop(refsd_mock_server* server) {
  if (server) server->server->stop();
}

void refsd_mock_server_free(refsd_mock_server* server) { delete server; }

refsd_status refsd_annotation_server_create(const char* config_json, int apply_env, const char* overrides_json,
                                            refsd_annotation_server** out) {
  return checked([&] {
    require(out);
    auto config = refsd::annotation::parse_service_config(config_json ? config_json : "{}");
    if (apply_env) refsd::annotation::apply_env_overrides(config, refsd::pipeline::process_env());
    if (overrides_json) {
      json merged = json::parse(config_json ? config_json : "{}");
      const json env_applied = {{"host", config.host},
                                {"port", config.port},
                                {"data_dir", config.data_dir.string()},
                                {"image_dir", config.image_dir.string()},
                                {"static_dir", config.static_dir.string()},
                                {"auth_token", config.auth_token},
                                {"snapshot_every", config.snapshot_every}};
      merged.update(env_applied);
      json overrides;
      try {
        overrides = json::parse(overrides_json);
      } catch (const json::exception& e) {
        refsd::fail(ErrorKind::kParameter, std::string("overrides are not valid JSON: ") + e.what());
      }
      merged.update(overrides);
      config = refsd::annotation::parse_service_config(merged.dump());
    }
    auto s = std::make_unique<refsd_annotation_server>();
    s->server = std::make_unique<refsd::annotation::AnnotationServer>(config);
    *out = s.release();
  });
}

refsd_status refsd_annotation_server_bind(refsd_annotation_server* server, int* bound_port) {
  return checked([&] {
    require(server);
    const int p = server->server->bind();
    if (bound_port) *bound_port = p;
  });
}

refsd_status refsd_annotation_server_run(refsd_annotation_server* server) {
  return checked([&] {
    require(server);
    server->server->run();
  });
}

void refsd_annotation_server_stop(refsd_annotation_server* server) {
  if (server) server->server->stop();
}

refsd_status refsd_annotation_server_add_campaign(refsd_annotation_server* server, const char* campaign_json,
                                                  char** out_id) {
  return checked([&] {
    require(server, campaign_json, out_id);
    *out_id = dup(server->server->store().create_campaign(refsd::evalkit::parse_campaign(campaign_json)));
  });
}

refsd_status refsd_annotation_server_export(refsd_annotation_server* server, const char* campaign_id,
                                            char** out_ndjson) {
  return checked([&] {
    require(server, campaign_id, out_ndjson);
    *out_ndjson = dup(server->server->store().export_ndjson(campaign_id));
  });
}

void refsd_annotation_server_free(refsd_annotation_server* server) { delete server; }

}  // extern "C"
