/* Copyright 2026 The RefSD Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the RefSD engine. All objects are opaque handles released
 * with their *_free function. Functions return REFSD_OK or an error status;
 * refsd_last_error() then describes the failure for the calling thread.
 * Strings returned through char** are heap copies released with
 * refsd_string_free().
 */
#ifndef REFSD_REFSD_H_
#define REFSD_REFSD_H_

#include <stddef.h>
#include <stdint.h>

#if defined(REFSD_BUILDING_LIBRARY)
#define REFSD_API __attribute__((visibility("default")))
#else
#define REFSD_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum refsd_status {
  REFSD_OK = 0,
  REFSD_ERR_PARAMETER = 1,
  REFSD_ERR_SHAPE = 2,
  REFSD_ERR_EMPTY_CROP = 3,
  REFSD_ERR_VOCABULARY = 4,
  REFSD_ERR_SPEC = 5,
  REFSD_ERR_PROTOCOL = 6,
  REFSD_ERR_TRANSPORT = 7,
  REFSD_ERR_IO = 8,
  REFSD_ERR_NOT_FOUND = 9,
  REFSD_ERR_CONFLICT = 10,
  REFSD_ERR_VALIDATION = 11,
  REFSD_ERR_FORBIDDEN = 12,
  REFSD_ERR_DEGENERATE = 13,
  REFSD_ERR_INVALID_ARGUMENT = 14, /* null handle or pointer */
  REFSD_ERR_INTERNAL = 15
} refsd_status;

typedef struct refsd_image refsd_image;
typedef struct refsd_config refsd_config;
typedef struct refsd_backend refsd_backend;
typedef struct refsd_pipeline refsd_pipeline;
typedef struct refsd_result refsd_result;
typedef struct refsd_mock_server refsd_mock_server;
typedef struct refsd_annotation_server refsd_annotation_server;

REFSD_API const char* refsd_version(void);
REFSD_API const char* refsd_status_name(refsd_status status);
/* Message of the last failed call on this thread; "" when none. */
REFSD_API const char* refsd_last_error(void);
REFSD_API void refsd_string_free(char* s);

/* ---- images ------------------------------------------------------------ */

REFSD_API refsd_status refsd_image_create(int width, int height, int channels, const uint8_t* pixels,
                                          refsd_image** out);
REFSD_API refsd_status refsd_image_load(const char* png_path, refsd_image** out);
REFSD_API refsd_status refsd_image_save(const refsd_image* image, const char* png_path);
REFSD_API int refsd_image_width(const refsd_image* image);
REFSD_API int refsd_image_height(const refsd_image* image);
REFSD_API int refsd_image_channels(const refsd_image* image);
REFSD_API const uint8_t* refsd_image_pixels(const refsd_image* image);
/* Lowercase hex sha256 over dimensions and pixels. */
REFSD_API refsd_status refsd_image_hash(const refsd_image* image, char** out);
REFSD_API void refsd_image_free(refsd_image* image);

/* ---- configuration ----------------------------------------------------- */

/* Defaults, then the JSON file at `path` (may be NULL), then REFSD_*
 * environment variables when `apply_env` is nonzero. */
REFSD_API refsd_status refsd_config_load(const char* path, int apply_env, refsd_config** out);
REFSD_API refsd_status refsd_config_parse(const char* json_text, refsd_config** out);
/* Overrides one field. Keys are the environment variable names without the
 * REFSD_ prefix, case-insensitive: seed, feather_sigma, crop_pad_fraction,
 * generator_resolution, max_concurrency, timeout_s, retries, auth_token,
 * pii_descriptions, prompt_strategy, prompt_level, backend_url,
 * backend_<role>_url. */
REFSD_API refsd_status refsd_config_set(refsd_config* config, const char* key, const char* value);
/* Snapshot JSON with the auth token redacted. */
REFSD_API refsd_status refsd_config_to_json(const refsd_config* config, char** out);
REFSD_API void refsd_config_free(refsd_config* config);

/* ---- backends ---------------------------------------------------------- */

/* Deterministic mock. Scenes are read from `<stem>.scene.json` sidecars of
 * every PNG under `scene_dir` (may be NULL for none); more can be added. */
REFSD_API refsd_status refsd_backend_mock(const char* scene_dir, refsd_backend** out);
REFSD_API refsd_status refsd_backend_mock_add_scene_file(refsd_backend* backend, const char* image_path,
                                                         int* found);
/* HTTP client using the config's backend URLs, timeout, retries and token. */
REFSD_API refsd_status refsd_backend_http(const refsd_config* config, refsd_backend** out);
REFSD_API void refsd_backend_free(refsd_backend* backend);

/* ---- pipeline ---------------------------------------------------------- */

REFSD_API refsd_status refsd_pipeline_create(const refsd_config* config, const refsd_backend* backend,
                                             refsd_pipeline** out);
/* `image_id` may be NULL ("image"). `batch_offset` continues prompt
 * strategies across a batch. */
REFSD_API refsd_status refsd_pipeline_run(refsd_pipeline* pipeline, const refsd_image* image, const char* image_id,
                                          size_t batch_offset, refsd_result** out);
REFSD_API void refsd_pipeline_free(refsd_pipeline* pipeline);

REFSD_API refsd_status refsd_result_output(const refsd_result* result, refsd_image** out);
REFSD_API refsd_status refsd_result_manifest(const refsd_result* result, char** out);
REFSD_API refsd_status refsd_result_output_hash(const refsd_result* result, char** out);
REFSD_API size_t refsd_result_subject_count(const refsd_result* result);
REFSD_API size_t refsd_result_skipped_count(const refsd_result* result);
/* final.png, subjects/{i}/..., manifest.json under `dir`. */
REFSD_API refsd_status refsd_result_write(const refsd_result* result, const char* dir);
REFSD_API void refsd_result_free(refsd_result* result);

/* ---- evaluation -------------------------------------------------------- */

/* Campaign manifest JSON. `kind` is phi_A..phi_D; annotators_per_image <= 0
 * selects 3. */
REFSD_API refsd_status refsd_campaign_create(const char* kind, const char* const* sources, size_t source_count,
                                             uint64_t seed, int annotators_per_image, char** out_json);
/* Mean/std CSV (group,mean,std,count,single) for NDJSON records against a
 * campaign manifest; group_by is attribute, category or level. */
REFSD_API refsd_status refsd_campaign_stats(const char* campaign_json, const char* records_ndjson,
                                            const char* group_by, char** out_csv);
/* Cronbach alpha over tasks with a full rater set. */
REFSD_API refsd_status refsd_campaign_alpha(const char* campaign_json, const char* records_ndjson,
                                            double* out_alpha);
/* JSON report {map50, map50_95, ap50: {...}, flagged: [...]} for NDJSON files. */
REFSD_API refsd_status refsd_eval_map(const char* detections_path, const char* ground_truth_path, char** out_json);
/* JSON report {category: accuracy} for an NDJSON prediction file. */
REFSD_API refsd_status refsd_eval_accuracy(const char* predictions_path, char** out_json);

/* ---- servers ----------------------------------------------------------- */

REFSD_API refsd_status refsd_mock_server_create(const refsd_backend* backend, const char* auth_token,
                                                refsd_mock_server** out);
/* Port 0 picks a free port; the bound port is stored in *bound_port. */
REFSD_API refsd_status refsd_mock_server_bind(refsd_mock_server* server, const char* host, int port,
                                              int* bound_port);
/* Blocks until refsd_mock_server_stop (safe from another thread). */
REFSD_API refsd_status refsd_mock_server_run(refsd_mock_server* server);
REFSD_API void refsd_mock_server_stop(refsd_mock_server* server);
REFSD_API void refsd_mock_server_free(refsd_mock_server* server);

/* Service config: JSON text (may be NULL for defaults), then REFSD_ANNOTATION_*
 * environment overrides when `apply_env` is nonzero, then `overrides_json`
 * (may be NULL) with the same keys as the config document. */
REFSD_API refsd_status refsd_annotation_server_create(const char* config_json, int apply_env,
                                                      const char* overrides_json, refsd_annotation_server** out);
REFSD_API refsd_status refsd_annotation_server_bind(refsd_annotation_server* server, int* bound_port);
REFSD_API refsd_status refsd_annotation_server_run(refsd_annotation_server* server);
REFSD_API void refsd_annotation_server_stop(refsd_annotation_server* server);
/* Campaign id of a new campaign built from a manifest JSON. */
REFSD_API refsd_status refsd_annotation_server_add_campaign(refsd_annotation_server* server,
                                                            const char* campaign_json, char** out_id);
REFSD_API refsd_status refsd_annotation_server_export(refsd_annotation_server* server, const char* campaign_id,
                                                      char** out_ndjson);
REFSD_API void refsd_annotation_server_free(refsd_annotation_server* server);

#ifdef __cplusplus
}
#endif

#endif /* REFSD_REFSD_H_ */
