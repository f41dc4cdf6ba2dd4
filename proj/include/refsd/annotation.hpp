// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "refsd/evalkit.hpp"
#include "refsd/pipeline.hpp"

namespace refsd::annotation {

/// Pool used when a campaign does not name its annotators: a1 .. a8.
std::vector<std::string> default_pool();

enum class DisplayMode { kAttribute, kPrompt };
std::string_view to_string(DisplayMode mode);
DisplayMode parse_display_mode(std::string_view name);

struct CampaignOptions {
  std::vector<std::string> pool = default_pool();
  DisplayMode display = DisplayMode::kAttribute;
  bool randomize_order = false;  // per-annotator seeded order instead of FIFO
};

struct TaskView {
  std::string campaign_id;
  std::string task_id;
  std::string kind;
  std::vector<std::string> images;  // image ids; served at /images/{id}
  std::string text;                 // attribute or prompt, per display mode
  std::string category;
  std::string level;
  std::size_t position = 0;  // 1-based among this annotator's tasks
  std::size_t total = 0;
};

struct Progress {
  std::size_t tasks = 0;
  std::size_t complete = 0;  // tasks whose every assignee has scored
  std::map<std::string, std::size_t> per_annotator;
};

struct SubmitResult {
  bool stored = false;  // false for an idempotent duplicate
  evalkit::AnnotationRecord record;
};

/// Campaign and score state persisted as an append-only NDJSON event log
/// (fsync before acknowledgement) plus periodic JSON snapshots. Opening a
/// directory replays snapshot + log.
class AnnotationStore {
 public:
  struct Options {
    std::size_t snapshot_every = 1000;  // records between snapshots; 0 disables
    std::filesystem::path image_dir;    // when set, campaign images must exist as {id}.png
  };

  explicit AnnotationStore(std::filesystem::path data_dir);
  AnnotationStore(std::filesystem::path data_dir, Options options);
  ~AnnotationStore();

  AnnotationStore(const AnnotationStore&) = delete;
  AnnotationStore& operator=(const AnnotationStore&) = delete;

  /// Materializes tasks and draws annotators_per_image assignees per task from
  /// the pool by seeded sampling. Throws kValidation for a pool smaller than
  /// annotators_per_image, duplicate pool ids or missing images.
  std::string create_campaign(const evalkit::CampaignSpec& spec, const CampaignOptions& options = {});

  std::vector<std::string> campaign_ids() const;
  const evalkit::CampaignSpec& campaign(const std::string& id) const;

  /// Assignees of a task in sorted order. kNotFound for unknown ids.
  std::vector<std::string> assignees(const std::string& campaign_id, const std::string& task_id) const;

  /// Next unscored assigned task; nullopt when the annotator is done.
  /// kNotFound for an unknown campaign or an annotator outside its pool.
  std::optional<TaskView> next_task(const std::string& annotator_id, const std::string& campaign_id) const;

  /// Durable before returning. kValidation for scores outside 1-5, kNotFound
  /// for unknown campaign / task, kForbidden when the task is not assigned to
  /// the annotator, kConflict when a different score is already stored.
  SubmitResult submit_score(const std::string& campaign_id, const std::string& annotator_id,
                            const std::string& task_id, int score,
                            std::optional<std::string> pair_position = std::nullopt);

  Progress progress(const std::string& campaign_id) const;

  /// Records in submission order.
  std::vector<evalkit::AnnotationRecord> export_records(const std::string& campaign_id) const;
  std::string export_ndjson(const std::string& campaign_id) const;

  /// Writes a snapshot and truncates the log.
  void snapshot();

  std::uint64_t last_sequence() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8800;
  std::filesystem::path data_dir = "annotations";
  std::filesystem::path image_dir;
  std::filesystem::path static_dir;
  std::string auth_token;
  std::size_t snapshot_every = 1000;
};

/// JSON keys: host, port, data_dir, image_dir, static_dir, auth_token,
/// snapshot_every. Unknown keys are errors.
ServiceConfig parse_service_config(std::string_view json_text);
/// REFSD_ANNOTATION_LISTEN (host:port), REFSD_ANNOTATION_DATA_DIR,
/// REFSD_ANNOTATION_IMAGE_DIR, REFSD_ANNOTATION_STATIC_DIR, REFSD_AUTH_TOKEN.
void apply_env_overrides(ServiceConfig& config, const pipeline::EnvLookup& env);

/// REST front end:
///   POST /campaigns, GET /campaigns/{id}/progress, GET /campaigns/{id}/export,
///   GET /annotators/{id}/next?campaign={id}, POST /scores, GET /images/{id},
///   GET /ui-config, GET /healthz, and the static UI under /ui/.
class AnnotationServer {
 public:
  explicit AnnotationServer(ServiceConfig config);
  ~AnnotationServer();

  AnnotationStore& store();

  /// Returns the bound port (an ephemeral one for port 0).
  int bind();
  void run();  // blocks until stop()
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace refsd::annotation
