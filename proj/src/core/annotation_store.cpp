// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <json.hpp>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <sstream>
#include <unordered_map>

#include "refsd/annotation.hpp"
#include "refsd/errors.hpp"
#include "rng.hpp"

namespace refsd::annotation {

namespace fs = std::filesystem;
using evalkit::AnnotationRecord;
using nlohmann::json;

std::vector<std::string> default_pool() {
  std::vector<std::string> pool;
  for (int i = 1; i <= 8; ++i) pool.push_back("a" + std::to_string(i));
  return pool;
}

std::string_view to_string(DisplayMode mode) { return mode == DisplayMode::kPrompt ? "prompt" : "attribute"; }

DisplayMode parse_display_mode(std::string_view name) {
  if (name == "attribute") return DisplayMode::kAttribute;
  if (name == "prompt") return DisplayMode::kPrompt;
  fail(ErrorKind::kValidation, "display mode must be attribute or prompt, got '" + std::string(name) + "'");
}

namespace {

constexpr const char* kLogName = "events.ndjson";
constexpr const char* kSnapshotName = "snapshot.json";

[[noreturn]] void io_error(const std::string& what) {
  fail(ErrorKind::kIo, what + ": " + std::strerror(errno));
}

void write_all(int fd, std::string_view data, const std::string& what) {
  while (!data.empty()) {
    const ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      io_error("write " + what);
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

void fsync_dir(const fs::path& dir) {
  const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (fd < 0) return;
  ::fsync(fd);
  ::close(fd);
}

json options_json(const CampaignOptions& o) {
  return {{"pool", o.pool}, {"display", to_string(o.display)}, {"randomize_order", o.randomize_order}};
}

CampaignOptions options_from(const json& j) {
  CampaignOptions o;
  o.pool = j.at("pool").get<std::vector<std::string>>();
  o.display = parse_display_mode(j.at("display").get<std::string>());
  o.randomize_order = j.at("randomize_order").get<bool>();
  return o;
}

json record_json(const AnnotationRecord& r) { return json::parse(evalkit::to_ndjson_line(r)); }

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

struct CampaignState {
  std::string id;
  evalkit::CampaignSpec spec;
  CampaignOptions options;
  std::unordered_map<std::string, std::size_t> task_index;
  std::unordered_map<std::string, std::size_t> pool_index;
  std::vector<std::vector<std::size_t>> assignees;              // task -> pool indices, sorted by id
  std::vector<std::vector<std::pair<std::size_t, int>>> scores;  // task -> (pool index, score)
  std::vector<std::vector<std::size_t>> queue;                  // pool index -> task order
  std::vector<AnnotationRecord> records;                         // submission order
};

}  // namespace

struct AnnotationStore::Impl {
  fs::path dir;
  Options options;
  int log_fd = -1;
  std::uint64_t seq = 0;
  std::size_t since_snapshot = 0;
  std::vector<std::unique_ptr<CampaignState>> campaigns;
  std::unordered_map<std::string, CampaignState*> by_id;
  mutable std::shared_mutex mutex;

  CampaignState& find(const std::string& id) const {
    auto it = by_id.find(id);
    if (it == by_id.end()) fail(ErrorKind::kNotFound, "unknown campaign '" + id + "'");
    return *it->second;
  }

  CampaignState& build(const std::string& id, evalkit::CampaignSpec spec, CampaignOptions opts) {
    auto st = std::make_unique<CampaignState>();
    st->id = id;
    st->spec = std::move(spec);
    st->options = std::move(opts);
    const auto& pool = st->options.pool;
    for (std::size_t i = 0; i < pool.size(); ++i) st->pool_index.emplace(pool[i], i);
    const std::size_t n = st->spec.tasks.size();
    const auto k = static_cast<std::size_t>(st->spec.annotators_per_image);
    st->assignees.resize(n);
    st->scores.resize(n);
    st->queue.resize(pool.size());
    for (std::size_t t = 0; t < n; ++t) {
      st->task_index.emplace(st->spec.tasks[t].id, t);
      auto eng = rng::engine(st->spec.seed, rng::mix(rng::stream_id("assign"), t));
      std::vector<std::size_t> pick = rng::sample_without_replacement(eng, pool.size(), k);
      std::sort(pick.begin(), pick.end(), [&](std::size_t a, std::size_t b) { return pool[a] < pool[b]; });
      for (std::size_t a : pick) st->queue[a].push_back(t);
      st->assignees[t] = std::move(pick);
    }
    if (st->options.randomize_order) {
      for (std::size_t a = 0; a < pool.size(); ++a) {
        auto eng = rng::engine(st->spec.seed, rng::mix(rng::stream_id("order"), rng::stream_id(pool[a])));
        auto& q = st->queue[a];
        for (std::size_t i = q.size(); i > 1; --i) std::swap(q[i - 1], q[rng::uniform_index(eng, i)]);
      }
    }
    CampaignState& ref = *st;
    by_id[id] = st.get();
    campaigns.push_back(std::move(st));
    return ref;
  }

  void apply_record(CampaignState& c, const AnnotationRecord& r) {
    auto t = c.task_index.find(r.task_id);
    auto a = c.pool_index.find(r.annotator_id);
    if (t == c.task_index.end() || a == c.pool_index.end()) {
      fail(ErrorKind::kIo, "event log references unknown task or annotator in campaign " + c.id);
    }
    c.scores[t->second].emplace_back(a->second, r.score);
    c.records.push_back(r);
  }

  void apply_event(const json& e) {
    const std::string type = e.at("type").get<std::string>();
    const std::string cid = e.at("campaign_id").get<std::string>();
    if (type == "create") {
      build(cid, evalkit::parse_campaign(e.at("spec").dump()), options_from(e.at("options")));
    } else if (type == "score") {
      apply_record(find(cid), evalkit::parse_annotation(e.at("record").dump()));
    } else {
      fail(ErrorKind::kIo, "unknown event type '" + type + "'");
    }
  }

  void append(json event) {
    event["seq"] = seq + 1;
    const std::string line = event.dump() + "\n";
    write_all(log_fd, line, (dir / kLogName).string());
    if (::fsync(log_fd) != 0) io_error("fsync event log");
    ++seq;
  }

  void load() {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
    std::uint64_t snap_seq = 0;
    if (fs::exists(dir / kSnapshotName)) {
      std::ifstream in(dir / kSnapshotName);
      json snap;
      try {
        snap = json::parse(in);
      } catch (const json::exception& e) {
        fail(ErrorKind::kIo, std::string("corrupt snapshot: ") + e.what());
      }
      snap_seq = snap.at("seq").get<std::uint64_t>();
      for (const json& c : snap.at("campaigns")) {
        CampaignState& st =
            build(c.at("id").get<std::string>(), evalkit::parse_campaign(c.at("spec").dump()), options_from(c.at("options")));
        for (const json& r : c.at("records")) apply_record(st, evalkit::parse_annotation(r.dump()));
      }
      seq = snap_seq;
    }
    const fs::path log = dir / kLogName;
    if (fs::exists(log)) {
      std::ifstream in(log, std::ios::binary);
      std::string line;
      std::uint64_t valid_bytes = 0;
      bool torn = false;
      while (std::getline(in, line)) {
        const bool terminated = !in.eof();
        json e;
        try {
          e = json::parse(line);
        } catch (const json::exception&) {
          if (in.peek() == std::char_traits<char>::eof()) {
            torn = true;
            break;
          }
          fail(ErrorKind::kIo, "corrupt event log line at byte " + std::to_string(valid_bytes));
        }
        if (!terminated) {
          torn = true;
          break;
        }
        valid_bytes += line.size() + 1;
        const std::uint64_t s = e.at("seq").get<std::uint64_t>();
        if (s <= snap_seq) continue;
        apply_event(e);
        seq = s;
        ++since_snapshot;
      }
      if (torn) fs::resize_file(log, valid_bytes);
    }
    log_fd = ::open(log.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (log_fd < 0) io_error("open " + log.string());
    fsync_dir(dir);
  }

  void write_snapshot() {
    json cs = json::array();
    for (const auto& c : campaigns) {
      json records = json::array();
      for (const auto& r : c->records) records.push_back(record_json(r));
      cs.push_back({{"id", c->id},
                    {"options", options_json(c->options)},
                    {"spec", json::parse(evalkit::campaign_to_json(c->spec))},
                    {"records", records}});
    }
    const json snap = {{"schema", "refsd.annotation-snapshot.v1"}, {"seq", seq}, {"campaigns", cs}};
    const fs::path tmp = dir / (std::string(kSnapshotName) + ".tmp");
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) io_error("open " + tmp.string());
    try {
      write_all(fd, snap.dump(), tmp.string());
    } catch (...) {
      ::close(fd);
      throw;
    }
    if (::fsync(fd) != 0) {
      ::close(fd);
      io_error("fsync snapshot");
    }
    ::close(fd);
    std::error_code ec;
    fs::rename(tmp, dir / kSnapshotName, ec);
    if (ec) fail(ErrorKind::kIo, "rename snapshot: " + ec.message());
    fsync_dir(dir);
    if (::ftruncate(log_fd, 0) != 0) io_error("truncate event log");
    ::fsync(log_fd);
    since_snapshot = 0;
  }
};

AnnotationStore::AnnotationStore(fs::path data_dir) : AnnotationStore(std::move(data_dir), Options{}) {}

AnnotationStore::AnnotationStore(fs::path data_dir, Options options) : impl_(std::make_unique<Impl>()) {
  impl_->dir = std::move(data_dir);
  impl_->options = std::move(options);
  impl_->load();
}

AnnotationStore::~AnnotationStore() {
  if (impl_ && impl_->log_fd >= 0) ::close(impl_->log_fd);
}

std::string AnnotationStore::create_campaign(const evalkit::CampaignSpec& spec, const CampaignOptions& options) {
  const auto k = static_cast<std::size_t>(spec.annotators_per_image);
  if (spec.annotators_per_image < 1) fail(ErrorKind::kValidation, "annotators_per_image must be >= 1");
  if (options.pool.size() < k) {
    fail(ErrorKind::kValidation, "annotator pool of " + std::to_string(options.pool.size()) + " cannot supply " +
                                     std::to_string(k) + " distinct annotators per task");
  }
  if (std::set<std::string>(options.pool.begin(), options.pool.end()).size() != options.pool.size()) {
    fail(ErrorKind::kValidation, "annotator pool has duplicate ids");
  }
  for (const auto& a : options.pool) {
    if (a.empty()) fail(ErrorKind::kValidation, "annotator pool has an empty id");
  }
  if (spec.tasks.empty()) fail(ErrorKind::kValidation, "campaign has no tasks");
  if (!impl_->options.image_dir.empty()) {
    std::set<std::string> missing;
    for (const auto& t : spec.tasks) {
      for (const auto& img : t.images) {
        if (!fs::exists(impl_->options.image_dir / (img + ".png"))) missing.insert(img);
      }
    }
    if (!missing.empty()) {
      std::string list;
      std::size_t shown = 0;
      for (const auto& m : missing) {
        if (shown++ == 20) {
          list += ", ... (" + std::to_string(missing.size()) + " total)";
          break;
        }
        list += (list.empty() ? "" : ", ") + m;
      }
      fail(ErrorKind::kValidation, "missing images: " + list);
    }
  }
  std::unique_lock lock(impl_->mutex);
  std::ostringstream id;
  id << 'c' << std::setw(4) << std::setfill('0') << impl_->campaigns.size() + 1;
  impl_->append({{"type", "create"},
                 {"campaign_id", id.str()},
                 {"options", options_json(options)},
                 {"spec", json::parse(evalkit::campaign_to_json(spec))}});
  impl_->build(id.str(), spec, options);
  return id.str();
}

std::vector<std::string> AnnotationStore::campaign_ids() const {
  std::shared_lock lock(impl_->mutex);
  std::vector<std::string> ids;
  for (const auto& c : impl_->campaigns) ids.push_back(c->id);
  return ids;
}

const evalkit::CampaignSpec& AnnotationStore::campaign(const std::string& id) const {
  std::shared_lock lock(impl_->mutex);
  return impl_->find(id).spec;
}

std::vector<std::string> AnnotationStore::assignees(const std::string& campaign_id, const std::string& task_id) const {
  std::shared_lock lock(impl_->mutex);
  const CampaignState& c = impl_->find(campaign_id);
  auto t = c.task_index.find(task_id);
  if (t == c.task_index.end()) fail(ErrorKind::kNotFound, "unknown task '" + task_id + "'");
  std::vector<std::string> out;
  for (std::size_t a : c.assignees[t->second]) out.push_back(c.options.pool[a]);
  return out;
}

std::optional<TaskView> AnnotationStore::next_task(const std::string& annotator_id,
                                                   const std::string& campaign_id) const {
  std::shared_lock lock(impl_->mutex);
  const CampaignState& c = impl_->find(campaign_id);
  auto a = c.pool_index.find(annotator_id);
  if (a == c.pool_index.end()) {
    fail(ErrorKind::kNotFound, "annotator '" + annotator_id + "' is not in campaign " + campaign_id);
  }
  const auto& q = c.queue[a->second];
  for (std::size_t i = 0; i < q.size(); ++i) {
    const std::size_t t = q[i];
    const auto& sc = c.scores[t];
    if (std::any_of(sc.begin(), sc.end(), [&](const auto& p) { return p.first == a->second; })) continue;
    const evalkit::Task& task = c.spec.tasks[t];
    const evalkit::CampaignPrompt& p = c.spec.prompts[task.prompt_index];
    TaskView v;
    v.campaign_id = c.id;
    v.task_id = task.id;
    v.kind = std::string(to_string(c.spec.kind));
    v.images = task.images;
    v.text = c.options.display == DisplayMode::kPrompt ? task.text : p.attribute;
    v.category = p.category;
    v.level = std::string(prompt::to_string(task.level));
    v.position = i + 1;
    v.total = q.size();
    return v;
  }
  return std::nullopt;
}

SubmitResult AnnotationStore::submit_score(const std::string& campaign_id, const std::string& annotator_id,
                                           const std::string& task_id, int score,
                                           std::optional<std::string> pair_position) {
  std::unique_lock lock(impl_->mutex);
  CampaignState& c = impl_->find(campaign_id);
  auto t = c.task_index.find(task_id);
  if (t == c.task_index.end()) fail(ErrorKind::kNotFound, "unknown task '" + task_id + "' in " + campaign_id);
  AnnotationRecord r{task_id, annotator_id, score, now_ms(), std::move(pair_position)};
  evalkit::validate(r);
  auto a = c.pool_index.find(annotator_id);
  const auto& assigned = c.assignees[t->second];
  if (a == c.pool_index.end() || std::find(assigned.begin(), assigned.end(), a->second) == assigned.end()) {
    fail(ErrorKind::kForbidden, "task " + task_id + " is not assigned to '" + annotator_id + "'");
  }
  for (const auto& [who, existing] : c.scores[t->second]) {
    if (who != a->second) continue;
    if (existing != score) {
      fail(ErrorKind::kConflict, "'" + annotator_id + "' already scored " + task_id + " with " +
                                     std::to_string(existing));
    }
    for (const auto& rec : c.records) {
      if (rec.task_id == task_id && rec.annotator_id == annotator_id) return {false, rec};
    }
  }
  impl_->append({{"type", "score"}, {"campaign_id", campaign_id}, {"record", record_json(r)}});
  impl_->apply_record(c, r);
  if (impl_->options.snapshot_every > 0 && ++impl_->since_snapshot >= impl_->options.snapshot_every) {
    impl_->write_snapshot();
  }
  return {true, r};
}

Progress AnnotationStore::progress(const std::string& campaign_id) const {
  std::shared_lock lock(impl_->mutex);
  const CampaignState& c = impl_->find(campaign_id);
  Progress p;
  p.tasks = c.spec.tasks.size();
  for (const auto& a : c.options.pool) p.per_annotator[a] = 0;
  for (std::size_t t = 0; t < c.scores.size(); ++t) {
    if (c.scores[t].size() == c.assignees[t].size()) ++p.complete;
  }
  for (const auto& r : c.records) ++p.per_annotator[r.annotator_id];
  return p;
}

std::vector<AnnotationRecord> AnnotationStore::export_records(const std::string& campaign_id) const {
  std::shared_lock lock(impl_->mutex);
  return impl_->find(campaign_id).records;
}

std::string AnnotationStore::export_ndjson(const std::string& campaign_id) const {
  std::ostringstream os;
  evalkit::write_annotations(os, export_records(campaign_id));
  return os.str();
}

void AnnotationStore::snapshot() {
  std::unique_lock lock(impl_->mutex);
  impl_->write_snapshot();
}

std::uint64_t AnnotationStore::last_sequence() const {
  std::shared_lock lock(impl_->mutex);
  return impl_->seq;
}

}  // namespace refsd::annotation
