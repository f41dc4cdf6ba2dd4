// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

// refsd command-line front end. Links only the C API.

#include <glob.h>
#include <pthread.h>
#include <signal.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "refsd/refsd.h"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitUsage = 2;

// Failure of a C call; carries the status name and message.
struct CallError : std::runtime_error {
  refsd_status status;
  CallError(refsd_status s, const std::string& what)
      : std::runtime_error(std::string(refsd_status_name(s)) + ": " + what), status(s) {}
};

void check(refsd_status s) {
  if (s != REFSD_OK) throw CallError(s, refsd_last_error());
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// RAII holders for C handles and strings.
template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
};
using Config = Handle<refsd_config, refsd_config_free>;
using Backend = Handle<refsd_backend, refsd_backend_free>;
using Pipeline = Handle<refsd_pipeline, refsd_pipeline_free>;
using Image = Handle<refsd_image, refsd_image_free>;
using Result = Handle<refsd_result, refsd_result_free>;
using MockServer = Handle<refsd_mock_server, refsd_mock_server_free>;
using AnnotationServer = Handle<refsd_annotation_server, refsd_annotation_server_free>;

struct CString {
  char* p = nullptr;
  ~CString() { refsd_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
    return;
  }
  if (fs::path(out_path).has_parent_path()) fs::create_directories(fs::path(out_path).parent_path());
  std::ofstream out(out_path, std::ios::binary);
  out << text;
  if (!out) throw CallError(REFSD_ERR_IO, "cannot write " + out_path);
}

// Files, directories (their *.png) and glob patterns, sorted and deduplicated.
std::vector<fs::path> expand_inputs(const std::vector<std::string>& args) {
  std::set<fs::path> found;
  for (const auto& a : args) {
    if (fs::is_directory(a)) {
      for (const auto& e : fs::directory_iterator(a)) {
        if (e.is_regular_file() && e.path().extension() == ".png") found.insert(e.path());
      }
      continue;
    }
    glob_t g{};
    if (::glob(a.c_str(), GLOB_TILDE, nullptr, &g) == 0) {
      for (std::size_t i = 0; i < g.gl_pathc; ++i) {
        if (fs::is_regular_file(g.gl_pathv[i])) found.insert(g.gl_pathv[i]);
      }
    }
    globfree(&g);
  }
  return {found.begin(), found.end()};
}

// Blocks SIGINT/SIGTERM in every thread; a watcher thread turns them into stop().
class SignalStop {
 public:
  SignalStop() {
    sigemptyset(&set_);
    sigaddset(&set_, SIGINT);
    sigaddset(&set_, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set_, nullptr);
  }

  template <typename F>
  void watch(F on_signal) {
    watcher_ = std::thread([this, on_signal] {
      int sig = 0;
      sigwait(&set_, &sig);
      if (!done_) {
        std::cerr << "received " << (sig == SIGTERM ? "SIGTERM" : "SIGINT") << ", shutting down\n";
        on_signal();
      }
    });
  }

  ~SignalStop() {
    if (watcher_.joinable()) {
      done_ = true;
      pthread_kill(watcher_.native_handle(), SIGTERM);
      watcher_.join();
    }
  }

 private:
  sigset_t set_{};
  std::thread watcher_;
  std::atomic<bool> done_{false};
};

// ---- pseudonymize ----------------------------------------------------------

struct PseudonymizeArgs {
  std::vector<std::string> inputs;
  std::string config;
  std::string out = "out";
  bool mock = false;
  std::string scenes;
  int jobs = 1;
  bool fail_fast = false;
  std::optional<int> max_concurrency;
  std::optional<int> generator_resolution;
  std::optional<double> feather_sigma;
  std::string backend_url;
  std::vector<std::string> pii;
  std::string strategy;
  std::string level;
};

int cmd_pseudonymize(const PseudonymizeArgs& a, std::optional<std::uint64_t> seed) {
  const auto inputs = expand_inputs(a.inputs);
  if (inputs.empty()) {
    std::string joined;
    for (const auto& i : a.inputs) joined += (joined.empty() ? "" : " ") + i;
    throw UsageError("no input images match '" + joined + "'");
  }
  if (a.jobs < 1) throw UsageError("--jobs must be >= 1");

  Config config;
  try {
    check(refsd_config_load(a.config.empty() ? nullptr : a.config.c_str(), 1, &config.p));
    auto set = [&](const char* key, const std::string& value) { check(refsd_config_set(config.p, key, value.c_str())); };
    if (seed) set("seed", std::to_string(*seed));
    if (a.max_concurrency) set("max_concurrency", std::to_string(*a.max_concurrency));
    if (a.generator_resolution) set("generator_resolution", std::to_string(*a.generator_resolution));
    if (a.feather_sigma) set("feather_sigma", std::to_string(*a.feather_sigma));
    if (!a.backend_url.empty()) set("backend_url", a.backend_url);
    if (!a.pii.empty()) {
      std::string joined;
      for (const auto& p : a.pii) joined += (joined.empty() ? "" : ",") + p;
      set("pii_descriptions", joined);
    }
    if (!a.strategy.empty()) set("prompt_strategy", a.strategy);
    if (!a.level.empty()) set("prompt_level", a.level);
  } catch (const CallError& e) {
    throw UsageError(std::string("configuration: ") + e.what());
  }

  Backend backend;
  if (a.mock) {
    check(refsd_backend_mock(a.scenes.empty() ? nullptr : a.scenes.c_str(), &backend.p));
    for (const auto& p : inputs) check(refsd_backend_mock_add_scene_file(backend.p, p.c_str(), nullptr));
  } else {
    check(refsd_backend_http(config.p, &backend.p));
  }
  Pipeline pipeline;
  check(refsd_pipeline_create(config.p, backend.p, &pipeline.p));

  std::mutex io;
  std::vector<std::string> failures;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  auto worker = [&] {
    for (std::size_t i = next++; i < inputs.size() && !abort; i = next++) {
      const fs::path& path = inputs[i];
      const std::string id = path.stem().string();
      try {
        Image img;
        check(refsd_image_load(path.c_str(), &img.p));
        Result result;
        check(refsd_pipeline_run(pipeline.p, img.p, id.c_str(), i, &result.p));
        check(refsd_result_write(result.p, (fs::path(a.out) / id).c_str()));
        CString hash;
        check(refsd_result_output_hash(result.p, &hash.p));
        std::lock_guard lock(io);
        std::cout << "ok " << id << " subjects=" << refsd_result_subject_count(result.p)
                  << " skipped=" << refsd_result_skipped_count(result.p) << " sha256=" << hash.str() << "\n";
      } catch (const std::exception& e) {
        std::lock_guard lock(io);
        failures.push_back(path.string() + ": " + e.what());
        std::cerr << "FAILED " << path.string() << ": " << e.what() << "\n";
        if (a.fail_fast) abort = true;
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(a.jobs), inputs.size());
  for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  const std::size_t attempted = std::min(next.load(), inputs.size());
  std::cout << "processed " << attempted - failures.size() << "/" << inputs.size() << " images into " << a.out
            << "\n";
  if (failures.empty() && attempted == inputs.size()) return kExitOk;
  std::cerr << failures.size() << " image(s) failed:\n";
  for (const auto& f : failures) std::cerr << "  " << f << "\n";
  if (attempted < inputs.size()) std::cerr << inputs.size() - attempted << " image(s) not attempted (--fail-fast)\n";
  return kExitPartial;
}

// ---- campaign --------------------------------------------------------------

struct CampaignCreateArgs {
  std::string kind;
  std::string sources_file;
  std::string source_dir;
  int source_count = 0;
  int annotators = 3;
  std::string out;
};

int cmd_campaign_create(const CampaignCreateArgs& a, std::optional<std::uint64_t> seed) {
  std::vector<std::string> sources;
  if (!a.sources_file.empty()) {
    std::istringstream in(slurp(a.sources_file));
    for (std::string line; std::getline(in, line);) {
      if (!line.empty()) sources.push_back(line);
    }
  }
  if (!a.source_dir.empty()) {
    for (const auto& p : expand_inputs({a.source_dir})) sources.push_back(p.stem().string());
  }
  for (int i = 0; i < a.source_count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "src%04d", i);
    sources.emplace_back(name);
  }
  if (sources.empty()) throw UsageError("no sources: use --sources, --source-dir or --source-count");
  std::vector<const char*> ptrs;
  for (const auto& s : sources) ptrs.push_back(s.c_str());
  CString manifest;
  check(refsd_campaign_create(a.kind.c_str(), ptrs.data(), ptrs.size(), seed.value_or(0), a.annotators, &manifest.p));
  const json j = json::parse(manifest.str());
  emit(manifest.str() + "\n", a.out);
  std::ostream& log = (a.out.empty() || a.out == "-") ? std::cerr : std::cout;
  log << j.at("kind").get<std::string>() << ": sources=" << j.at("source_count") << " prompts=" << j.at("prompt_count")
      << " tasks=" << j.at("task_count") << " required_annotations=" << j.at("required_annotations") << "\n";
  return kExitOk;
}

struct CampaignExportArgs {
  std::string data_dir = "annotations";
  std::string campaign;
  std::string out;
};

int cmd_campaign_export(const CampaignExportArgs& a) {
  if (!fs::is_directory(a.data_dir)) throw UsageError("no annotation data directory at " + a.data_dir);
  AnnotationServer server;
  const std::string overrides = json{{"data_dir", a.data_dir}}.dump();
  check(refsd_annotation_server_create(nullptr, 0, overrides.c_str(), &server.p));
  CString ndjson;
  check(refsd_annotation_server_export(server.p, a.campaign.c_str(), &ndjson.p));
  emit(ndjson.str(), a.out);
  return kExitOk;
}

struct CampaignStatsArgs {
  std::string campaign;
  std::string records;
  std::string group_by = "attribute";
  std::string out;
};

int cmd_campaign_stats(const CampaignStatsArgs& a) {
  const std::string manifest = slurp(a.campaign);
  const std::string records = slurp(a.records);
  CString csv;
  check(refsd_campaign_stats(manifest.c_str(), records.c_str(), a.group_by.c_str(), &csv.p));
  emit(csv.str(), a.out);
  double alpha = 0;
  const refsd_status s = refsd_campaign_alpha(manifest.c_str(), records.c_str(), &alpha);
  std::ostream& log = (a.out.empty() || a.out == "-") ? std::cerr : std::cout;
  if (s == REFSD_OK) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", alpha);
    log << "cronbach_alpha=" << buf << "\n";
  } else if (s == REFSD_ERR_DEGENERATE || s == REFSD_ERR_SHAPE) {
    log << "cronbach_alpha=undefined (" << refsd_status_name(s) << ": " << refsd_last_error() << ")\n";
  } else {
    check(s);
  }
  return kExitOk;
}

// ---- eval ------------------------------------------------------------------

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

int cmd_eval_map(const std::string& predictions, const std::string& ground_truth, const std::string& out) {
  CString report;
  check(refsd_eval_map(predictions.c_str(), ground_truth.c_str(), &report.p));
  const json j = json::parse(report.str());
  std::cout << "mAP@0.5=" << fixed(j.at("map50")) << "\n";
  std::cout << "mAP@[.5:.95]=" << fixed(j.at("map50_95")) << "\n";
  for (const auto& [label, ap] : j.at("ap50").items()) std::cout << "AP@0.5[" << label << "]=" << fixed(ap) << "\n";
  for (const auto& f : j.at("flagged")) {
    std::cout << "flagged: " << f.get<std::string>() << " has detections but no ground truth\n";
  }
  if (!out.empty()) emit(j.dump(2) + "\n", out);
  return kExitOk;
}

int cmd_eval_accuracy(const std::string& predictions, const std::string& out) {
  CString report;
  check(refsd_eval_accuracy(predictions.c_str(), &report.p));
  const json j = json::parse(report.str());
  for (const auto& [category, acc] : j.items()) std::cout << "accuracy[" << category << "]=" << fixed(acc) << "\n";
  if (!out.empty()) emit(j.dump(2) + "\n", out);
  return kExitOk;
}

// ---- servers ---------------------------------------------------------------

struct MockServeArgs {
  std::string host = "127.0.0.1";
  int port = 8700;
  std::string scenes;
  std::string token;
};

int cmd_mock_serve(const MockServeArgs& a) {
  SignalStop signals;
  Backend backend;
  check(refsd_backend_mock(a.scenes.empty() ? nullptr : a.scenes.c_str(), &backend.p));
  MockServer server;
  check(refsd_mock_server_create(backend.p, a.token.c_str(), &server.p));
  int port = 0;
  check(refsd_mock_server_bind(server.p, a.host.c_str(), a.port, &port));
  std::cout << "mock backend listening on http://" << a.host << ":" << port << std::endl;
  refsd_mock_server* raw = server.p;
  signals.watch([raw] { refsd_mock_server_stop(raw); });
  check(refsd_mock_server_run(server.p));
  std::cout << "mock backend stopped" << std::endl;
  return kExitOk;
}

struct ServeAnnotationsArgs {
  std::string config;
  std::string host;
  std::optional<int> port;
  std::string data_dir;
  std::string image_dir;
  std::string static_dir;
  std::string token;
};

int cmd_serve_annotations(const ServeAnnotationsArgs& a) {
  SignalStop signals;
  json overrides = json::object();
  if (!a.host.empty()) overrides["host"] = a.host;
  if (a.port) overrides["port"] = *a.port;
  if (!a.data_dir.empty()) overrides["data_dir"] = a.data_dir;
  if (!a.image_dir.empty()) overrides["image_dir"] = a.image_dir;
  if (!a.static_dir.empty()) overrides["static_dir"] = a.static_dir;
  if (!a.token.empty()) overrides["auth_token"] = a.token;
  const std::string file = a.config.empty() ? std::string() : slurp(a.config);
  AnnotationServer server;
  const refsd_status s = refsd_annotation_server_create(file.empty() ? nullptr : file.c_str(), 1,
                                                        overrides.dump().c_str(), &server.p);
  if (s == REFSD_ERR_PARAMETER) throw UsageError(std::string("configuration: ") + refsd_last_error());
  check(s);
  int port = 0;
  check(refsd_annotation_server_bind(server.p, &port));
  std::cout << "annotation service listening on port " << port << std::endl;
  refsd_annotation_server* raw = server.p;
  signals.watch([raw] { refsd_annotation_server_stop(raw); });
  check(refsd_annotation_server_run(server.p));
  std::cout << "annotation service stopped" << std::endl;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"refsd: reference-guided pseudonymization engine, campaigns and metrics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", refsd_version());
  std::optional<std::uint64_t> seed;
  // Every command takes --seed; deterministic commands accept and ignore it.
  auto seeded = [&seed](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "Seed for every stochastic choice (flag > REFSD_SEED > config file > 0)");
    return cmd;
  };

  PseudonymizeArgs pa;
  auto* pseudo = seeded(app.add_subcommand("pseudonymize", "Replace every person in the input images"));
  pseudo->add_option("inputs", pa.inputs, "Image files, directories or glob patterns")->required();
  pseudo->add_option("-c,--config", pa.config, "JSON config file")->check(CLI::ExistingFile);
  pseudo->add_option("-o,--out", pa.out, "Output directory; one {image_id}/ per input")->capture_default_str();
  pseudo->add_flag("--mock", pa.mock, "Use the deterministic mock backend with planted-scene sidecars");
  pseudo->add_option("--scenes", pa.scenes, "Extra directory of planted-scene sidecars for --mock");
  pseudo->add_option("-j,--jobs", pa.jobs, "Concurrent image pipelines")->capture_default_str();
  pseudo->add_flag("--fail-fast", pa.fail_fast, "Stop at the first failed image");
  pseudo->add_option("--max-concurrency", pa.max_concurrency, "Concurrent backend calls per pipeline");
  pseudo->add_option("--generator-resolution", pa.generator_resolution, "Square generator resolution R");
  pseudo->add_option("--feather-sigma", pa.feather_sigma, "Mask feathering sigma in pixels (0 disables)");
  pseudo->add_option("--backend-url", pa.backend_url, "Base URL for every backend role");
  pseudo->add_option("--pii", pa.pii, "PII description to detect and inpaint (repeatable)");
  pseudo->add_option("--strategy", pa.strategy, "Prompt strategy: random, diversify or preserve");
  pseudo->add_option("--level", pa.level, "Prompt level: basic, simple, medium or complex");

  auto* campaign = app.add_subcommand("campaign", "Evaluation campaigns");
  campaign->require_subcommand(1);
  CampaignCreateArgs cc;
  auto* create = seeded(campaign->add_subcommand("create", "Write a campaign manifest with its task list"));
  create->add_option("-k,--kind", cc.kind, "phi_A, phi_B, phi_C or phi_D")->required();
  create->add_option("--sources", cc.sources_file, "File with one source image id per line")
      ->check(CLI::ExistingFile);
  create->add_option("--source-dir", cc.source_dir, "Directory whose PNG stems are the sources")
      ->check(CLI::ExistingDirectory);
  create->add_option("--source-count", cc.source_count, "Generate ids src0000 .. for N sources");
  create->add_option("--annotators", cc.annotators, "Annotators per task")->capture_default_str();
  create->add_option("-o,--out", cc.out, "Manifest path (stdout when omitted)");
  CampaignExportArgs ce;
  auto* exp = seeded(campaign->add_subcommand("export", "Export a campaign's annotation records as NDJSON"));
  exp->add_option("--data-dir", ce.data_dir, "Annotation service data directory")->capture_default_str();
  exp->add_option("--campaign", ce.campaign, "Campaign id, e.g. c0001")->required();
  exp->add_option("-o,--out", ce.out, "Output file (stdout when omitted)");
  CampaignStatsArgs cs;
  auto* stats = seeded(campaign->add_subcommand("stats", "Mean/std table and Cronbach alpha for exported records"));
  stats->add_option("--campaign", cs.campaign, "Campaign manifest JSON")->required()->check(CLI::ExistingFile);
  stats->add_option("--records", cs.records, "Annotation records NDJSON")->required()->check(CLI::ExistingFile);
  stats->add_option("--group-by", cs.group_by, "attribute, category or level")->capture_default_str();
  stats->add_option("-o,--out", cs.out, "CSV path (stdout when omitted)");

  auto* eval = app.add_subcommand("eval", "Detection and classification metrics");
  eval->require_subcommand(1);
  std::string predictions, ground_truth, eval_out;
  auto* map = seeded(eval->add_subcommand("map", "mAP@0.5 and mAP@[.5:.95] for NDJSON detections"));
  map->add_option("--predictions", predictions, "Detections NDJSON")->required()->check(CLI::ExistingFile);
  map->add_option("--ground-truth", ground_truth, "Ground truth NDJSON")->required()->check(CLI::ExistingFile);
  map->add_option("-o,--out", eval_out, "Also write the JSON report here");
  auto* acc = seeded(eval->add_subcommand("accuracy", "Per-category accuracy for NDJSON predictions"));
  acc->add_option("--predictions", predictions, "Predictions NDJSON")->required()->check(CLI::ExistingFile);
  acc->add_option("-o,--out", eval_out, "Also write the JSON report here");

  MockServeArgs ms;
  auto* mock = seeded(app.add_subcommand("mock-serve", "Serve the six backend roles from the mock (SIGTERM stops)"));
  mock->add_option("--host", ms.host, "Listen address")->capture_default_str();
  mock->add_option("-p,--port", ms.port, "Listen port (0 picks one)")->capture_default_str();
  mock->add_option("--scenes", ms.scenes, "Directory of images with planted-scene sidecars")
      ->check(CLI::ExistingDirectory);
  mock->add_option("--token", ms.token, "Require this bearer token");

  ServeAnnotationsArgs sa;
  auto* serve = seeded(app.add_subcommand("serve-annotations", "Run the annotation service and static UI"));
  serve->add_option("-c,--config", sa.config, "Service JSON config")->check(CLI::ExistingFile);
  serve->add_option("--host", sa.host, "Listen address (default 127.0.0.1)");
  serve->add_option("-p,--port", sa.port, "Listen port (default 8800)");
  serve->add_option("--data-dir", sa.data_dir, "Event log and snapshot directory");
  serve->add_option("--image-dir", sa.image_dir, "Directory of {image_id}.png served at /images/");
  serve->add_option("--static-dir", sa.static_dir, "Built UI served at /ui/");
  serve->add_option("--token", sa.token, "Require this bearer token on the API");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*pseudo) return cmd_pseudonymize(pa, seed);
    if (*create) return cmd_campaign_create(cc, seed);
    if (*exp) return cmd_campaign_export(ce);
    if (*stats) return cmd_campaign_stats(cs);
    if (*map) return cmd_eval_map(predictions, ground_truth, eval_out);
    if (*acc) return cmd_eval_accuracy(predictions, eval_out);
    if (*mock) return cmd_mock_serve(ms);
    if (*serve) return cmd_serve_annotations(sa);
  } catch (const UsageError& e) {
    std::cerr << "refsd: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "refsd: " << e.what() << "\n";
    return kExitPartial;
  }
  return kExitUsage;
}
