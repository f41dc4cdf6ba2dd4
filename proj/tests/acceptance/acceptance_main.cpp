// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per primary criterion.

#include <httplib.h>
#include <json.hpp>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "refsd/annotation.hpp"
#include "refsd/backend.hpp"
#include "refsd/corpus.hpp"
#include "refsd/errors.hpp"
#include "refsd/evalkit.hpp"
#include "refsd/imaging.hpp"
#include "refsd/pipeline.hpp"
#include "refsd/vocabulary.hpp"

namespace {

using namespace refsd;
using evalkit::EvaluationKind;
using imaging::BBox;
using imaging::ImageBuffer;
using imaging::SoftMask;
using prompt::Category;

// Collects failed expectations for one criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    ++checks_;
    if (!ok) failures_.push_back(what);
  }
  template <typename A, typename B>
  void expect_eq(const A& actual, const B& expected, const std::string& what) {
    std::ostringstream s;
    s << what << ": got " << actual << ", want " << expected;
    expect(actual == expected, s.str());
  }
  void expect_near(double actual, double expected, double tol, const std::string& what) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s: got %.10f, want %.10f (tol %g)", what.c_str(), actual, expected, tol);
    expect(std::abs(actual - expected) <= tol, buf);
  }
  template <typename Fn>
  void expect_error(ErrorKind kind, Fn&& fn, const std::string& what) {
    try {
      fn();
      expect(false, what + ": nothing thrown");
    } catch (const Error& e) {
      expect(e.kind() == kind, what + ": wrong error kind " + std::string(to_string(e.kind())));
    }
  }

  int checks() const { return checks_; }
  const std::vector<std::string>& failures() const { return failures_; }

 private:
  int checks_ = 0;
  std::vector<std::string> failures_;
};

struct Criterion {
  int number;
  std::string name;
  double limit_s;  // 0 for no runtime budget
  std::function<void(Check&)> body;
};

ImageBuffer random_image(std::mt19937& rng, int w, int h, int c) {
  std::uniform_int_distribution<int> dist(0, 255);
  ImageBuffer img(w, h, c);
  for (auto& v : img.data()) v = static_cast<std::uint8_t>(dist(rng));
  return img;
}

SoftMask rect_mask(int w, int h, const BBox& box) {
  SoftMask m(w, h, 0.0f);
  for (int y = box.y0; y < box.y1; ++y)
    for (int x = box.x0; x < box.x1; ++x) m.at(x, y) = 1.0f;
  return m;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("refsd-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

std::vector<std::string> source_ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("src" + std::to_string(i));
  return out;
}

// ---- 1. Campaign arithmetic ---------------------------------------------

void campaign_arithmetic(Check& c) {
  struct Row {
    EvaluationKind kind;
    std::size_t sources, prompts, tasks, annotations;
  };
  const Row rows[] = {
      {EvaluationKind::kPhiB, 250, 50, 12500, 37500},
      {EvaluationKind::kPhiC, 250, 33, 8250, 24750},
      {EvaluationKind::kPhiD, 250, 100, 25000, 75000},
      {EvaluationKind::kPhiA, 33, 1188, 3564, 10692},
  };
  for (const Row& r : rows) {
    const std::string k(prompt::to_string(r.kind));
    const auto spec = evalkit::build_campaign(r.kind, source_ids(r.sources), 1);
    c.expect_eq(spec.prompts.size(), r.prompts, k + " prompts");
    c.expect_eq(spec.tasks.size(), r.tasks, k + " tasks");
    c.expect_eq(spec.required_annotations(), r.annotations, k + " annotations");
    c.expect_eq(spec.annotators_per_image, 3, k + " raters per task");
    std::set<std::string> sources;
    for (const auto& t : spec.tasks) sources.insert(t.source);
    c.expect_eq(sources.size(), r.sources, k + " sources used");
  }
}

// ---- 2. Vocabulary cardinalities ----------------------------------------

void vocabulary_cardinalities(Check& c) {
  const auto& reg = prompt::VocabularyRegistry::builtin();
  const auto size_of = [&](EvaluationKind k, Category cat) -> std::size_t {
    const auto* v = reg.set(k).find(cat);
    return v ? v->values.size() : 0;
  };
  const std::pair<Category, std::size_t> phi_a[] = {{Category::kFaceAttribute, 36}, {Category::kEthnicity, 7},
                                                    {Category::kEmotion, 7},        {Category::kAge, 7},
                                                    {Category::kGender, 2}};
  for (const auto& [cat, n] : phi_a)
    c.expect_eq(size_of(EvaluationKind::kPhiA, cat), n, "phi_A " + std::string(prompt::to_string(cat)));
  const std::pair<Category, std::size_t> phi_b[] = {
      {Category::kFaceAttribute, 36}, {Category::kEthnicity, 7}, {Category::kEmotion, 7}};
  for (const auto& [cat, n] : phi_b)
    c.expect_eq(size_of(EvaluationKind::kPhiB, cat), n, "phi_B " + std::string(prompt::to_string(cat)));

  const std::pair<Category, std::size_t> phi_d[] = {
      {Category::kGender, 2},   {Category::kAge, 7},       {Category::kEmotion, 7},
      {Category::kEthnicity, 13}, {Category::kSkinTone, 7}, {Category::kFaceAttribute, 5},
      {Category::kHair, 12},    {Category::kOccupation, 16}, {Category::kClothing, 31}};
  for (const auto& [cat, n] : phi_d)
    c.expect_eq(size_of(EvaluationKind::kPhiD, cat), n, "phi_D " + std::string(prompt::to_string(cat)));
  c.expect_eq(reg.set(EvaluationKind::kPhiD).total(), 100u, "phi_D total");

  const auto& chains = reg.set(EvaluationKind::kPhiC);
  std::set<std::string> endpoints;
  for (const auto& cat : chains.categories())
    for (const auto& v : cat.values) endpoints.insert(std::string(prompt::to_string(cat.category)) + ":" + v);
  c.expect_eq(endpoints.size(), 33u, "phi_C unique endpoints");
  std::size_t oracle_pairs = 0;
  for (const auto& cat : chains.categories()) oracle_pairs += cat.values.size() - 1;
  c.expect_eq(prompt::chain_pairs(chains).size(), 29u, "phi_C pairs");
  c.expect_eq(oracle_pairs, 29u, "phi_C adjacent nodes");
}

// ---- 3. Compositing -----------------------------------------------------

void compositing(Check& c) {
  std::mt19937 rng(2026);
  int cases = 0;

  // Identity and replacement: 200 cases.
  for (int i = 0; i < 200; ++i, ++cases) {
    std::uniform_int_distribution<int> dim(1, 48);
    const int w = dim(rng), h = dim(rng), ch = i % 2 ? 3 : 1;
    const ImageBuffer base = random_image(rng, w, h, ch);
    const ImageBuffer over = random_image(rng, w, h, ch);
    c.expect(imaging::alpha_composite(base, over, SoftMask(w, h, 0.0f)) == base,
             "alpha 0 is not identity, case " + std::to_string(i));
    c.expect(imaging::alpha_composite(base, over, SoftMask(w, h, 1.0f)) == over,
             "alpha 1 is not replacement, case " + std::to_string(i));
  }

  // Crop then paste back: 200 cases.
  for (int i = 0; i < 200; ++i, ++cases) {
    std::uniform_int_distribution<int> dim(2, 64);
    const int w = dim(rng), h = dim(rng);
    const ImageBuffer img = random_image(rng, w, h, i % 2 ? 3 : 1);
    std::uniform_int_distribution<int> x0d(0, w - 1), y0d(0, h - 1);
    const int x0 = x0d(rng), y0 = y0d(rng);
    std::uniform_int_distribution<int> x1d(x0 + 1, w), y1d(y0 + 1, h);
    const BBox box{x0, y0, x1d(rng), y1d(rng)};
    const auto cropped = imaging::crop(img, box, 0);
    c.expect(imaging::paste_resample(img, cropped.image, cropped.box) == img,
             "crop/paste round trip differs, case " + std::to_string(i));
  }

  // Gaussian semigroup: feather(feather(m, s), s) ~ feather(m, s * sqrt 2), 100 cases.
  std::uniform_real_distribution<double> sigma(1.0, 5.0);
  for (int i = 0; i < 100; ++i, ++cases) {
    const double s = sigma(rng);
    const int margin = 2 * imaging::gaussian_radius(s) + 1;
    std::uniform_int_distribution<int> inner(4, 24);
    const int iw = inner(rng), ih = inner(rng);
    const int w = 2 * margin + iw, h = 2 * margin + ih;
    SoftMask m(w, h, 0.0f);
    if (i % 2) {
      std::uniform_real_distribution<float> weight(0.0f, 1.0f);
      for (int y = margin; y < h - margin; ++y)
        for (int x = margin; x < w - margin; ++x) m.at(x, y) = weight(rng);
    } else {
      m = rect_mask(w, h, {margin, margin, margin + iw, margin + ih});
    }
    const SoftMask twice = imaging::feather_mask(imaging::feather_mask(m, s), s);
    const SoftMask once = imaging::feather_mask(m, s * std::sqrt(2.0));
    double worst = 0.0;
    for (std::size_t k = 0; k < once.weights().size(); ++k)
      worst = std::max(worst, double(std::abs(twice.weights()[k] - once.weights()[k])));
    c.expect(worst <= 2.0 / 255.0, "semigroup deviation " + std::to_string(worst) + " at sigma " + std::to_string(s));
  }
  c.expect_eq(cases, 500, "randomized cases");
}

// ---- 4. End-to-end mock pipeline ----------------------------------------

std::vector<pipeline::PseudonymizationResult> run_corpus(const std::vector<corpus::CorpusImage>& images) {
  auto scenes = std::make_shared<backend::SceneRegistry>();
  for (const auto& img : images) scenes->add(img.image, img.scene);
  pipeline::PipelineConfig config;
  config.seed = 2026;
  config.pii_descriptions = {"license plate", "street sign"};
  pipeline::Pipeline p(config, std::make_shared<backend::MockBackend>(scenes));
  std::vector<pipeline::PseudonymizationResult> out;
  for (std::size_t i = 0; i < images.size(); ++i) out.push_back(p.run(images[i].image, {images[i].id, i}));
  return out;
}

void end_to_end(Check& c) {
  const auto images = corpus::planted_corpus();
  c.expect_eq(images.size(), 20u, "corpus size");
  const auto first = run_corpus(images);
  const auto second = run_corpus(images);

  std::size_t empty_scenes = 0, changed = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& in = images[i];
    const auto& r = first[i];
    const std::string id = in.id;

    std::vector<SoftMask> masks;
    for (const auto& s : r.subjects)
      if (!s.skipped) masks.push_back(s.mask);
    for (const auto& m : r.pii.regions) masks.push_back(m);
    const SoftMask u = imaging::mask_union(masks, in.image.width(), in.image.height());
    std::size_t outside_diff = 0;
    for (int y = 0; y < in.image.height(); ++y)
      for (int x = 0; x < in.image.width(); ++x)
        if (u.at(x, y) == 0.0f)
          for (int ch = 0; ch < in.image.channels(); ++ch) outside_diff += r.output.at(x, y, ch) != in.image.at(x, y, ch);
    c.expect_eq(outside_diff, 0u, id + " changed samples outside masks");

    c.expect_eq(r.output_hash, second[i].output_hash, id + " output hash across runs");
    c.expect(r.output == second[i].output, id + " output pixels across runs");

    if (in.scene.subjects.empty() && in.scene.pii.empty()) {
      ++empty_scenes;
      c.expect(r.output == in.image, id + " zero-subject image not bit-identical");
      c.expect_eq(r.output_hash, r.input_hash, id + " zero-subject hash");
    } else {
      changed += r.output != in.image;
    }
  }
  c.expect_eq(empty_scenes, 4u, "zero-subject images in corpus");
  c.expect_eq(changed, 16u, "images altered by the pipeline");
}

// ---- 5. Metric oracles --------------------------------------------------

// Step integral of the precision envelope at every distinct recall level.
double brute_force_ap(const std::vector<bool>& outcomes, std::size_t gts) {
  std::vector<double> p, r;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    tp += outcomes[i];
    p.push_back(double(tp) / double(i + 1));
    r.push_back(double(tp) / double(gts));
  }
  std::set<double> levels(r.begin(), r.end());
  double area = 0.0, prev = 0.0;
  for (double level : levels) {
    double best = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
      if (r[i] >= level) best = std::max(best, p[i]);
    area += (level - prev) * best;
    prev = level;
  }
  return area;
}

struct DetectionSet {
  std::vector<evalkit::Detection> dets;
  std::vector<evalkit::GroundTruth> gts;
};

DetectionSet random_set(std::mt19937& rng) {
  std::uniform_real_distribution<double> pos(0, 80), size(5, 30), jitter(-4, 4), score(0, 1);
  DetectionSet s;
  const int images = 1 + int(rng() % 4);
  for (int i = 0; i < images; ++i) {
    const std::string img = "img" + std::to_string(i);
    const int n = int(rng() % 5);
    for (int g = 0; g < n; ++g) {
      const std::string label = "c" + std::to_string(rng() % 3);
      const double x = pos(rng), y = pos(rng), w = size(rng), h = size(rng);
      s.gts.push_back({img, label, {x, y, x + w, y + h}});
      if (rng() % 4 != 0) {
        const double a = jitter(rng), b = jitter(rng);
        s.dets.push_back({img, label, {x + a, y + b, x + w + a, y + h + b}, score(rng)});
      }
    }
    const int fps = int(rng() % 3);
    for (int f = 0; f < fps; ++f) {
      const double x = pos(rng), y = pos(rng);
      s.dets.push_back({img, "c" + std::to_string(rng() % 3), {x, y, x + size(rng), y + size(rng)}, score(rng)});
    }
  }
  return s;
}

void metric_oracles(Check& c) {
  c.expect(evalkit::cronbach_alpha({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}}) == 1.0, "parallel raters alpha != 1.0");
  c.expect(evalkit::cronbach_alpha({{1, 5, 2, 4}, {1, 5, 2, 4}}) == 1.0, "parallel pair alpha != 1.0");
  c.expect_near(evalkit::cronbach_alpha({{1, 2, 3, 4}, {2, 2, 4, 4}, {1, 3, 3, 5}}), 28.0 / 30.0, 1e-9,
                "3x4 alpha");
  c.expect_error(
      ErrorKind::kDegenerate, [] { evalkit::cronbach_alpha({{1, 2, 3}, {3, 2, 1}, {2, 2, 2}}); },
      "zero-variance totals");

  c.expect_near(evalkit::iou({0, 0, 10, 10}, {5, 0, 15, 10}), 1.0 / 3.0, 1e-12, "IoU fixture");

  const std::vector<bool> fixture{true, false, true, true, false};
  const double ap = evalkit::average_precision(fixture, 3).ap;
  c.expect_near(ap, brute_force_ap(fixture, 3), 1e-4, "AP fixture vs brute-force envelope");
  c.expect_near(ap, 0.8556, 1e-4, "AP fixture vs published value");

  std::mt19937 rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const DetectionSet s = random_set(rng);
    const auto r = evalkit::mean_ap(s.dets, s.gts);
    c.expect(r.map50 + 1e-12 >= r.map50_95, "mAP@0.5 < mAP@[.5:.95] on set " + std::to_string(trial));
  }
  std::mt19937 rng2(43);
  for (int trial = 0; trial < 100; ++trial) {
    const DetectionSet s = random_set(rng2);
    DetectionSet t = s;
    for (auto& d : t.dets) d.score = std::pow(d.score, 3.0) * 0.5 + 0.1;
    const auto a = evalkit::mean_ap(s.dets, s.gts);
    const auto b = evalkit::mean_ap(t.dets, t.gts);
    c.expect(a.map50 == b.map50 && a.map50_95 == b.map50_95,
             "AP changed under monotone score transform on set " + std::to_string(trial));
  }
}

// ---- 6. Canny -----------------------------------------------------------

int perimeter_distance(const BBox& sq, int x, int y) {
  const int out_x = std::max({sq.x0 - x, x - (sq.x1 - 1), 0});
  const int out_y = std::max({sq.y0 - y, y - (sq.y1 - 1), 0});
  if (out_x > 0 || out_y > 0) return std::max(out_x, out_y);
  return std::min({x - sq.x0, sq.x1 - 1 - x, y - sq.y0, sq.y1 - 1 - y});
}

void canny(Check& c) {
  for (const BBox& sq : {BBox{20, 20, 44, 44}, BBox{8, 13, 50, 41}}) {
    ImageBuffer img(64, 64, 1, 0);
    for (int y = sq.y0; y < sq.y1; ++y)
      for (int x = sq.x0; x < sq.x1; ++x) img.at(x, y) = 255;
    const auto e = imaging::canny_edges(img);
    c.expect(e.count() > 0, "square produced no edges");
    std::size_t stray = 0;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        if (e.at(x, y) && perimeter_distance(sq, x, y) > 1) ++stray;
    c.expect_eq(stray, 0u, "edge pixels farther than 1 px from the perimeter");
    int covered = 0, total = 0;
    for (int y = sq.y0; y < sq.y1; ++y)
      for (int x = sq.x0; x < sq.x1; ++x) {
        if (perimeter_distance(sq, x, y) != 0) continue;
        ++total;
        bool hit = false;
        for (int dy = -1; dy <= 1 && !hit; ++dy)
          for (int dx = -1; dx <= 1 && !hit; ++dx) hit = e.at(x + dx, y + dy);
        covered += hit;
      }
    const double coverage = double(covered) / total;
    c.expect(coverage >= 0.95, "perimeter coverage " + std::to_string(coverage));
  }
  c.expect_eq(imaging::canny_edges(ImageBuffer(40, 30, 3, 128)).count(), 0u, "constant RGB edges");
  c.expect_eq(imaging::canny_edges(ImageBuffer(40, 30, 1, 0)).count(), 0u, "constant gray edges");
}

// ---- 7. Annotation service ----------------------------------------------

int score_for(std::size_t task, std::size_t annotator) { return int((task * 7 + annotator * 3) % 5) + 1; }

void crash_recovery(Check& c) {
  TempDir dir("accept-kill");
  std::string task_id;
  {
    annotation::AnnotationStore store(dir.path());
    const auto cid = store.create_campaign(evalkit::build_campaign(EvaluationKind::kPhiB, {"s0", "s1"}, 7));
    task_id = store.next_task("a5", cid)->task_id;
  }
  int fds[2];
  if (pipe(fds) != 0) return c.expect(false, "pipe failed");
  const pid_t child = fork();
  if (child < 0) return c.expect(false, "fork failed");
  if (child == 0) {
    close(fds[0]);
    annotation::ServiceConfig config;
    config.port = 0;
    config.data_dir = dir.path();
    annotation::AnnotationServer server(config);
    const int port = server.bind();
    if (write(fds[1], &port, sizeof port) != sizeof port) _exit(3);
    close(fds[1]);
    server.run();
    _exit(0);
  }
  close(fds[1]);
  int port = 0;
  const bool got_port = read(fds[0], &port, sizeof port) == static_cast<ssize_t>(sizeof port);
  close(fds[0]);
  int status = 0;
  if (got_port) {
    httplib::Client client("127.0.0.1", port);
    const nlohmann::json body = {{"campaign_id", "c0001"}, {"task_id", task_id}, {"annotator_id", "a5"}, {"score", 4}};
    const auto res = client.Post("/scores", body.dump(), "application/json");
    c.expect(res && res->status == 201, "submit not acknowledged with 201");
  } else {
    c.expect(false, "server child did not report a port");
  }
  kill(child, SIGKILL);
  waitpid(child, &status, 0);
  c.expect(WIFSIGNALED(status) && WTERMSIG(status) == SIGKILL, "server was not killed");

  annotation::AnnotationStore reopened(dir.path());
  const auto records = reopened.export_records("c0001");
  c.expect_eq(records.size(), 1u, "records after restart");
  if (!records.empty()) {
    c.expect_eq(records[0].task_id, task_id, "recovered task");
    c.expect_eq(records[0].annotator_id, "a5", "recovered annotator");
    c.expect_eq(records[0].score, 4, "recovered score");
  }
}

void assignment(Check& c) {
  const auto spec = evalkit::build_campaign(EvaluationKind::kPhiB, source_ids(6), 11);
  const auto pool = annotation::default_pool();
  c.expect_eq(pool.size(), 8u, "pool size");
  const std::set<std::string> pool_set(pool.begin(), pool.end());

  TempDir d1("accept-assign1"), d2("accept-assign2"), d3("accept-assign3");
  annotation::AnnotationStore s1(d1.path()), s2(d2.path()), s3(d3.path());
  const auto c1 = s1.create_campaign(spec);
  const auto c2 = s2.create_campaign(spec);
  auto reseeded = spec;
  reseeded.seed = 12;
  const auto c3 = s3.create_campaign(reseeded);

  std::size_t bad = 0, mismatched = 0, differs = 0;
  for (const auto& t : spec.tasks) {
    const auto a = s1.assignees(c1, t.id);
    const std::set<std::string> distinct(a.begin(), a.end());
    bool ok = a.size() == 3 && distinct.size() == 3;
    for (const auto& id : a) ok = ok && pool_set.count(id);
    bad += !ok;
    mismatched += a != s2.assignees(c2, t.id);
    differs += a != s3.assignees(c3, t.id);
  }
  c.expect_eq(bad, 0u, "tasks without exactly 3 distinct pool annotators");
  c.expect_eq(mismatched, 0u, "tasks assigned differently under the same seed");
  c.expect(differs > 0, "a different seed produced the same assignment");
}

void export_round_trip(Check& c) {
  TempDir dir("accept-export");
  annotation::AnnotationStore store(dir.path());
  const auto spec = evalkit::build_campaign(EvaluationKind::kPhiC, {"s0", "s1"}, 5);
  const auto cid = store.create_campaign(spec);
  std::map<std::string, std::size_t> task_index;
  for (std::size_t i = 0; i < spec.tasks.size(); ++i) task_index[spec.tasks[i].id] = i;

  std::vector<evalkit::AnnotationRecord> submitted;
  const auto pool = annotation::default_pool();
  for (std::size_t a = 0; a < pool.size(); ++a) {
    while (auto v = store.next_task(pool[a], cid)) {
      const int score = score_for(task_index.at(v->task_id), a);
      submitted.push_back(store.submit_score(cid, pool[a], v->task_id, score).record);
    }
  }
  c.expect_eq(submitted.size(), spec.required_annotations(), "records submitted");

  std::istringstream in(store.export_ndjson(cid));
  const auto exported = evalkit::read_annotations(in);
  c.expect_eq(exported.size(), submitted.size(), "records exported");

  for (auto group : {evalkit::GroupBy::kAttribute, evalkit::GroupBy::kCategory}) {
    const auto ours = evalkit::aggregate_scores(spec, exported, group);
    const auto truth = evalkit::aggregate_scores(spec, submitted, group);
    c.expect(ours == truth, "aggregates differ after export, group " + std::string(evalkit::to_string(group)));
  }

  // Hand-computed per-attribute means from the scoring rule.
  std::map<std::string, std::pair<double, std::size_t>> oracle;
  for (const auto& r : submitted) {
    auto& [sum, n] = oracle[spec.prompts[spec.find_task(r.task_id)->prompt_index].attribute];
    sum += r.score;
    ++n;
  }
  for (const auto& row : evalkit::aggregate_scores(spec, exported, evalkit::GroupBy::kAttribute)) {
    const auto& [sum, n] = oracle.at(row.group);
    c.expect_eq(row.count, n, row.group + " count");
    c.expect_near(row.mean, sum / double(n), 1e-12, row.group + " mean");
  }

  const double alpha_export = evalkit::cronbach_alpha(evalkit::rating_matrix(exported, 3));
  const double alpha_truth = evalkit::cronbach_alpha(evalkit::rating_matrix(submitted, 3));
  c.expect(alpha_export == alpha_truth, "alpha differs after export");
}

void annotation_service(Check& c) {
  crash_recovery(c);
  assignment(c);
  export_round_trip(c);
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "campaign arithmetic", 10, campaign_arithmetic},
      {2, "vocabulary cardinalities", 0, vocabulary_cardinalities},
      {3, "compositing suite", 30, compositing},
      {4, "end-to-end mock pipeline", 60, end_to_end},
      {5, "metric oracles", 30, metric_oracles},
      {6, "canny reference", 5, canny},
      {7, "annotation service", 60, annotation_service},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Check check;
    const auto start = std::chrono::steady_clock::now();
    try {
      cr.body(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("uncaught exception: ") + e.what());
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (cr.limit_s > 0 && elapsed >= cr.limit_s) {
      check.expect(false, "runtime " + std::to_string(elapsed) + " s over budget");
    }
    const bool ok = check.failures().empty();
    failed += !ok;
    if (cr.limit_s > 0) {
      std::printf("%s  [%d] %s  (%d checks, %.2f s / %.0f s)\n", ok ? "PASS" : "FAIL", cr.number, cr.name.c_str(),
                  check.checks(), elapsed, cr.limit_s);
    } else {
      std::printf("%s  [%d] %s  (%d checks, %.2f s)\n", ok ? "PASS" : "FAIL", cr.number, cr.name.c_str(),
                  check.checks(), elapsed);
    }
    for (const auto& f : check.failures()) std::printf("        %s\n", f.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu criteria, %d passed, %d failed\n", criteria.size(), int(criteria.size()) - failed, failed);
  return failed == 0 ? 0 : 1;
}
