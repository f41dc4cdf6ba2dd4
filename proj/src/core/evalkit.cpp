// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

#include "refsd/evalkit.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "refsd/assets.hpp"
#include "refsd/errors.hpp"

namespace refsd::evalkit {

using nlohmann::json;
using prompt::PromptLevel;
using prompt::PromptSpec;

namespace {

std::string padded(std::size_t n, int width) {
  std::ostringstream os;
  os << std::setw(width) << std::setfill('0') << n;
  return os.str();
}

std::string image_ref(const std::string& source, const CampaignPrompt& p) { return source + "__" + p.id; }

CampaignPrompt basic_prompt(EvaluationKind kind, std::size_t index, Category cat, const std::string& value) {
  CampaignPrompt p;
  p.id = std::string(to_string(kind)) + "-p" + padded(index, 4);
  p.spec.level = PromptLevel::kBasic;
  p.spec.attributes[cat] = value;
  p.text = prompt::build_prompt(p.spec).positive;
  p.category = std::string(to_string(cat));
  p.attribute = value;
  return p;
}

std::string task_id(EvaluationKind kind, std::size_t index) {
  return std::string(to_string(kind)) + "-t" + padded(index, 6);
}

[[noreturn]] void invalid(const std::string& what) { fail(ErrorKind::kValidation, what); }

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) invalid(where + ": missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    invalid(where + ": field '" + key + "' has the wrong type");
  }
}

json attrs_json(const prompt::Attributes& a) {
  json j = json::object();
  for (const auto& [cat, value] : a) j[std::string(to_string(cat))] = value;
  return j;
}

prompt::Attributes attrs_from(const json& j) {
  prompt::Attributes a;
  for (const auto& [key, value] : j.items()) a[prompt::parse_category(key)] = value.get<std::string>();
  return a;
}

double sample_variance(const std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

void check_box(const Box& b) {
  if (!std::isfinite(b.x0) || !std::isfinite(b.y0) || !std::isfinite(b.x1) || !std::isfinite(b.y1) ||
      !(b.x1 > b.x0) || !(b.y1 > b.y0)) {
    fail(ErrorKind::kShape, "invalid box");
  }
}

template <typename F>
void for_each_json_line(const std::filesystem::path& path, F&& f) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      invalid(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
    f(j, path.string() + ":" + std::to_string(n));
  }
}

Box box_from(const json& j, const std::string& where) {
  Box b{field<double>(j, "x0", where), field<double>(j, "y0", where), field<double>(j, "x1", where),
        field<double>(j, "y1", where)};
  check_box(b);
  return b;
}

}  // namespace

const Task* CampaignSpec::find_task(std::string_view id) const {
  auto it = std::lower_bound(tasks.begin(), tasks.end(), id, [](const Task& t, std::string_view v) { return t.id < v; });
  if (it != tasks.end() && it->id == id) return &*it;
  for (const Task& t : tasks) {
    if (t.id == id) return &t;
  }
  return nullptr;
}

CampaignSpec build_campaign(EvaluationKind kind, std::vector<std::string> sources, std::uint64_t seed,
                            const CampaignOptions& options, const prompt::VocabularyRegistry& vocab) {
  if (sources.empty()) fail(ErrorKind::kParameter, "campaign needs at least one source image");
  if (std::set<std::string>(sources.begin(), sources.end()).size() != sources.size()) {
    fail(ErrorKind::kParameter, "duplicate source image ids");
  }
  if (options.annotators_per_image < 1) fail(ErrorKind::kParameter, "annotators_per_image must be >= 1");
  CampaignSpec c;
  c.kind = kind;
  c.sources = std::move(sources);
  c.seed = seed;
  c.annotators_per_image = options.annotators_per_image;
  c.vocabulary_version = vocab.version();

  switch (kind) {
    case EvaluationKind::kPhiA: {
      if (options.phi_a_combos_per_level == 0) fail(ErrorKind::kParameter, "phi_a_combos_per_level must be > 0");
      const std::vector<PromptSpec> combos =
          prompt::sample_attribute_combos(options.phi_a_combos_per_level * kPhiALevels.size(), seed, vocab);
      for (std::size_t j = 0; j < combos.size(); ++j) {
        CampaignPrompt p;
        p.id = std::string(to_string(kind)) + "-p" + padded(j, 4);
        p.spec = combos[j];
        p.text = prompt::build_prompt(p.spec, vocab).positive;
        p.category = "combination";
        p.attribute = prompt::attribute_sentence(p.spec);
        c.prompts.push_back(std::move(p));
      }
      for (std::size_t j = 0; j < c.prompts.size(); ++j) {
        const std::string& source = c.sources[j % c.sources.size()];
        for (PromptLevel level : kPhiALevels) {
          PromptSpec spec = c.prompts[j].spec;
          spec.level = level;
          Task t;
          t.id = task_id(kind, c.tasks.size());
          t.source = source;
          t.prompt_index = j;
          t.level = level;
          t.text = prompt::build_prompt(spec, vocab).positive;
          t.images = {image_ref(source, c.prompts[j]) + "__" + std::string(prompt::to_string(level))};
          c.tasks.push_back(std::move(t));
        }
      }
      break;
    }
    case EvaluationKind::kPhiB:
    case EvaluationKind::kPhiD: {
      for (const prompt::AttributeVocab& v : vocab.set(kind).categories()) {
        for (const std::string& value : v.values) c.prompts.push_back(basic_prompt(kind, c.prompts.size(), v.category, value));
      }
      for (const std::string& source : c.sources) {
        for (std::size_t j = 0; j < c.prompts.size(); ++j) {
          Task t;
          t.id = task_id(kind, c.tasks.size());
          t.source = source;
          t.prompt_index = j;
          t.text = c.prompts[j].text;
          t.images = {image_ref(source, c.prompts[j])};
          c.tasks.push_back(std::move(t));
        }
      }
      break;
    }
    case EvaluationKind::kPhiC: {
      const prompt::VocabularySet& chains = vocab.set(kind);
      c.pairs = prompt::chain_pairs(chains);
      std::vector<std::optional<std::size_t>> predecessor;
      for (const prompt::AttributeVocab& v : chains.categories()) {
        for (std::size_t k = 0; k < v.values.size(); ++k) {
          CampaignPrompt p = basic_prompt(kind, c.prompts.size(), v.category, v.values[k]);
          if (k > 0) {
            p.attribute = v.values[k - 1] + " -> " + v.values[k];
            predecessor.push_back(c.prompts.size() - 1);
          } else {
            predecessor.push_back(std::nullopt);
          }
          c.prompts.push_back(std::move(p));
        }
      }
      for (const std::string& source : c.sources) {
        for (std::size_t j = 0; j < c.prompts.size(); ++j) {
          Task t;
          t.id = task_id(kind, c.tasks.size());
          t.source = source;
          t.prompt_index = j;
          t.text = c.prompts[j].text;
          t.images = {predecessor[j] ? image_ref(source, c.prompts[*predecessor[j]]) : source,
                      image_ref(source, c.prompts[j])};
          c.tasks.push_back(std::move(t));
        }
      }
      break;
    }
  }
  return c;
}

std::string campaign_to_json(const CampaignSpec& c) {
  json prompts = json::array();
  for (const auto& p : c.prompts) {
    prompts.push_back({{"id", p.id},
                       {"level", prompt::to_string(p.spec.level)},
                       {"attributes", attrs_json(p.spec.attributes)},
                       {"text", p.text},
                       {"category", p.category},
                       {"attribute", p.attribute}});
  }
  json pairs = json::array();
  for (const auto& p : c.pairs) pairs.push_back({{"category", to_string(p.category)}, {"from", p.from}, {"to", p.to}});
  json tasks = json::array();
  for (const auto& t : c.tasks) {
    tasks.push_back({{"id", t.id},
                     {"source", t.source},
                     {"prompt", t.prompt_index},
                     {"level", prompt::to_string(t.level)},
                     {"text", t.text},
                     {"images", t.images}});
  }
  const json j = {{"schema", "refsd.campaign.v1"},
                  {"kind", to_string(c.kind)},
                  {"seed", c.seed},
                  {"vocabulary_version", c.vocabulary_version},
                  {"annotators_per_image", c.annotators_per_image},
                  {"source_count", c.sources.size()},
                  {"prompt_count", c.prompts.size()},
                  {"pair_count", c.pairs.size()},
                  {"task_count", c.tasks.size()},
                  {"required_annotations", c.required_annotations()},
                  {"sources", c.sources},
                  {"prompts", prompts},
                  {"pairs", pairs},
                  {"tasks", tasks}};
  return j.dump();
}

CampaignSpec parse_campaign(std::string_view text) {
  CampaignSpec c;
  try {
    const json j = json::parse(text);
    if (j.value("schema", "") != "refsd.campaign.v1") invalid("campaign: unexpected schema");
    c.kind = prompt::parse_kind(j.at("kind").get<std::string>());
    c.seed = j.at("seed").get<std::uint64_t>();
    c.vocabulary_version = j.value("vocabulary_version", "");
    c.annotators_per_image = j.at("annotators_per_image").get<int>();
    c.sources = j.at("sources").get<std::vector<std::string>>();
    for (const json& p : j.at("prompts")) {
      CampaignPrompt cp;
      cp.id = p.at("id").get<std::string>();
      cp.spec.level = prompt::parse_level(p.at("level").get<std::string>());
      cp.spec.attributes = attrs_from(p.at("attributes"));
      cp.text = p.at("text").get<std::string>();
      cp.category = p.at("category").get<std::string>();
      cp.attribute = p.at("attribute").get<std::string>();
      c.prompts.push_back(std::move(cp));
    }
    for (const json& p : j.at("pairs")) {
      c.pairs.push_back({prompt::parse_category(p.at("category").get<std::string>()), p.at("from").get<std::string>(),
                         p.at("to").get<std::string>()});
    }
    for (const json& t : j.at("tasks")) {
      Task task;
      task.id = t.at("id").get<std::string>();
      task.source = t.at("source").get<std::string>();
      task.prompt_index = t.at("prompt").get<std::size_t>();
      task.level = prompt::parse_level(t.at("level").get<std::string>());
      task.text = t.at("text").get<std::string>();
      task.images = t.at("images").get<std::vector<std::string>>();
      if (task.prompt_index >= c.prompts.size()) invalid("campaign: task " + task.id + " references a missing prompt");
      c.tasks.push_back(std::move(task));
    }
  } catch (const json::exception& e) {
    invalid(std::string("campaign: ") + e.what());
  }
  if (c.annotators_per_image < 1) invalid("campaign: annotators_per_image must be >= 1");
  return c;
}

void validate(const AnnotationRecord& r) {
  if (r.task_id.empty()) invalid("annotation: empty task id");
  if (r.annotator_id.empty()) invalid("annotation: empty annotator id");
  if (r.score < 1 || r.score > 5) invalid("annotation: score " + std::to_string(r.score) + " outside 1-5");
  if (r.pair_position && *r.pair_position != "left" && *r.pair_position != "right") {
    invalid("annotation: pair_position must be left or right");
  }
}

std::string to_ndjson_line(const AnnotationRecord& r) {
  json j = {{"task_id", r.task_id}, {"annotator_id", r.annotator_id}, {"score", r.score}, {"timestamp_ms", r.timestamp_ms}};
  if (r.pair_position) j["pair_position"] = *r.pair_position;
  return j.dump();
}

AnnotationRecord parse_annotation(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    invalid(std::string("annotation: ") + e.what());
  }
  if (!j.is_object()) invalid("annotation: expected an object");
  AnnotationRecord r;
  r.task_id = field<std::string>(j, "task_id", "annotation");
  r.annotator_id = field<std::string>(j, "annotator_id", "annotation");
  r.score = field<int>(j, "score", "annotation");
  if (j.contains("timestamp_ms")) r.timestamp_ms = field<std::int64_t>(j, "timestamp_ms", "annotation");
  if (j.contains("pair_position")) r.pair_position = field<std::string>(j, "pair_position", "annotation");
  validate(r);
  return r;
}

std::vector<AnnotationRecord> read_annotations(std::istream& in) {
  std::vector<AnnotationRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_annotation(line));
  }
  return out;
}

std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  return read_annotations(in);
}

void write_annotations(std::ostream& out, const std::vector<AnnotationRecord>& records) {
  for (const auto& r : records) out << to_ndjson_line(r) << '\n';
}

std::string_view to_string(GroupBy g) {
  switch (g) {
    case GroupBy::kAttribute: return "attribute";
    case GroupBy::kCategory: return "category";
    case GroupBy::kLevel: return "level";
  }
  return "?";
}

GroupBy parse_group_by(std::string_view name) {
  for (GroupBy g : {GroupBy::kAttribute, GroupBy::kCategory, GroupBy::kLevel}) {
    if (to_string(g) == name) return g;
  }
  fail(ErrorKind::kParameter, "unknown grouping '" + std::string(name) + "' (attribute, category, level)");
}

std::vector<ScoreRow> aggregate_groups(const std::vector<std::pair<std::string, int>>& labelled) {
  std::map<std::string, std::vector<double>> groups;
  for (const auto& [group, score] : labelled) groups[group].push_back(score);
  std::vector<ScoreRow> rows;
  for (const auto& [group, scores] : groups) {
    ScoreRow row;
    row.group = group;
    row.count = scores.size();
    row.mean = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
    row.single = scores.size() == 1;
    row.std = row.single ? 0.0 : std::sqrt(sample_variance(scores));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ScoreRow> aggregate_scores(const CampaignSpec& campaign, const std::vector<AnnotationRecord>& records,
                                       GroupBy group_by) {
  std::unordered_map<std::string, const Task*> tasks;
  for (const Task& t : campaign.tasks) tasks.emplace(t.id, &t);
  std::vector<std::pair<std::string, int>> labelled;
  labelled.reserve(records.size());
  for (const AnnotationRecord& r : records) {
    validate(r);
    auto it = tasks.find(r.task_id);
    if (it == tasks.end()) invalid("annotation references unknown task " + r.task_id);
    const Task& t = *it->second;
    const CampaignPrompt& p = campaign.prompts.at(t.prompt_index);
    switch (group_by) {
      case GroupBy::kAttribute: labelled.emplace_back(p.attribute, r.score); break;
      case GroupBy::kCategory: labelled.emplace_back(p.category, r.score); break;
      case GroupBy::kLevel: labelled.emplace_back(std::string(prompt::to_string(t.level)), r.score); break;
    }
  }
  return aggregate_groups(labelled);
}

std::string scores_csv(const std::vector<ScoreRow>& rows) {
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
      if (ch == '"') out += '"';
      out += ch;
    }
    return out + "\"";
  };
  std::ostringstream os;
  os << "group,mean,std,count,single\n";
  os << std::setprecision(10);
  for (const auto& r : rows) {
    os << quote(r.group) << ',' << r.mean << ',' << r.std << ',' << r.count << ',' << (r.single ? "true" : "false")
       << '\n';
  }
  return os.str();
}

double cronbach_alpha(const RatingMatrix& m) {
  const std::size_t k = m.size();
  if (k < 2) fail(ErrorKind::kShape, "cronbach alpha needs at least 2 raters");
  const std::size_t n = m.front().size();
  if (n < 2) fail(ErrorKind::kShape, "cronbach alpha needs at least 2 items");
  std::vector<double> totals(n, 0.0);
  double rater_var = 0.0;
  for (const auto& row : m) {
    if (row.size() != n) fail(ErrorKind::kShape, "cronbach alpha needs a complete raters x items matrix");
    for (double v : row) {
      if (!std::isfinite(v)) fail(ErrorKind::kShape, "non-finite score in rating matrix");
    }
    rater_var += sample_variance(row);
    for (std::size_t j = 0; j < n; ++j) totals[j] += row[j];
  }
  const double total_var = sample_variance(totals);
  if (total_var <= 1e-12) {
    fail(ErrorKind::kDegenerate, "cronbach alpha undefined: item totals have zero variance");
  }
  const double kd = static_cast<double>(k);
  return kd / (kd - 1.0) * (1.0 - rater_var / total_var);
}

RatingMatrix rating_matrix(const std::vector<AnnotationRecord>& records, int raters_per_task) {
  if (raters_per_task < 1) fail(ErrorKind::kParameter, "raters_per_task must be >= 1");
  std::map<std::string, std::map<std::string, int>> by_task;
  for (const auto& r : records) by_task[r.task_id][r.annotator_id] = r.score;
  RatingMatrix m(static_cast<std::size_t>(raters_per_task));
  for (const auto& [task, scores] : by_task) {
    if (scores.size() != static_cast<std::size_t>(raters_per_task)) continue;
    std::size_t slot = 0;
    for (const auto& [annotator, score] : scores) m[slot++].push_back(score);
  }
  return m;
}

const std::vector<std::string>& rafdb_labels(std::string_view category) {
  static const std::map<std::string, std::vector<std::string>, std::less<>> sets = [] {
    std::map<std::string, std::vector<std::string>, std::less<>> out;
    for (const char* name : {"emotion", "gender", "race", "age"}) {
      if (auto contents = assets::find("labels/rafdb/" + std::string(name) + ".txt")) {
        out[name] = assets::lines(*contents);
      }
    }
    return out;
  }();
  auto it = sets.find(category);
  if (it == sets.end()) invalid("unknown RAF-DB label category '" + std::string(category) + "'");
  return it->second;
}

std::map<std::string, double> classification_accuracy(const std::vector<PredictionLabel>& labels) {
  if (labels.empty()) invalid("accuracy needs at least one prediction");
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;
  for (const auto& l : labels) {
    const auto& known = rafdb_labels(l.category);
    for (const std::string* v : {&l.predicted, &l.truth}) {
      if (std::find(known.begin(), known.end(), *v) == known.end()) {
        invalid("'" + *v + "' is not a registered RAF-DB " + l.category + " label");
      }
    }
    auto& [correct, total] = counts[l.category];
    correct += l.predicted == l.truth ? 1 : 0;
    ++total;
  }
  std::map<std::string, double> out;
  for (const auto& [cat, ct] : counts) out[cat] = static_cast<double>(ct.first) / static_cast<double>(ct.second);
  return out;
}

std::vector<PredictionLabel> read_predictions(const std::filesystem::path& path) {
  std::vector<PredictionLabel> out;
  for_each_json_line(path, [&](const json& j, const std::string& where) {
    out.push_back({field<std::string>(j, "image_id", where), field<std::string>(j, "category", where),
                   field<std::string>(j, "predicted", where), field<std::string>(j, "truth", where)});
  });
  return out;
}

double iou(const Box& a, const Box& b) {
  check_box(a);
  check_box(b);
  const double iw = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const double ih = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  const double inter = iw * ih;
  const double uni = (a.x1 - a.x0) * (a.y1 - a.y0) + (b.x1 - b.x0) * (b.y1 - b.y0) - inter;
  return uni > 0 ? inter / uni : 0.0;
}

MatchResult match_detections(const std::vector<Box>& dets, const std::vector<double>& scores,
                             const std::vector<Box>& gts, double threshold) {
  if (dets.size() != scores.size()) fail(ErrorKind::kShape, "one score per detection required");
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  for (double s : scores) {
    if (!std::isfinite(s)) fail(ErrorKind::kValidation, "non-finite detection score");
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<bool> used(gts.size(), false);
  MatchResult out;
  for (std::size_t d : order) {
    std::optional<std::size_t> best;
    double best_iou = 0.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g]) continue;
      const double v = iou(dets[d], gts[g]);
      if (v >= threshold && (!best || v > best_iou)) {
        best = g;
        best_iou = v;
      }
    }
    if (best) used[*best] = true;
    out.matches.push_back({d, scores[d], best.has_value()});
  }
  out.false_negatives = static_cast<std::size_t>(std::count(used.begin(), used.end(), false));
  return out;
}

ApResult average_precision(const std::vector<bool>& outcomes, std::size_t gt_count) {
  ApResult r;
  if (gt_count == 0) {
    r.flagged = !outcomes.empty();
    return r;
  }
  std::size_t tp = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    tp += outcomes[i] ? 1 : 0;
    r.precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
    r.recall.push_back(static_cast<double>(tp) / static_cast<double>(gt_count));
  }
  std::vector<double> envelope = r.precision;
  for (std::size_t i = envelope.size(); i-- > 1;) envelope[i - 1] = std::max(envelope[i - 1], envelope[i]);
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < envelope.size(); ++i) {
    r.ap += (r.recall[i] - prev_recall) * envelope[i];
    prev_recall = r.recall[i];
  }
  return r;
}

std::vector<double> coco_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back((50.0 + 5.0 * i) / 100.0);
  return t;
}

namespace {

struct ClassAp {
  std::map<std::string, double> ap;
  std::vector<std::string> flagged;
};

ClassAp per_class_ap(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts, double threshold) {
  // class -> image -> indices
  std::map<std::string, std::map<std::string, std::vector<std::size_t>>> det_idx;
  std::map<std::string, std::map<std::string, std::vector<std::size_t>>> gt_idx;
  for (std::size_t i = 0; i < dets.size(); ++i) det_idx[dets[i].label][dets[i].image_id].push_back(i);
  for (std::size_t i = 0; i < gts.size(); ++i) gt_idx[gts[i].label][gts[i].image_id].push_back(i);
  ClassAp out;
  for (const auto& [label, images] : det_idx) {
    if (!gt_idx.count(label)) out.flagged.push_back(label);
  }
  for (const auto& [label, gt_images] : gt_idx) {
    std::size_t gt_count = 0;
    for (const auto& [img, idx] : gt_images) gt_count += idx.size();
    struct Scored {
      double score;
      std::size_t global;
      bool tp;
    };
    std::vector<Scored> all;
    if (auto it = det_idx.find(label); it != det_idx.end()) {
      for (const auto& [img, idx] : it->second) {
        std::vector<Box> db, gb;
        std::vector<double> sc;
        for (std::size_t i : idx) {
          db.push_back(dets[i].box);
          sc.push_back(dets[i].score);
        }
        if (auto g = gt_images.find(img); g != gt_images.end()) {
          for (std::size_t i : g->second) gb.push_back(gts[i].box);
        }
        for (const Match& m : match_detections(db, sc, gb, threshold).matches) {
          all.push_back({m.score, idx[m.detection], m.true_positive});
        }
      }
    }
    std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) {
      return a.score != b.score ? a.score > b.score : a.global < b.global;
    });
    std::vector<bool> outcomes;
    for (const auto& s : all) outcomes.push_back(s.tp);
    out.ap[label] = average_precision(outcomes, gt_count).ap;
  }
  return out;
}

double mean_of(const std::map<std::string, double>& m) {
  if (m.empty()) return 0.0;
  double s = 0.0;
  for (const auto& [k, v] : m) s += v;
  return s / static_cast<double>(m.size());
}

}  // namespace

double mean_ap_at(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts, double threshold) {
  return mean_of(per_class_ap(dets, gts, threshold).ap);
}

MapResult mean_ap(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts) {
  MapResult r;
  const ClassAp at50 = per_class_ap(dets, gts, 0.5);
  r.ap50 = at50.ap;
  r.flagged = at50.flagged;
  r.map50 = mean_of(at50.ap);
  double sum = 0.0;
  const auto thresholds = coco_thresholds();
  for (double t : thresholds) sum += t == 0.5 ? r.map50 : mean_ap_at(dets, gts, t);
  r.map50_95 = sum / static_cast<double>(thresholds.size());
  return r;
}

std::vector<Detection> read_detections(const std::filesystem::path& path) {
  std::vector<Detection> out;
  for_each_json_line(path, [&](const json& j, const std::string& where) {
    Detection d{field<std::string>(j, "image_id", where), field<std::string>(j, "label", where), box_from(j, where),
                j.contains("score") ? field<double>(j, "score", where) : 1.0};
    if (!std::isfinite(d.score) || d.score < 0.0 || d.score > 1.0) invalid(where + ": score must be in [0, 1]");
    out.push_back(std::move(d));
  });
  return out;
}

std::vector<GroundTruth> read_ground_truth(const std::filesystem::path& path) {
  std::vector<GroundTruth> out;
  for_each_json_line(path, [&](const json& j, const std::string& where) {
    out.push_back({field<std::string>(j, "image_id", where), field<std::string>(j, "label", where), box_from(j, where)});
  });
  return out;
}

}  // namespace refsd::evalkit
