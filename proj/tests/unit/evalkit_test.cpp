// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "refsd/evalkit.hpp"
#include "testing.hpp"

namespace refsd::evalkit {
namespace {

using refsd::testing::expect_error;

std::vector<std::string> source_ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("src" + std::to_string(i));
  return out;
}

// Exact step-function integral of the precision envelope, evaluated at every
// distinct recall level from scratch.
double brute_force_ap(const std::vector<bool>& outcomes, std::size_t gts) {
  if (gts == 0) return 0.0;
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

TEST(Campaign, PhiBTableOneArithmetic) {
  const CampaignSpec c = build_campaign(EvaluationKind::kPhiB, source_ids(250), 1);
  EXPECT_EQ(c.prompts.size(), 50u);
  EXPECT_EQ(c.tasks.size(), 12500u);
  EXPECT_EQ(c.required_annotations(), 37500u);
  for (const auto& p : c.prompts) {
    EXPECT_EQ(p.spec.level, prompt::PromptLevel::kBasic);
    EXPECT_EQ(p.spec.attributes.size(), 1u);
  }
}

TEST(Campaign, PhiCChainsAndPairs) {
  const CampaignSpec c = build_campaign(EvaluationKind::kPhiC, source_ids(250), 1);
  EXPECT_EQ(c.prompts.size(), 33u);
  EXPECT_EQ(c.pairs.size(), 29u);
  EXPECT_EQ(c.tasks.size(), 8250u);
  EXPECT_EQ(c.required_annotations(), 24750u);
  std::size_t starts = 0;
  for (std::size_t j = 0; j < 33; ++j) {
    const Task& t = c.tasks[j];
    ASSERT_EQ(t.images.size(), 2u);
    if (t.images[0] == t.source) ++starts;
  }
  EXPECT_EQ(starts, 4u);
  std::size_t transitions = 0;
  for (const auto& p : c.prompts) transitions += p.attribute.find(" -> ") != std::string::npos;
  EXPECT_EQ(transitions, c.pairs.size());
}

TEST(Campaign, PhiDCoversEveryRegisteredValue) {
  const CampaignSpec c = build_campaign(EvaluationKind::kPhiD, source_ids(250), 1);
  const std::size_t values = prompt::VocabularyRegistry::builtin().set(EvaluationKind::kPhiD).total();
  EXPECT_EQ(c.prompts.size(), values);
  EXPECT_EQ(c.tasks.size(), 250 * values);
}

TEST(Campaign, PhiAThreeLevelsPerCombination) {
  const CampaignSpec c = build_campaign(EvaluationKind::kPhiA, source_ids(33), 7);
  EXPECT_EQ(c.prompts.size(), 1188u);
  EXPECT_EQ(c.tasks.size(), 3564u);
  EXPECT_EQ(c.required_annotations(), 10692u);
  std::map<std::string, int> per_source;
  std::map<prompt::PromptLevel, int> per_level;
  for (const auto& t : c.tasks) {
    ++per_source[t.source];
    ++per_level[t.level];
  }
  EXPECT_EQ(per_source.size(), 33u);
  for (const auto& [s, n] : per_source) EXPECT_EQ(n, 108);
  for (const auto& [l, n] : per_level) EXPECT_EQ(n, 1188);
  EXPECT_NE(c.tasks[0].text, c.tasks[1].text);
}

TEST(Campaign, SeededAndSerializable) {
  const CampaignSpec a = build_campaign(EvaluationKind::kPhiA, source_ids(5), 3, {3, 10});
  const CampaignSpec b = build_campaign(EvaluationKind::kPhiA, source_ids(5), 3, {3, 10});
  const CampaignSpec other = build_campaign(EvaluationKind::kPhiA, source_ids(5), 4, {3, 10});
  EXPECT_EQ(campaign_to_json(a), campaign_to_json(b));
  EXPECT_NE(campaign_to_json(a), campaign_to_json(other));
  const CampaignSpec back = parse_campaign(campaign_to_json(a));
  EXPECT_EQ(campaign_to_json(back), campaign_to_json(a));
  EXPECT_NE(back.find_task("phi_A-t000017"), nullptr);
  EXPECT_EQ(back.find_task("phi_A-t999999"), nullptr);
}

TEST(Campaign, Errors) {
  expect_error(ErrorKind::kParameter, [] { build_campaign(EvaluationKind::kPhiB, {}, 1); });
  expect_error(ErrorKind::kParameter, [] { build_campaign(EvaluationKind::kPhiB, {"a", "a"}, 1); });
  expect_error(ErrorKind::kParameter, [] { build_campaign(EvaluationKind::kPhiB, {"a"}, 1, {0, 396}); });
  expect_error(ErrorKind::kValidation, [] { parse_campaign(R"({"schema":"other"})"); });
}

AnnotationRecord rec(std::string task, std::string who, int score) { return {std::move(task), std::move(who), score, 0, {}}; }

TEST(Aggregate, MeansAndSampleStd) {
  const auto r1 = aggregate_groups({{"a", 4}, {"a", 4}, {"a", 4}});
  ASSERT_EQ(r1.size(), 1u);
  EXPECT_DOUBLE_EQ(r1[0].mean, 4.0);
  EXPECT_DOUBLE_EQ(r1[0].std, 0.0);
  const auto r2 = aggregate_groups({{"b", 3}, {"b", 5}});
  EXPECT_DOUBLE_EQ(r2[0].mean, 4.0);
  EXPECT_NEAR(r2[0].std, std::sqrt(2.0), 1e-12);
  const auto r3 = aggregate_groups({{"c", 2}});
  EXPECT_TRUE(r3[0].single);
  EXPECT_EQ(r3[0].std, 0.0);
  EXPECT_TRUE(aggregate_groups({}).empty());
}

TEST(Aggregate, GroupsPartitionRecords) {
  const CampaignSpec c = build_campaign(EvaluationKind::kPhiB, source_ids(4), 1);
  std::mt19937 rng(5);
  std::vector<AnnotationRecord> records;
  for (const auto& t : c.tasks)
    for (const char* who : {"a1", "a2"}) records.push_back(rec(t.id, who, 1 + int(rng() % 5)));
  for (GroupBy g : {GroupBy::kAttribute, GroupBy::kCategory, GroupBy::kLevel}) {
    std::size_t total = 0;
    for (const auto& row : aggregate_scores(c, records, g)) {
      total += row.count;
      EXPECT_GE(row.mean, 1.0);
      EXPECT_LE(row.mean, 5.0);
    }
    EXPECT_EQ(total, records.size());
  }
  EXPECT_EQ(aggregate_scores(c, records, GroupBy::kCategory).size(), 3u);
  EXPECT_EQ(aggregate_scores(c, records, GroupBy::kAttribute).size(), 50u);
  expect_error(ErrorKind::kValidation, [&] { aggregate_scores(c, {rec("nope", "a", 3)}, GroupBy::kLevel); });
}

TEST(Aggregate, CsvHasOneRowPerGroup) {
  const std::string csv = scores_csv(aggregate_groups({{"x,y", 3}, {"z", 5}}));
  EXPECT_EQ(csv, "group,mean,std,count,single\n\"x,y\",3,0,1,true\nz,5,0,1,true\n");
}

TEST(Annotation, NdjsonRoundTripAndValidation) {
  std::vector<AnnotationRecord> records{rec("t1", "a", 5), {"t2", "b", 1, 1234, "left"}};
  std::stringstream ss;
  write_annotations(ss, records);
  EXPECT_EQ(read_annotations(ss), records);
  expect_error(ErrorKind::kValidation, [] { parse_annotation(R"({"task_id":"t","annotator_id":"a","score":0})"); });
  expect_error(ErrorKind::kValidation, [] { parse_annotation(R"({"task_id":"t","annotator_id":"a","score":6})"); });
  expect_error(ErrorKind::kValidation, [] { parse_annotation(R"({"task_id":"t","score":3})"); });
  expect_error(ErrorKind::kValidation,
               [] { parse_annotation(R"({"task_id":"t","annotator_id":"a","score":3,"pair_position":"up"})"); });
}

TEST(Alpha, ParallelRatersGiveOne) {
  EXPECT_EQ(cronbach_alpha({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}}), 1.0);
  EXPECT_EQ(cronbach_alpha({{1, 5, 2, 4}, {1, 5, 2, 4}}), 1.0);
}

TEST(Alpha, ThreeByFourFixture) {
  EXPECT_NEAR(cronbach_alpha({{1, 2, 3, 4}, {2, 2, 4, 4}, {1, 3, 3, 5}}), 28.0 / 30.0, 1e-9);
}

TEST(Alpha, DegenerateAndShapeErrors) {
  expect_error(ErrorKind::kDegenerate, [] { cronbach_alpha({{1, 2, 3}, {3, 2, 1}, {2, 2, 2}}); });
  expect_error(ErrorKind::kShape, [] { cronbach_alpha({{1, 2, 3}}); });
  expect_error(ErrorKind::kShape, [] { cronbach_alpha({{1}, {2}}); });
  expect_error(ErrorKind::kShape, [] { cronbach_alpha({{1, 2}, {1, 2, 3}}); });
}

TEST(Alpha, ShiftOfOneRaterLeavesAlphaUnchanged) {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    RatingMatrix m(3, std::vector<double>(8));
    for (auto& row : m)
      for (auto& v : row) v = 1 + int(rng() % 5);
    double base;
    try {
      base = cronbach_alpha(m);
    } catch (const Error&) {
      continue;
    }
    for (auto& v : m[trial % 3]) v += 2.0;
    EXPECT_NEAR(cronbach_alpha(m), base, 1e-9);
  }
}

TEST(Alpha, RatingMatrixDropsIncompleteTasks) {
  const std::vector<AnnotationRecord> records{rec("t1", "b", 2), rec("t1", "a", 1), rec("t1", "c", 3),
                                              rec("t2", "a", 4), rec("t2", "d", 4), rec("t3", "a", 5),
                                              rec("t3", "b", 4), rec("t3", "e", 3)};
  const RatingMatrix m = rating_matrix(records, 3);
  ASSERT_EQ(m.size(), 3u);
  EXPECT_EQ(m[0], (std::vector<double>{1, 5}));
  EXPECT_EQ(m[1], (std::vector<double>{2, 4}));
  EXPECT_EQ(m[2], (std::vector<double>{3, 3}));
}

TEST(Accuracy, FixturesAndValidation) {
  auto pl = [](std::string p, std::string t) { return PredictionLabel{"img", "emotion", p, t}; };
  EXPECT_EQ(classification_accuracy({pl("Fear", "Fear"), pl("Anger", "Anger")}).at("emotion"), 1.0);
  EXPECT_EQ(classification_accuracy({pl("Fear", "Anger")}).at("emotion"), 0.0);
  EXPECT_EQ(classification_accuracy({pl("Fear", "Fear"), pl("Fear", "Fear"), pl("Happiness", "Happiness"),
                                     pl("Fear", "Sadness")})
                .at("emotion"),
            0.75);
  expect_error(ErrorKind::kValidation, [&] { classification_accuracy({}); });
  expect_error(ErrorKind::kValidation, [&] { classification_accuracy({pl("Bored", "Fear")}); });
  expect_error(ErrorKind::kValidation, [] { classification_accuracy({{"i", "mood", "a", "a"}}); });
  EXPECT_EQ(rafdb_labels("gender").size(), 3u);
}

TEST(Iou, Fixtures) {
  EXPECT_EQ(iou({0, 0, 10, 10}, {0, 0, 10, 10}), 1.0);
  EXPECT_EQ(iou({0, 0, 10, 10}, {20, 20, 30, 30}), 0.0);
  EXPECT_NEAR(iou({0, 0, 10, 10}, {5, 0, 15, 10}), 1.0 / 3.0, 1e-12);
  expect_error(ErrorKind::kShape, [] { iou({0, 0, 0, 10}, {0, 0, 1, 1}); });
}

TEST(Match, GreedyFixtures) {
  auto one = match_detections({{0, 0, 10, 10}}, {0.9}, {{0, 0, 10, 10}}, 0.5);
  EXPECT_TRUE(one.matches[0].true_positive);
  EXPECT_EQ(one.false_negatives, 0u);
  // IoU 0.4: intersection 40, union 100.
  auto low = match_detections({{0, 0, 10, 10}}, {0.9}, {{0, 0, 4, 10}}, 0.5);
  EXPECT_FALSE(low.matches[0].true_positive);
  EXPECT_EQ(low.false_negatives, 1u);
  auto two = match_detections({{0, 0, 10, 10}, {0, 0, 10, 11}}, {0.8, 0.9}, {{0, 0, 10, 10}}, 0.5);
  ASSERT_EQ(two.matches.size(), 2u);
  EXPECT_EQ(two.matches[0].detection, 1u);
  EXPECT_TRUE(two.matches[0].true_positive);
  EXPECT_FALSE(two.matches[1].true_positive);
  auto none = match_detections({}, {}, {{0, 0, 1, 1}}, 0.5);
  EXPECT_EQ(none.false_negatives, 1u);
}

TEST(AveragePrecision, FiveDetectionThreeTruthFixture) {
  const std::vector<bool> seq{true, false, true, true, false};
  const ApResult r = average_precision(seq, 3);
  EXPECT_NEAR(r.ap, brute_force_ap(seq, 3), 1e-12);
  EXPECT_NEAR(r.ap, 1.0 / 3.0 + 0.75 * (2.0 / 3.0), 1e-12);
  EXPECT_EQ(r.precision.size(), 5u);
}

TEST(AveragePrecision, EdgeCases) {
  EXPECT_EQ(average_precision({true, true}, 2).ap, 1.0);
  EXPECT_EQ(average_precision({}, 4).ap, 0.0);
  const ApResult orphan = average_precision({false}, 0);
  EXPECT_EQ(orphan.ap, 0.0);
  EXPECT_TRUE(orphan.flagged);
}

TEST(AveragePrecision, MatchesBruteForceOnRandomSequences) {
  std::mt19937 rng(23);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = rng() % 15;
    std::vector<bool> seq;
    std::size_t tps = 0;
    for (std::size_t i = 0; i < n; ++i) {
      seq.push_back(rng() % 2);
      tps += seq.back();
    }
    const std::size_t gts = tps + rng() % 4;
    EXPECT_NEAR(average_precision(seq, gts).ap, brute_force_ap(seq, gts), 1e-12);
  }
}

struct DetectionSet {
  std::vector<Detection> dets;
  std::vector<GroundTruth> gts;
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

TEST(MeanAp, PerfectAndEmpty) {
  std::vector<GroundTruth> gts{{"a", "car", {0, 0, 10, 10}}, {"b", "car", {5, 5, 9, 9}}, {"b", "bus", {1, 1, 3, 4}}};
  std::vector<Detection> dets;
  for (const auto& g : gts) dets.push_back({g.image_id, g.label, g.box, 0.7});
  const MapResult perfect = mean_ap(dets, gts);
  EXPECT_EQ(perfect.map50, 1.0);
  EXPECT_EQ(perfect.map50_95, 1.0);
  const MapResult empty = mean_ap({}, gts);
  EXPECT_EQ(empty.map50, 0.0);
  EXPECT_EQ(empty.map50_95, 0.0);
  dets.push_back({"a", "dog", {0, 0, 2, 2}, 0.1});
  const MapResult orphan = mean_ap(dets, gts);
  EXPECT_EQ(orphan.map50, 1.0);
  EXPECT_EQ(orphan.flagged, std::vector<std::string>{"dog"});
}

TEST(MeanAp, LooseThresholdDominatesOnRandomSets) {
  std::mt19937 rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const DetectionSet s = random_set(rng);
    const MapResult r = mean_ap(s.dets, s.gts);
    EXPECT_GE(r.map50 + 1e-12, r.map50_95) << "trial " << trial;
  }
}

TEST(MeanAp, RankOnlyDependenceOnRandomSets) {
  std::mt19937 rng(43);
  for (int trial = 0; trial < 100; ++trial) {
    const DetectionSet s = random_set(rng);
    DetectionSet t = s;
    for (auto& d : t.dets) d.score = std::pow(d.score, 3.0) * 0.5 + 0.1;
    const MapResult a = mean_ap(s.dets, s.gts);
    const MapResult b = mean_ap(t.dets, t.gts);
    EXPECT_EQ(a.map50, b.map50);
    EXPECT_EQ(a.map50_95, b.map50_95);
  }
}

TEST(MeanAp, ReadsNdjson) {
  refsd::testing::TempDir dir("det");
  {
    std::ofstream d(dir.path() / "pred.ndjson");
    d << R"({"image_id":"a","label":"car","x0":0,"y0":0,"x1":10,"y1":10,"score":0.9})" << "\n\n";
    std::ofstream g(dir.path() / "gt.ndjson");
    g << R"({"image_id":"a","label":"car","x0":0,"y0":0,"x1":10,"y1":10})" << "\n";
  }
  const auto dets = read_detections(dir.path() / "pred.ndjson");
  const auto gts = read_ground_truth(dir.path() / "gt.ndjson");
  ASSERT_EQ(dets.size(), 1u);
  EXPECT_EQ(mean_ap(dets, gts).map50, 1.0);
  {
    std::ofstream bad(dir.path() / "bad.ndjson");
    bad << R"({"image_id":"a","label":"car","x0":5,"y0":0,"x1":1,"y1":10})" << "\n";
  }
  expect_error(ErrorKind::kShape, [&] { read_ground_truth(dir.path() / "bad.ndjson"); });
}

}  // namespace
}  // namespace refsd::evalkit
