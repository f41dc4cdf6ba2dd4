// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "refsd/prompt.hpp"
#include "refsd/vocabulary.hpp"

namespace refsd::evalkit {

using prompt::Category;
using prompt::EvaluationKind;

inline constexpr int kDefaultAnnotatorsPerImage = 3;
inline constexpr std::size_t kDefaultPhiACombosPerLevel = 396;
inline constexpr std::array kPhiALevels = {prompt::PromptLevel::kSimple, prompt::PromptLevel::kMedium,
                                           prompt::PromptLevel::kComplex};

struct CampaignPrompt {
  std::string id;  // e.g. "phi_B-p0007"
  prompt::PromptSpec spec;
  std::string text;       // positive prompt
  std::string category;   // category name, "combination" for phi_A
  std::string attribute;  // shown attribute; "A -> B" for phi_C transitions
};

struct Task {
  std::string id;  // e.g. "phi_B-t000123"
  std::string source;
  std::size_t prompt_index = 0;
  prompt::PromptLevel level = prompt::PromptLevel::kBasic;
  std::string text;  // positive prompt at `level`
  /// Synthetic image ids shown to the rater. phi_C tasks carry two: the
  /// previous chain node (or the source image for a chain start) and this node.
  std::vector<std::string> images;
};

struct CampaignOptions {
  int annotators_per_image = kDefaultAnnotatorsPerImage;
  std::size_t phi_a_combos_per_level = kDefaultPhiACombosPerLevel;
};

struct CampaignSpec {
  EvaluationKind kind = EvaluationKind::kPhiB;
  std::vector<std::string> sources;
  std::vector<CampaignPrompt> prompts;
  std::vector<prompt::ChainPair> pairs;  // phi_C only
  std::vector<Task> tasks;
  int annotators_per_image = kDefaultAnnotatorsPerImage;
  std::uint64_t seed = 0;
  std::string vocabulary_version;

  std::size_t required_annotations() const noexcept {
    return tasks.size() * static_cast<std::size_t>(annotators_per_image);
  }
  const Task* find_task(std::string_view id) const;
};

/// Table 1 campaigns.
///  - phi_A: phi_a_combos_per_level * 3 sampled attribute combinations, dealt
///    round-robin to the sources, each rendered at simple, medium and complex.
///  - phi_B: one basic prompt per phi_B attribute value, for every source.
///  - phi_C: one basic prompt per chain node; each task pairs a node with its
///    predecessor (chain starts pair with the source image).
///  - phi_D: one basic prompt per phi_D attribute value, for every source.
CampaignSpec build_campaign(EvaluationKind kind, std::vector<std::string> sources, std::uint64_t seed,
                            const CampaignOptions& options = {},
                            const prompt::VocabularyRegistry& vocab = prompt::VocabularyRegistry::builtin());

std::string campaign_to_json(const CampaignSpec& spec);
CampaignSpec parse_campaign(std::string_view json_text);

struct AnnotationRecord {
  std::string task_id;
  std::string annotator_id;
  int score = 0;
  std::int64_t timestamp_ms = 0;
  std::optional<std::string> pair_position;  // "left" / "right", phi_C only

  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

/// Throws kValidation unless 1 <= score <= 5, ids are non-empty and
/// pair_position is "left" or "right" when present.
void validate(const AnnotationRecord& record);

std::string to_ndjson_line(const AnnotationRecord& record);
AnnotationRecord parse_annotation(std::string_view json_line);
std::vector<AnnotationRecord> read_annotations(std::istream& in);
std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path);
void write_annotations(std::ostream& out, const std::vector<AnnotationRecord>& records);

enum class GroupBy { kAttribute, kCategory, kLevel };
std::string_view to_string(GroupBy g);
GroupBy parse_group_by(std::string_view name);

struct ScoreRow {
  std::string group;
  double mean = 0.0;
  double std = 0.0;  // sample (n - 1); 0 for a single record
  std::size_t count = 0;
  bool single = false;

  friend bool operator==(const ScoreRow&, const ScoreRow&) = default;
};

/// Mean and sample standard deviation per group, groups in ascending order.
/// Records for unknown tasks are kValidation errors.
std::vector<ScoreRow> aggregate_scores(const CampaignSpec& campaign, const std::vector<AnnotationRecord>& records,
                                       GroupBy group_by);
/// Same statistics for already-labelled scores.
std::vector<ScoreRow> aggregate_groups(const std::vector<std::pair<std::string, int>>& labelled);

std::string scores_csv(const std::vector<ScoreRow>& rows);

/// Raters x items score matrix.
using RatingMatrix = std::vector<std::vector<double>>;

/// k/(k-1) * (1 - sum of rater variances / variance of item totals), sample
/// variances. Throws kShape for fewer than 2 raters or items or ragged rows,
/// kDegenerate when the item totals have zero variance.
double cronbach_alpha(const RatingMatrix& matrix);

/// Tasks with exactly `raters_per_task` records, raters ordered by annotator
/// id within each task; other tasks are dropped (listwise deletion).
RatingMatrix rating_matrix(const std::vector<AnnotationRecord>& records, int raters_per_task);

struct PredictionLabel {
  std::string image_id;
  std::string category;  // rafdb label set name: emotion, gender, race, age
  std::string predicted;
  std::string truth;
};

/// Registered RAF-DB label values for `category`.
const std::vector<std::string>& rafdb_labels(std::string_view category);

/// correct / total per category. Throws kValidation for empty input or labels
/// outside the registered sets.
std::map<std::string, double> classification_accuracy(const std::vector<PredictionLabel>& labels);
std::vector<PredictionLabel> read_predictions(const std::filesystem::path& path);

struct Box {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  friend bool operator==(const Box&, const Box&) = default;
};

struct Detection {
  std::string image_id;
  std::string label;
  Box box;
  double score = 1.0;
};

struct GroundTruth {
  std::string image_id;
  std::string label;
  Box box;
};

double iou(const Box& a, const Box& b);

struct Match {
  std::size_t detection = 0;  // index into the input list
  double score = 0.0;
  bool true_positive = false;
};

struct MatchResult {
  std::vector<Match> matches;  // in score order
  std::size_t false_negatives = 0;
};

/// Greedy matching for one image and class: detections in descending score
/// (ties by input order) each take the unmatched ground truth of highest IoU
/// at or above `threshold`.
MatchResult match_detections(const std::vector<Box>& dets, const std::vector<double>& scores,
                             const std::vector<Box>& gts, double threshold);

struct ApResult {
  double ap = 0.0;
  bool flagged = false;  // detections without any ground truth
  std::vector<double> precision;
  std::vector<double> recall;
};

/// All-points area under the monotone precision envelope. `outcomes` are
/// true-positive flags already in descending score order.
ApResult average_precision(const std::vector<bool>& outcomes, std::size_t gt_count);

struct MapResult {
  double map50 = 0.0;
  double map50_95 = 0.0;
  std::map<std::string, double> ap50;  // per class
  std::vector<std::string> flagged;    // classes with detections but no ground truth
};

/// Thresholds 0.50, 0.55, ..., 0.95.
std::vector<double> coco_thresholds();

/// Class mAP over classes with at least one ground truth box.
MapResult mean_ap(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts);
double mean_ap_at(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts, double threshold);

/// NDJSON rows {image_id, label, x0, y0, x1, y1, score}.
std::vector<Detection> read_detections(const std::filesystem::path& path);
std::vector<GroundTruth> read_ground_truth(const std::filesystem::path& path);

}  // namespace refsd::evalkit
