// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace refsd::prompt {

/// Attribute categories. Declaration order is the canonical ordering used
/// when enumerating a vocabulary set.
enum class Category {
  kGender,
  kAge,
  kEthnicity,
  kEmotion,
  kFaceAttribute,
  kSkinTone,
  kHair,
  kOccupation,
  kClothing,
};

inline constexpr std::array kAllCategories = {
    Category::kGender,   Category::kAge,  Category::kEthnicity,  Category::kEmotion,  Category::kFaceAttribute,
    Category::kSkinTone, Category::kHair, Category::kOccupation, Category::kClothing,
};

std::string_view to_string(Category category);
Category parse_category(std::string_view name);

/// The four human-perception evaluations.
enum class EvaluationKind { kPhiA, kPhiB, kPhiC, kPhiD };

inline constexpr std::array kAllKinds = {EvaluationKind::kPhiA, EvaluationKind::kPhiB,
                                         EvaluationKind::kPhiC, EvaluationKind::kPhiD};

std::string_view to_string(EvaluationKind kind);  // "phi_A" .. "phi_D"
EvaluationKind parse_kind(std::string_view name);  // accepts phi_A / phi_a / A

struct AttributeVocab {
  Category category;
  std::vector<std::string> values;
};

/// Vocabulary for one evaluation. For phi_C each category's values are the
/// nodes of a translation chain in order.
class VocabularySet {
 public:
  VocabularySet(EvaluationKind kind, std::vector<AttributeVocab> categories);

  EvaluationKind kind() const noexcept { return kind_; }
  const std::vector<AttributeVocab>& categories() const noexcept { return categories_; }
  const AttributeVocab* find(Category category) const noexcept;
  const AttributeVocab& at(Category category) const;
  std::size_t total() const noexcept;

 private:
  EvaluationKind kind_;
  std::vector<AttributeVocab> categories_;
};

/// Adjacent pair on a phi_C translation chain.
struct ChainPair {
  Category category;
  std::string from;
  std::string to;
};

std::vector<ChainPair> chain_pairs(const VocabularySet& chains);

/// Immutable set of vocabularies for all four evaluations, tagged with the
/// asset version it was loaded from.
class VocabularyRegistry {
 public:
  /// Vocabularies compiled into the library (data/vocab/v1).
  static const VocabularyRegistry& builtin();

  /// Loads `<root>/<kind>/<category>.txt` files, e.g. root = data/vocab/v1.
  static VocabularyRegistry load_directory(const std::filesystem::path& root, std::string version);

  const std::string& version() const noexcept { return version_; }
  const VocabularySet& set(EvaluationKind kind) const;

  /// Registered spelling of `value` in `category`, matched case-insensitively
  /// across every evaluation's vocabulary.
  std::optional<std::string> lookup(Category category, std::string_view value) const;

  /// Every registered value for `category`, deduplicated, in registry order.
  std::vector<std::string> all_values(Category category) const;

 private:
  VocabularyRegistry(std::string version, std::vector<VocabularySet> sets);

  std::string version_;
  std::vector<VocabularySet> sets_;
};

inline constexpr std::string_view kBuiltinVocabVersion = "v1";

}  // namespace refsd::prompt
