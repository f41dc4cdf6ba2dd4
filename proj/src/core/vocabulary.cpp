// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

#include "refsd/vocabulary.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "refsd/assets.hpp"
#include "refsd/codec.hpp"
#include "refsd/errors.hpp"

namespace refsd::prompt {

namespace {

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

std::string kind_dir(EvaluationKind kind) {
  std::string s(to_string(kind));
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

std::string_view to_string(Category category) {
  switch (category) {
    case Category::kGender: return "gender";
    case Category::kAge: return "age";
    case Category::kEthnicity: return "ethnicity";
    case Category::kEmotion: return "emotion";
    case Category::kFaceAttribute: return "face_attribute";
    case Category::kSkinTone: return "skin_tone";
    case Category::kHair: return "hair";
    case Category::kOccupation: return "occupation";
    case Category::kClothing: return "clothing";
  }
  return "unknown";
}

Category parse_category(std::string_view name) {
  for (Category c : kAllCategories) {
    if (iequals(to_string(c), name)) return c;
  }
  fail(ErrorKind::kSpec, "unknown attribute category '" + std::string(name) + "'");
}

std::string_view to_string(EvaluationKind kind) {
  switch (kind) {
    case EvaluationKind::kPhiA: return "phi_A";
    case EvaluationKind::kPhiB: return "phi_B";
    case EvaluationKind::kPhiC: return "phi_C";
    case EvaluationKind::kPhiD: return "phi_D";
  }
  return "unknown";
}

EvaluationKind parse_kind(std::string_view name) {
  for (EvaluationKind k : kAllKinds) {
    const std::string_view full = to_string(k);
    if (iequals(full, name) || iequals(full.substr(4), name)) return k;
  }
  fail(ErrorKind::kParameter, "unknown evaluation kind '" + std::string(name) + "'");
}

VocabularySet::VocabularySet(EvaluationKind kind, std::vector<AttributeVocab> categories)
    : kind_(kind), categories_(std::move(categories)) {
  std::sort(categories_.begin(), categories_.end(),
            [](const AttributeVocab& a, const AttributeVocab& b) { return a.category < b.category; });
  for (std::size_t i = 0; i < categories_.size(); ++i) {
    const AttributeVocab& v = categories_[i];
    if (i > 0 && categories_[i - 1].category == v.category) {
      fail(ErrorKind::kSpec, "duplicate category " + std::string(to_string(v.category)));
    }
    if (v.values.empty()) {
      fail(ErrorKind::kSpec, std::string(to_string(kind)) + "/" + std::string(to_string(v.category)) +
                                 ": empty vocabulary");
    }
    std::set<std::string> seen;
    for (const std::string& value : v.values) {
      if (!seen.insert(value).second) {
        fail(ErrorKind::kSpec, std::string(to_string(kind)) + "/" + std::string(to_string(v.category)) +
                                   ": duplicate value '" + value + "'");
      }
    }
  }
}

const AttributeVocab* VocabularySet::find(Category category) const noexcept {
  for (const AttributeVocab& v : categories_) {
    if (v.category == category) return &v;
  }
  return nullptr;
}

const AttributeVocab& VocabularySet::at(Category category) const {
  if (const AttributeVocab* v = find(category)) return *v;
  fail(ErrorKind::kSpec, std::string(to_string(kind_)) + " has no category " +
                             std::string(to_string(category)));
}

std::size_t VocabularySet::total() const noexcept {
  std::size_t n = 0;
  for (const AttributeVocab& v : categories_) n += v.values.size();
  return n;
}

std::vector<ChainPair> chain_pairs(const VocabularySet& chains) {
  std::vector<ChainPair> pairs;
  for (const AttributeVocab& v : chains.categories()) {
    for (std::size_t i = 1; i < v.values.size(); ++i) {
      pairs.push_back({v.category, v.values[i - 1], v.values[i]});
    }
  }
  return pairs;
}

VocabularyRegistry::VocabularyRegistry(std::string version, std::vector<VocabularySet> sets)
    : version_(std::move(version)), sets_(std::move(sets)) {}

const VocabularyRegistry& VocabularyRegistry::builtin() {
  static const VocabularyRegistry registry = [] {
    std::vector<VocabularySet> sets;
    for (EvaluationKind kind : kAllKinds) {
      std::vector<AttributeVocab> cats;
      for (Category c : kAllCategories) {
        const std::string path = "vocab/" + std::string(kBuiltinVocabVersion) + "/" + kind_dir(kind) + "/" +
                                 std::string(to_string(c)) + ".txt";
        if (auto contents = assets::find(path)) cats.push_back({c, assets::lines(*contents)});
      }
      sets.emplace_back(kind, std::move(cats));
    }
    return VocabularyRegistry(std::string(kBuiltinVocabVersion), std::move(sets));
  }();
  return registry;
}

VocabularyRegistry VocabularyRegistry::load_directory(const std::filesystem::path& root, std::string version) {
  std::vector<VocabularySet> sets;
  for (EvaluationKind kind : kAllKinds) {
    std::vector<AttributeVocab> cats;
    for (Category c : kAllCategories) {
      const auto path = root / kind_dir(kind) / (std::string(to_string(c)) + ".txt");
      if (std::filesystem::exists(path)) cats.push_back({c, assets::lines(codec::read_file(path))});
    }
    if (cats.empty()) fail(ErrorKind::kIo, "no vocabulary files under " + (root / kind_dir(kind)).string());
    sets.emplace_back(kind, std::move(cats));
  }
  return VocabularyRegistry(std::move(version), std::move(sets));
}

const VocabularySet& VocabularyRegistry::set(EvaluationKind kind) const {
  for (const VocabularySet& s : sets_) {
    if (s.kind() == kind) return s;
  }
  fail(ErrorKind::kSpec, "no vocabulary for " + std::string(to_string(kind)));
}

std::optional<std::string> VocabularyRegistry::lookup(Category category, std::string_view value) const {
  for (const VocabularySet& s : sets_) {
    if (const AttributeVocab* v = s.find(category)) {
      for (const std::string& candidate : v->values) {
        if (iequals(candidate, value)) return candidate;
      }
    }
  }
  return std::nullopt;
}

std::vector<std::string> VocabularyRegistry::all_values(Category category) const {
  std::vector<std::string> out;
  for (const VocabularySet& s : sets_) {
    if (const AttributeVocab* v = s.find(category)) {
      for (const std::string& value : v->values) {
        if (std::find(out.begin(), out.end(), value) == out.end()) out.push_back(value);
      }
    }
  }
  return out;
}

}  // namespace refsd::prompt
