// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "refsd/vocabulary.hpp"

namespace refsd::prompt {

enum class PromptLevel { kBasic, kSimple, kMedium, kComplex };

std::string_view to_string(PromptLevel level);
PromptLevel parse_level(std::string_view name);

using Attributes = std::map<Category, std::string>;

/// Attribute assignment at a complexity level. Basic carries exactly one
/// attribute; simple, medium and complex carry age, ethnicity, gender,
/// face_attribute and emotion.
struct PromptSpec {
  PromptLevel level = PromptLevel::kSimple;
  Attributes attributes;
  std::optional<std::string> orientation_text;

  friend bool operator==(const PromptSpec&, const PromptSpec&) = default;
};

struct PromptText {
  std::string positive;
  std::string negative;
};

inline constexpr std::string_view kPromptPrefix = "seen from front,";

inline constexpr std::string_view kNegativePrompt =
    "drawing, painting, blurry, smooth, cgi, anime, rendering, black and white, oily, wet, shining light, "
    "hard light, special effect, nudity, sexy, erotic, topless, sports clothing";

/// Categories a multi-attribute level requires, in template order.
inline constexpr std::array kMultiAttributeCategories = {Category::kAge, Category::kEthnicity, Category::kGender,
                                                         Category::kFaceAttribute, Category::kEmotion};

/// Throws kSpec for level / attribute-count mismatches and kVocabulary for
/// values absent from every registered vocabulary of their category.
void validate(const PromptSpec& spec, const VocabularyRegistry& vocab = VocabularyRegistry::builtin());

/// The templated sentence without prefix or orientation text.
std::string attribute_sentence(const PromptSpec& spec);

/// Prefix, optional orientation text, then the attribute sentence; plus the
/// fixed negative prompt.
PromptText build_prompt(const PromptSpec& spec, const VocabularyRegistry& vocab = VocabularyRegistry::builtin());

/// Inverse of build_prompt for level simple without orientation text.
PromptSpec parse_simple_prompt(std::string_view positive,
                               const VocabularyRegistry& vocab = VocabularyRegistry::builtin());

inline constexpr std::size_t kPoseLength = 72;
inline constexpr std::size_t kShapeLength = 10;

/// Heading of the body about the vertical axis, in degrees within
/// (-180, 180]. The root joint's axis-angle is read in a y-up body frame
/// where the identity rotation faces the camera; positive yaw turns the body
/// toward image right.
double root_yaw_degrees(std::span<const double> theta);

/// Orientation phrase for a pose: 90 degree sectors centred on 0 ("facing
/// the camera"), 90 ("facing right"), 180 ("facing away from the camera")
/// and -90 ("facing left"). Sectors are half-open [centre - 45, centre + 45),
/// so a boundary yaw belongs to the counter-clockwise neighbour. Shape is
/// accepted for interface completeness and does not affect the text.
std::string prompt_attr(std::span<const double> theta, std::span<const double> beta);

/// Seeded uniform sample without replacement from the phi_A cross product
/// (age x ethnicity x gender x emotion x face attribute). Specs are level
/// simple.
std::vector<PromptSpec> sample_attribute_combos(std::size_t count, std::uint64_t seed,
                                                const VocabularyRegistry& vocab = VocabularyRegistry::builtin());

std::size_t attribute_cross_product_size(const VocabularyRegistry& vocab = VocabularyRegistry::builtin());

enum class Strategy { kRandom, kDiversify, kPreserve };

std::string_view to_string(Strategy strategy);
Strategy parse_strategy(std::string_view name);

/// Prompt-controlled pseudonymization.
///  - random: independent seeded draw per category.
///  - diversify: seeded round-robin per category keyed on `batch_index`, so
///    marginal counts over any batch 0..n-1 differ by at most one.
///  - preserve: copies `labels`, fills remaining categories as random.
PromptSpec assign_strategy(Strategy strategy, const Attributes& labels, std::uint64_t seed,
                           std::size_t batch_index = 0, PromptLevel level = PromptLevel::kSimple,
                           const VocabularyRegistry& vocab = VocabularyRegistry::builtin());

}  // namespace refsd::prompt
