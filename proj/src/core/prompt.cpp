// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

#include "refsd/prompt.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

#include "refsd/errors.hpp"
#include "rng.hpp"

namespace refsd::prompt {

namespace {

constexpr std::string_view kMediumSuffix = " The portrait is natural and realistic, with sharp focus and high detail.";
constexpr std::string_view kComplexTail =
    " The image is natural, realistic, sharp focus, high detail,  medium format photograph, person , (Nikon DSLR "
    "Camera, 8K resolution, Detailed face features).";

bool is_multi(PromptLevel level) { return level != PromptLevel::kBasic; }

bool starts_with_vowel_sound(std::string_view s) {
  if (s.empty()) return false;
  const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(s.front())));
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

std::string basic_sentence(Category category, const std::string& value) {
  switch (category) {
    case Category::kFaceAttribute: return "A person with " + value;
    case Category::kHair: return "A person with " + value + " hair";
    case Category::kClothing: return "A person " + value;
    case Category::kOccupation:
      return std::string("A person working as ") + (starts_with_vowel_sound(value) ? "an " : "a ") + value + ".";
    default: return "A " + value + " person.";
  }
}

const std::string& attr(const PromptSpec& spec, Category c) {
  auto it = spec.attributes.find(c);
  if (it == spec.attributes.end()) {
    fail(ErrorKind::kSpec, "prompt is missing category " + std::string(to_string(c)));
  }
  return it->second;
}

std::string_view consume_prefix(std::string_view s, std::string_view prefix) {
  if (s.substr(0, prefix.size()) != prefix) {
    fail(ErrorKind::kSpec, "prompt does not match the simple template near '" + std::string(s.substr(0, 32)) + "'");
  }
  return s.substr(prefix.size());
}

}  // namespace

std::string_view to_string(PromptLevel level) {
  switch (level) {
    case PromptLevel::kBasic: return "basic";
    case PromptLevel::kSimple: return "simple";
    case PromptLevel::kMedium: return "medium";
    case PromptLevel::kComplex: return "complex";
  }
  return "unknown";
}

PromptLevel parse_level(std::string_view name) {
  for (PromptLevel l : {PromptLevel::kBasic, PromptLevel::kSimple, PromptLevel::kMedium, PromptLevel::kComplex}) {
    if (to_string(l) == name) return l;
  }
  fail(ErrorKind::kParameter, "unknown prompt level '" + std::string(name) + "'");
}

void validate(const PromptSpec& spec, const VocabularyRegistry& vocab) {
  if (is_multi(spec.level)) {
    for (Category c : kMultiAttributeCategories) attr(spec, c);
    if (spec.attributes.size() != kMultiAttributeCategories.size()) {
      fail(ErrorKind::kSpec, std::string(to_string(spec.level)) + " prompts take exactly age, ethnicity, gender, "
                                                                   "face_attribute and emotion");
    }
  } else if (spec.attributes.size() != 1) {
    fail(ErrorKind::kSpec, "basic prompts take exactly one attribute, got " +
                               std::to_string(spec.attributes.size()));
  }
  for (const auto& [category, value] : spec.attributes) {
    if (!vocab.lookup(category, value)) {
      fail(ErrorKind::kVocabulary,
           "'" + value + "' is not a registered " + std::string(to_string(category)) + " value");
    }
  }
}

std::string attribute_sentence(const PromptSpec& spec) {
  if (!is_multi(spec.level)) {
    if (spec.attributes.size() != 1) fail(ErrorKind::kSpec, "basic prompts take exactly one attribute");
    const auto& [category, value] = *spec.attributes.begin();
    return basic_sentence(category, value);
  }
  const std::string head = "A " + attr(spec, Category::kAge) + " " + attr(spec, Category::kEthnicity) + " " +
                           attr(spec, Category::kGender) + " with " + attr(spec, Category::kFaceAttribute);
  const std::string& emotion = attr(spec, Category::kEmotion);
  switch (spec.level) {
    case PromptLevel::kSimple: return head + ", showing " + emotion + " emotion.";
    case PromptLevel::kMedium:
      return head + ", showing a clearly exaggerated " + emotion + " emotion." + std::string(kMediumSuffix);
    case PromptLevel::kComplex:
      return head + ", and their face is expressing very exaggerated " + emotion + " emotion." +
             std::string(kComplexTail);
    case PromptLevel::kBasic: break;
  }
  return {};
}

PromptText build_prompt(const PromptSpec& spec, const VocabularyRegistry& vocab) {
  validate(spec, vocab);
  std::string positive(kPromptPrefix);
  if (spec.orientation_text && !spec.orientation_text->empty()) positive += " " + *spec.orientation_text;
  positive += " " + attribute_sentence(spec);
  return {std::move(positive), std::string(kNegativePrompt)};
}

PromptSpec parse_simple_prompt(std::string_view positive, const VocabularyRegistry& vocab) {
  std::string_view rest = consume_prefix(positive, std::string(kPromptPrefix) + " A ");
  constexpr std::string_view kTail = " emotion.";
  if (rest.size() < kTail.size() || rest.substr(rest.size() - kTail.size()) != kTail) {
    fail(ErrorKind::kSpec, "prompt does not end with the simple template tail");
  }
  rest.remove_suffix(kTail.size());
  const std::size_t showing = rest.rfind(", showing ");
  if (showing == std::string_view::npos) fail(ErrorKind::kSpec, "prompt lacks the emotion clause");
  PromptSpec spec;
  spec.level = PromptLevel::kSimple;
  spec.attributes[Category::kEmotion] = std::string(rest.substr(showing + 10));
  rest = rest.substr(0, showing);

  // Age, ethnicity and gender values may contain spaces, so match them
  // against the vocabulary in order.
  for (Category c : {Category::kAge, Category::kEthnicity, Category::kGender}) {
    std::string best;
    for (const std::string& v : vocab.all_values(c)) {
      if (v.size() > best.size() && rest.substr(0, v.size() + 1) == v + " ") best = v;
    }
    if (best.empty()) fail(ErrorKind::kVocabulary, "no " + std::string(to_string(c)) + " value at '" +
                                                       std::string(rest.substr(0, 32)) + "'");
    spec.attributes[c] = best;
    rest.remove_prefix(best.size() + 1);
  }
  spec.attributes[Category::kFaceAttribute] = std::string(consume_prefix(rest, "with "));
  validate(spec, vocab);
  return spec;
}

double root_yaw_degrees(std::span<const double> theta) {
  if (theta.size() != kPoseLength) {
    fail(ErrorKind::kShape, "theta must have 72 values, got " + std::to_string(theta.size()));
  }
  const double rx = theta[0], ry = theta[1], rz = theta[2];
  const double angle = std::sqrt(rx * rx + ry * ry + rz * rz);
  // Third column of the Rodrigues rotation matrix: R * (0, 0, 1).
  double fx = 0.0, fz = 1.0;
  if (angle > 1e-12) {
    const double kx = rx / angle, ky = ry / angle, kz = rz / angle;
    const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
    fx = t * kx * kz + s * ky;
    fz = t * kz * kz + c;
  }
  double yaw = std::atan2(fx, fz) * 180.0 / M_PI;
  if (yaw <= -180.0) yaw += 360.0;
  return yaw;
}

std::string prompt_attr(std::span<const double> theta, std::span<const double> beta) {
  if (beta.size() != kShapeLength) {
    fail(ErrorKind::kShape, "beta must have 10 values, got " + std::to_string(beta.size()));
  }
  static constexpr std::array<std::string_view, 4> kHeadings = {"facing the camera", "facing right",
                                                                "facing away from the camera", "facing left"};
  const double yaw = root_yaw_degrees(theta);
  const long sector = static_cast<long>(std::floor((yaw + 45.0) / 90.0));
  return std::string(kHeadings[static_cast<std::size_t>(((sector % 4) + 4) % 4)]);
}

std::size_t attribute_cross_product_size(const VocabularyRegistry& vocab) {
  const VocabularySet& a = vocab.set(EvaluationKind::kPhiA);
  std::size_t n = 1;
  for (Category c : kMultiAttributeCategories) n *= a.at(c).values.size();
  return n;
}

std::vector<PromptSpec> sample_attribute_combos(std::size_t count, std::uint64_t seed,
                                                const VocabularyRegistry& vocab) {
  const std::size_t total = attribute_cross_product_size(vocab);
  if (count < 1 || count > total) {
    fail(ErrorKind::kParameter,
         "count must lie in [1, " + std::to_string(total) + "], got " + std::to_string(count));
  }
  const VocabularySet& a = vocab.set(EvaluationKind::kPhiA);
  // Mixed-radix decoding, age most significant.
  static constexpr std::array kRadixOrder = {Category::kAge, Category::kEthnicity, Category::kGender,
                                             Category::kEmotion, Category::kFaceAttribute};
  rng::Engine eng = rng::engine(seed, rng::stream_id("attribute_combos"));
  std::vector<PromptSpec> out;
  out.reserve(count);
  for (std::size_t index : rng::sample_without_replacement(eng, total, count)) {
    PromptSpec spec;
    for (auto it = kRadixOrder.rbegin(); it != kRadixOrder.rend(); ++it) {
      const auto& values = a.at(*it).values;
      spec.attributes[*it] = values[index % values.size()];
      index /= values.size();
    }
    out.push_back(std::move(spec));
  }
  return out;
}

std::string_view to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::kRandom: return "random";
    case Strategy::kDiversify: return "diversify";
    case Strategy::kPreserve: return "preserve";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view name) {
  for (Strategy s : {Strategy::kRandom, Strategy::kDiversify, Strategy::kPreserve}) {
    if (to_string(s) == name) return s;
  }
  fail(ErrorKind::kParameter, "unknown prompt strategy '" + std::string(name) + "'");
}

PromptSpec assign_strategy(Strategy strategy, const Attributes& labels, std::uint64_t seed,
                           std::size_t batch_index, PromptLevel level, const VocabularyRegistry& vocab) {
  PromptSpec spec;
  spec.level = level;
  if (strategy == Strategy::kPreserve) {
    if (labels.empty()) fail(ErrorKind::kSpec, "preserve strategy requires at least one label");
    for (const auto& [category, value] : labels) {
      auto registered = vocab.lookup(category, value);
      if (!registered) {
        fail(ErrorKind::kVocabulary,
             "'" + value + "' is not a registered " + std::string(to_string(category)) + " value");
      }
      spec.attributes[category] = *registered;
    }
    if (level == PromptLevel::kBasic) {
      validate(spec, vocab);
      return spec;
    }
  } else if (level == PromptLevel::kBasic) {
    fail(ErrorKind::kSpec, std::string(to_string(strategy)) + " strategy needs a multi-attribute level");
  }

  const VocabularySet& a = vocab.set(EvaluationKind::kPhiA);
  rng::Engine eng = rng::engine(seed, rng::mix(rng::stream_id("strategy"), batch_index));
  for (Category c : kMultiAttributeCategories) {
    const auto& values = a.at(c).values;
    if (strategy == Strategy::kDiversify) {
      rng::Engine perm_eng = rng::engine(seed, rng::stream_id(to_string(c)));
      const auto perm = rng::sample_without_replacement(perm_eng, values.size(), values.size());
      spec.attributes[c] = values[perm[batch_index % values.size()]];
    } else {
      const std::string& drawn = values[rng::uniform_index(eng, values.size())];
      spec.attributes.try_emplace(c, drawn);
    }
  }
  validate(spec, vocab);
  return spec;
}

}  // namespace refsd::prompt
