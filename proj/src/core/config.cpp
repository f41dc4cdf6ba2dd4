// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

#include <json.hpp>

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <set>

#include "refsd/codec.hpp"
#include "refsd/errors.hpp"
#include "refsd/pipeline.hpp"

namespace refsd::pipeline {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& why) {
  fail(ErrorKind::kParameter, "config field '" + field + "': " + why);
}

template <typename T>
T get(const json& j, const std::string& field) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    bad(field, "unexpected type " + std::string(j.type_name()));
  }
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) bad(where, "expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) bad(where.empty() ? key : where + "." + key, "unknown key");
  }
}

prompt::Attributes parse_attributes(const json& j, const std::string& field) {
  if (!j.is_object()) bad(field, "expected an object of category -> value");
  prompt::Attributes out;
  for (const auto& [key, value] : j.items()) {
    try {
      out[prompt::parse_category(key)] = get<std::string>(value, field + "." + key);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kParameter) throw;
      bad(field + "." + key, e.what());
    }
  }
  return out;
}

json attributes_json(const prompt::Attributes& attrs) {
  json j = json::object();
  for (const auto& [cat, value] : attrs) j[std::string(to_string(cat))] = value;
  return j;
}

std::uint64_t parse_u64(const std::string& text, const std::string& field) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(text, &used, 0);
    if (used != text.size() || text.front() == '-') bad(field, "not an unsigned integer: " + text);
    return v;
  } catch (const std::logic_error&) {
    bad(field, "not an unsigned integer: " + text);
  }
}

double parse_double(const std::string& text, const std::string& field) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) bad(field, "not a number: " + text);
    return v;
  } catch (const std::logic_error&) {
    bad(field, "not a number: " + text);
  }
}

int parse_int(const std::string& text, const std::string& field) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used != text.size()) bad(field, "not an integer: " + text);
    return v;
  } catch (const std::logic_error&) {
    bad(field, "not an integer: " + text);
  }
}

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

void PipelineConfig::validate() const {
  if (!std::isfinite(feather_sigma) || feather_sigma < 0) bad("feather_sigma", "must be finite and >= 0");
  if (!std::isfinite(crop_pad_fraction) || crop_pad_fraction < 0) bad("crop_pad_fraction", "must be finite and >= 0");
  if (generator_resolution < kMinGeneratorResolution) {
    bad("generator_resolution", "must be >= " + std::to_string(kMinGeneratorResolution));
  }
  if (!(canny.sigma > 0) || !std::isfinite(canny.sigma)) bad("canny.sigma", "must be > 0");
  if (!(canny.low >= 0) || !(canny.high >= canny.low)) bad("canny", "thresholds need 0 <= low <= high");
  if (max_concurrency < 1) bad("max_concurrency", "must be >= 1");
  if (!(timeout_s > 0)) bad("timeout_s", "must be > 0");
  if (retries < 0) bad("retries", "must be >= 0");
  for (const auto& d : pii_descriptions) {
    if (d.empty()) bad("pii_descriptions", "empty description");
  }
  for (const auto& spec : prompts) prompt::validate(spec);
  if (prompt.strategy == prompt::Strategy::kPreserve) {
    for (const auto& [cat, value] : prompt.labels) {
      if (!prompt::VocabularyRegistry::builtin().lookup(cat, value)) {
        fail(ErrorKind::kVocabulary, "prompt.labels: '" + value + "' is not a known " + std::string(to_string(cat)));
      }
    }
  }
}

PipelineConfig parse_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorKind::kParameter, std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, "",
             {"feather_sigma", "crop_pad_fraction", "generator_resolution", "canny", "pii_descriptions", "seed",
              "max_concurrency", "backends", "timeout_s", "retries", "auth_token", "prompt", "prompts"});
  PipelineConfig c;
  if (j.contains("feather_sigma")) c.feather_sigma = get<double>(j["feather_sigma"], "feather_sigma");
  if (j.contains("crop_pad_fraction")) c.crop_pad_fraction = get<double>(j["crop_pad_fraction"], "crop_pad_fraction");
  if (j.contains("generator_resolution")) {
    c.generator_resolution = get<int>(j["generator_resolution"], "generator_resolution");
  }
  if (j.contains("canny")) {
    const json& cj = j["canny"];
    check_keys(cj, "canny", {"low", "high", "sigma"});
    if (cj.contains("low")) c.canny.low = get<double>(cj["low"], "canny.low");
    if (cj.contains("high")) c.canny.high = get<double>(cj["high"], "canny.high");
    if (cj.contains("sigma")) c.canny.sigma = get<double>(cj["sigma"], "canny.sigma");
  }
  if (j.contains("pii_descriptions")) {
    c.pii_descriptions = get<std::vector<std::string>>(j["pii_descriptions"], "pii_descriptions");
  }
  if (j.contains("seed")) c.seed = get<std::uint64_t>(j["seed"], "seed");
  if (j.contains("max_concurrency")) c.max_concurrency = get<int>(j["max_concurrency"], "max_concurrency");
  if (j.contains("backends")) {
    const json& bj = j["backends"];
    if (!bj.is_object()) bad("backends", "expected an object of role -> URL");
    if (bj.contains("default")) {
      const auto url = get<std::string>(bj["default"], "backends.default");
      for (backend::Role r : backend::kAllRoles) c.backends[r] = url;
    }
    for (const auto& [key, value] : bj.items()) {
      if (key == "default") continue;
      backend::Role role;
      try {
        role = backend::parse_role(key);
      } catch (const Error&) {
        bad("backends." + key, "unknown backend role");
      }
      c.backends[role] = get<std::string>(value, "backends." + key);
    }
  }
  if (j.contains("timeout_s")) c.timeout_s = get<double>(j["timeout_s"], "timeout_s");
  if (j.contains("retries")) c.retries = get<int>(j["retries"], "retries");
  if (j.contains("auth_token")) c.auth_token = get<std::string>(j["auth_token"], "auth_token");
  if (j.contains("prompt")) {
    const json& pj = j["prompt"];
    check_keys(pj, "prompt", {"strategy", "level", "labels"});
    if (pj.contains("strategy")) {
      c.prompt.strategy = prompt::parse_strategy(get<std::string>(pj["strategy"], "prompt.strategy"));
    }
    if (pj.contains("level")) c.prompt.level = prompt::parse_level(get<std::string>(pj["level"], "prompt.level"));
    if (pj.contains("labels")) c.prompt.labels = parse_attributes(pj["labels"], "prompt.labels");
  }
  if (j.contains("prompts")) {
    if (!j["prompts"].is_array()) bad("prompts", "expected an array");
    std::size_t i = 0;
    for (const json& sj : j["prompts"]) {
      const std::string field = "prompts[" + std::to_string(i++) + "]";
      check_keys(sj, field, {"level", "attributes"});
      prompt::PromptSpec spec;
      if (sj.contains("level")) spec.level = prompt::parse_level(get<std::string>(sj["level"], field + ".level"));
      if (sj.contains("attributes")) spec.attributes = parse_attributes(sj["attributes"], field + ".attributes");
      c.prompts.push_back(std::move(spec));
    }
  }
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) { return parse_config(codec::read_file(path)); }

std::string config_to_json(const PipelineConfig& c) {
  json backends = json::object();
  for (const auto& [role, url] : c.backends) backends[std::string(backend::to_string(role))] = url;
  json prompts = json::array();
  for (const auto& spec : c.prompts) {
    prompts.push_back({{"level", prompt::to_string(spec.level)}, {"attributes", attributes_json(spec.attributes)}});
  }
  json j = {
      {"feather_sigma", c.feather_sigma},
      {"crop_pad_fraction", c.crop_pad_fraction},
      {"generator_resolution", c.generator_resolution},
      {"canny", {{"low", c.canny.low}, {"high", c.canny.high}, {"sigma", c.canny.sigma}}},
      {"pii_descriptions", c.pii_descriptions},
      {"seed", c.seed},
      {"max_concurrency", c.max_concurrency},
      {"backends", backends},
      {"timeout_s", c.timeout_s},
      {"retries", c.retries},
      {"auth_token", c.auth_token.empty() ? "" : "<redacted>"},
      {"prompt",
       {{"strategy", prompt::to_string(c.prompt.strategy)},
        {"level", prompt::to_string(c.prompt.level)},
        {"labels", attributes_json(c.prompt.labels)}}},
      {"prompts", prompts},
  };
  return j.dump(2);
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

void apply_env_overrides(PipelineConfig& c, const EnvLookup& env) {
  auto var = [&](const char* suffix) { return env(std::string("REFSD_") + suffix); };
  if (auto v = var("SEED")) c.seed = parse_u64(*v, "REFSD_SEED");
  if (auto v = var("FEATHER_SIGMA")) c.feather_sigma = parse_double(*v, "REFSD_FEATHER_SIGMA");
  if (auto v = var("CROP_PAD_FRACTION")) c.crop_pad_fraction = parse_double(*v, "REFSD_CROP_PAD_FRACTION");
  if (auto v = var("GENERATOR_RESOLUTION")) c.generator_resolution = parse_int(*v, "REFSD_GENERATOR_RESOLUTION");
  if (auto v = var("MAX_CONCURRENCY")) c.max_concurrency = parse_int(*v, "REFSD_MAX_CONCURRENCY");
  if (auto v = var("TIMEOUT_S")) c.timeout_s = parse_double(*v, "REFSD_TIMEOUT_S");
  if (auto v = var("RETRIES")) c.retries = parse_int(*v, "REFSD_RETRIES");
  if (auto v = var("AUTH_TOKEN")) c.auth_token = *v;
  if (auto v = var("PII_DESCRIPTIONS")) {
    c.pii_descriptions.clear();
    std::size_t start = 0;
    while (start <= v->size()) {
      const std::size_t comma = std::min(v->find(',', start), v->size());
      std::string item = v->substr(start, comma - start);
      const auto b = item.find_first_not_of(' ');
      const auto e = item.find_last_not_of(' ');
      if (b != std::string::npos) c.pii_descriptions.push_back(item.substr(b, e - b + 1));
      start = comma + 1;
    }
  }
  if (auto v = var("PROMPT_STRATEGY")) c.prompt.strategy = prompt::parse_strategy(*v);
  if (auto v = var("PROMPT_LEVEL")) c.prompt.level = prompt::parse_level(*v);
  if (auto v = var("BACKEND_URL")) {
    for (backend::Role r : backend::kAllRoles) c.backends[r] = *v;
  }
  for (backend::Role r : backend::kAllRoles) {
    if (auto v = env("REFSD_BACKEND_" + upper(backend::to_string(r)) + "_URL")) c.backends[r] = *v;
  }
}

backend::HttpOptions http_options(const PipelineConfig& c) {
  backend::HttpOptions o;
  o.endpoints = c.backends;
  o.timeout = std::chrono::milliseconds(static_cast<long long>(std::llround(c.timeout_s * 1000.0)));
  o.retries = c.retries;
  o.auth_token = c.auth_token;
  return o;
}

}  // namespace refsd::pipeline
