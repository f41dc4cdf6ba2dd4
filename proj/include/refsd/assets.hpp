// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace refsd::assets {

/// A line-delimited text asset compiled in from data/.
struct Asset {
  std::string_view path;  // relative to data/, e.g. "vocab/v1/phi_a/age.txt"
  std::string_view contents;
};

const std::vector<Asset>& embedded();

std::optional<std::string_view> find(std::string_view path);

/// Non-empty lines with trailing CR/whitespace removed.
std::vector<std::string> lines(std::string_view contents);

}  // namespace refsd::assets
