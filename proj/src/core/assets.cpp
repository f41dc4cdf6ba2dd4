// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

#include "refsd/assets.hpp"

#include <sstream>

namespace refsd::assets {

std::optional<std::string_view> find(std::string_view path) {
  for (const Asset& a : embedded()) {
    if (a.path == path) return a.contents;
  }
  return std::nullopt;
}

std::vector<std::string> lines(std::string_view contents) {
  std::vector<std::string> out;
  std::istringstream in{std::string(contents)};
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
      line.pop_back();
    }
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

}  // namespace refsd::assets
