// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "refsd/imaging.hpp"

namespace refsd::codec {

/// Lossless PNG. Gray images encode as 8-bit gray, RGB as 8-bit RGB.
std::vector<std::uint8_t> encode_png(const imaging::ImageBuffer& image);

/// Decodes to gray when the source has no color, otherwise RGB. Alpha is
/// dropped.
imaging::ImageBuffer decode_png(std::span<const std::uint8_t> bytes);

imaging::ImageBuffer read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const imaging::ImageBuffer& image);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

/// Hash of the pixel content, independent of any container encoding.
std::string image_hash(const imaging::ImageBuffer& image);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace refsd::codec
