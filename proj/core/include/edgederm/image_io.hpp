// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "edgederm/image.hpp"

namespace edgederm {

/// Decodes PNG/JPEG/BMP/PPM bytes into an RGB image. Throws DataError.
Image decode_image(std::span<const std::uint8_t> bytes);
Image read_image(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const Image& image);
void write_image(const std::filesystem::path& path, const Image& image);

bool is_image_file(const std::filesystem::path& path);

}  // namespace edgederm
