// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "edgederm/tensor.hpp"

namespace edgederm {

/// 8-bit interleaved image, row-major, `channels` values per pixel.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 3;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(std::size_t w, std::size_t h, std::size_t c = 3) : width(w), height(h), channels(c), pixels(w * h * c) {}

  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) { return pixels[(y * width + x) * channels + c]; }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const {
    return pixels[(y * width + x) * channels + c];
  }

  bool operator==(const Image&) const = default;
};

/// How raw pixels become backbone input: value = (pixel - mean) / scale.
/// The defaults map [0, 255] onto [-1, 1].
struct PreprocessMeta {
  int resolution = 224;
  std::array<float, 3> mean{127.5f, 127.5f, 127.5f};
  std::array<float, 3> scale{127.5f, 127.5f, 127.5f};

  bool operator==(const PreprocessMeta&) const = default;
};

PreprocessMeta default_preprocess(int resolution);

/// Bilinear resize with half-pixel centres and edge clamping. Output is
/// float, one value per channel, (out_h, out_w, channels) row-major.
std::vector<float> resize_bilinear(const Image& image, std::size_t out_w, std::size_t out_h);

/// Resize to meta.resolution and normalize. Returns a (1, r, r, 3) tensor.
/// Throws DataError for empty or non-RGB images.
Tensor preprocess(const Image& image, const PreprocessMeta& meta);

}  // namespace edgederm
