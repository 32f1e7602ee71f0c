// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgederm/image.hpp"

#include <algorithm>
#include <cmath>

#include "edgederm/error.hpp"

namespace edgederm {

PreprocessMeta default_preprocess(int resolution) {
  PreprocessMeta meta;
  meta.resolution = resolution;
  return meta;
}

namespace {

struct Tap {
  std::size_t lo, hi;
  float frac;  // weight of `hi`
};

std::vector<Tap> taps(std::size_t in, std::size_t out) {
  std::vector<Tap> result(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * ratio - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    const std::size_t hi = std::min(lo + 1, in - 1);
    result[i] = {lo, hi, static_cast<float>(src - static_cast<double>(lo))};
  }
  return result;
}

}  // namespace

std::vector<float> resize_bilinear(const Image& image, std::size_t out_w, std::size_t out_h) {
  if (image.width == 0 || image.height == 0 || image.pixels.empty()) {
    throw DataError(DataError::Kind::kDecode, "cannot resize an empty image");
  }
  const std::size_t ch = image.channels;
  const std::vector<Tap> xs = taps(image.width, out_w);
  const std::vector<Tap> ys = taps(image.height, out_h);
  std::vector<float> out(out_w * out_h * ch);
  for (std::size_t y = 0; y < out_h; ++y) {
    const Tap& ty = ys[y];
    for (std::size_t x = 0; x < out_w; ++x) {
      const Tap& tx = xs[x];
      for (std::size_t c = 0; c < ch; ++c) {
        const float top = (1.0f - tx.frac) * image.at(tx.lo, ty.lo, c) + tx.frac * image.at(tx.hi, ty.lo, c);
        const float bottom = (1.0f - tx.frac) * image.at(tx.lo, ty.hi, c) + tx.frac * image.at(tx.hi, ty.hi, c);
        out[(y * out_w + x) * ch + c] = (1.0f - ty.frac) * top + ty.frac * bottom;
      }
    }
  }
  return out;
}

Tensor preprocess(const Image& image, const PreprocessMeta& meta) {
  if (image.width == 0 || image.height == 0) throw DataError(DataError::Kind::kDecode, "image has zero size");
  if (image.channels != 3) {
    throw DataError(DataError::Kind::kDecode,
                    "expected an RGB image, got " + std::to_string(image.channels) + " channels");
  }
  if (image.pixels.size() != image.width * image.height * 3) {
    throw DataError(DataError::Kind::kDecode, "image pixel buffer does not match its dimensions");
  }
  if (meta.resolution < 1) throw ShapeError("preprocess resolution must be >= 1");
  const auto r = static_cast<std::size_t>(meta.resolution);
  std::vector<float> values = resize_bilinear(image, r, r);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t c = i % 3;
    values[i] = (values[i] - meta.mean[c]) / meta.scale[c];
  }
  return Tensor({1, r, r, 3}, std::move(values));
}

}  // namespace edgederm
