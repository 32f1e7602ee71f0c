// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgederm/backbone.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "edgederm/error.hpp"

namespace edgederm {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv:
      return "conv";
    case LayerKind::kInvertedResidual:
      return "inverted_residual";
    case LayerKind::kGlobalPool:
      return "global_pool";
  }
  return "unknown";
}

int scale_channels(int channels, double alpha) {
  const double scaled = static_cast<double>(channels) * alpha;
  const int rounded = static_cast<int>(std::floor(scaled / 8.0 + 0.5)) * 8;
  return std::max(rounded, 8);
}

namespace {

std::string layer_prefix(std::size_t i) { return "layer " + std::to_string(i) + ": "; }

// (expansion t, output channels c, repeats n, first stride s)
struct BlockRow {
  int t, c, n, s;
};

constexpr std::array<BlockRow, 7> kInvertedResidualTable{{
    {1, 16, 1, 1},
    {6, 24, 2, 2},
    {6, 32, 3, 2},
    {6, 64, 4, 2},
    {6, 96, 3, 1},
    {6, 160, 3, 2},
    {6, 320, 1, 1},
}};

constexpr int kStemChannels = 32;
constexpr int kHeadChannels = 1280;

LayerSpec make_block(int in, int out, int stride, int expansion) {
  LayerSpec l;
  l.kind = LayerKind::kInvertedResidual;
  l.in_channels = in;
  l.out_channels = out;
  l.kernel = 3;
  l.stride = stride;
  l.expansion = expansion;
  l.residual = stride == 1 && in == out;
  return l;
}

LayerSpec make_conv(int in, int out, int kernel, int stride) {
  LayerSpec l;
  l.kind = LayerKind::kConv;
  l.in_channels = in;
  l.out_channels = out;
  l.kernel = kernel;
  l.stride = stride;
  return l;
}

LayerSpec make_pool(int channels) {
  LayerSpec l;
  l.kind = LayerKind::kGlobalPool;
  l.in_channels = channels;
  l.out_channels = channels;
  l.kernel = 1;
  return l;
}

ArchitectureConfig assemble(double alpha, int resolution, std::span<const BlockRow> rows) {
  ArchitectureConfig config;
  config.alpha = alpha;
  config.resolution = resolution;
  int channels = scale_channels(kStemChannels, alpha);
  config.layers.push_back(make_conv(3, channels, 3, 2));
  for (const BlockRow& row : rows) {
    const int out = scale_channels(row.c, alpha);
    for (int i = 0; i < row.n; ++i) {
      config.layers.push_back(make_block(channels, out, i == 0 ? row.s : 1, row.t));
      channels = out;
    }
  }
  const int head = scale_channels(kHeadChannels, alpha);
  config.layers.push_back(make_conv(channels, head, 1, 1));
  config.layers.push_back(make_pool(head));
  config.embedding_dim = head;
  validate(config);
  return config;
}

}  // namespace

void validate(const ArchitectureConfig& config) {
  if (config.resolution < 1) throw ShapeError("resolution must be >= 1");
  if (!(config.alpha > 0.0)) throw ShapeError("width multiplier must be > 0");
  if (config.layers.empty()) throw ShapeError("layer table is empty");
  if (config.layers.back().kind != LayerKind::kGlobalPool) {
    throw ShapeError("layer table must end with a global pool");
  }
  int channels = 3;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const LayerSpec& l = config.layers[i];
    if (l.in_channels != channels) {
      throw ShapeError(layer_prefix(i) + "expects " + std::to_string(l.in_channels) +
                       " input channels but receives " + std::to_string(channels));
    }
    if (l.out_channels < 1) throw ShapeError(layer_prefix(i) + "channels must be >= 1");
    if (l.stride < 1) throw ShapeError(layer_prefix(i) + "stride must be >= 1");
    switch (l.kind) {
      case LayerKind::kConv:
        if (l.kernel < 1) throw ShapeError(layer_prefix(i) + "kernel must be >= 1");
        if (l.residual) throw ShapeError(layer_prefix(i) + "plain convolutions have no residual");
        break;
      case LayerKind::kInvertedResidual:
        if (l.expansion < 1) throw ShapeError(layer_prefix(i) + "expansion must be >= 1");
        if (l.stride != 1 && l.stride != 2) throw ShapeError(layer_prefix(i) + "stride must be 1 or 2");
        if (l.residual != (l.stride == 1 && l.in_channels == l.out_channels)) {
          throw ShapeError(layer_prefix(i) + "residual flag must be set iff stride 1 and in == out");
        }
        break;
      case LayerKind::kGlobalPool:
        if (i + 1 != config.layers.size()) throw ShapeError(layer_prefix(i) + "global pool must be last");
        if (l.out_channels != l.in_channels) throw ShapeError(layer_prefix(i) + "pool keeps channels");
        break;
    }
    channels = l.out_channels;
  }
  if (config.embedding_dim != channels) {
    throw ShapeError("embedding dimension " + std::to_string(config.embedding_dim) +
                     " does not match final channel count " + std::to_string(channels));
  }
}

ArchitectureConfig build_default_config(double alpha, int resolution) {
  if (resolution <= 0 || resolution % 32 != 0) {
    throw ShapeError("resolution must be a positive multiple of 32, got " + std::to_string(resolution));
  }
  if (!(alpha > 0.0)) throw ShapeError("width multiplier must be > 0");
  return assemble(alpha, resolution, kInvertedResidualTable);
}

ArchitectureConfig build_tiny_config() {
  constexpr std::array<BlockRow, 3> rows{{{1, 16, 1, 1}, {6, 24, 1, 2}, {6, 32, 1, 2}}};
  return assemble(0.25, 32, rows);
}

Shape ConvSlot::weight_shape() const {
  const auto k = static_cast<std::size_t>(kernel);
  if (kind == ConvKind::kDepthwise) return {k, k, static_cast<std::size_t>(in_channels), 1};
  return {k, k, static_cast<std::size_t>(in_channels), static_cast<std::size_t>(out_channels)};
}

std::size_t ConvSlot::parameter_count() const {
  return shape_size(weight_shape()) + static_cast<std::size_t>(out_channels);
}

std::vector<ConvSlot> conv_slots(const ArchitectureConfig& config) {
  validate(config);
  std::vector<ConvSlot> slots;
  std::size_t extent = static_cast<std::size_t>(config.resolution);
  auto push = [&](ConvKind kind, int kernel, int in, int out, int stride, bool act, std::size_t layer) {
    slots.push_back({kind, kernel, in, out, stride, act, layer, extent});
    extent = (extent + static_cast<std::size_t>(stride) - 1) / static_cast<std::size_t>(stride);
  };
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const LayerSpec& l = config.layers[i];
    switch (l.kind) {
      case LayerKind::kConv:
        push(ConvKind::kStandard, l.kernel, l.in_channels, l.out_channels, l.stride, true, i);
        break;
      case LayerKind::kInvertedResidual: {
        const int hidden = l.in_channels * l.expansion;
        if (l.expansion > 1) push(ConvKind::kStandard, 1, l.in_channels, hidden, 1, true, i);
        push(ConvKind::kDepthwise, 3, hidden, hidden, l.stride, true, i);
        push(ConvKind::kStandard, 1, hidden, l.out_channels, 1, false, i);
        break;
      }
      case LayerKind::kGlobalPool:
        break;
    }
  }
  return slots;
}

std::size_t parameter_count(const ArchitectureConfig& config) {
  std::size_t total = 0;
  for (const ConvSlot& s : conv_slots(config)) total += s.parameter_count();
  return total;
}

std::uint64_t multiply_accumulates(const ArchitectureConfig& config) {
  std::uint64_t total = 0;
  for (const ConvSlot& s : conv_slots(config)) {
    const std::uint64_t out_extent = (s.in_extent + s.stride - 1) / s.stride;
    const std::uint64_t per_pixel = s.kind == ConvKind::kDepthwise
                                        ? static_cast<std::uint64_t>(s.kernel * s.kernel * s.in_channels)
                                        : static_cast<std::uint64_t>(s.kernel) * s.kernel * s.in_channels *
                                              s.out_channels;
    total += out_extent * out_extent * per_pixel;
  }
  return total;
}

std::size_t peak_activation_bytes(const ArchitectureConfig& config) {
  std::size_t peak = 0;
  for (const ConvSlot& s : conv_slots(config)) {
    const std::size_t out_extent = (s.in_extent + s.stride - 1) / s.stride;
    const std::size_t in_bytes = s.in_extent * s.in_extent * s.in_channels * sizeof(float);
    const std::size_t out_bytes = out_extent * out_extent * s.out_channels * sizeof(float);
    peak = std::max(peak, in_bytes + out_bytes);
  }
  return peak;
}

BackboneWeights zero_weights(const ArchitectureConfig& config) {
  BackboneWeights weights;
  for (const ConvSlot& s : conv_slots(config)) {
    ConvParams p;
    p.stride = s.stride;
    p.padding = resolve_padding(PadMode::kSame, s.in_extent, s.in_extent, s.kernel, s.kernel, s.stride);
    p.weights = Tensor(s.weight_shape());
    p.bias.assign(static_cast<std::size_t>(s.out_channels), 0.0f);
    weights.convs.push_back(std::move(p));
  }
  return weights;
}

BackboneWeights init_weights(const ArchitectureConfig& config, std::uint64_t seed) {
  BackboneWeights weights = zero_weights(config);
  const std::vector<ConvSlot> slots = conv_slots(config);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const ConvSlot& s = slots[i];
    const double fan_in = s.kind == ConvKind::kDepthwise ? s.kernel * s.kernel
                                                          : s.kernel * s.kernel * s.in_channels;
    std::normal_distribution<float> dist(0.0f, static_cast<float>(std::sqrt(2.0 / fan_in)));
    for (float& w : weights.convs[i].weights.data()) w = dist(rng);
  }
  return weights;
}

void check_weights(const ArchitectureConfig& config, const BackboneWeights& weights) {
  const std::vector<ConvSlot> slots = conv_slots(config);
  if (weights.convs.size() != slots.size()) {
    throw ShapeError("backbone has " + std::to_string(weights.convs.size()) + " convolutions, config needs " +
                     std::to_string(slots.size()));
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const ConvParams& p = weights.convs[i];
    if (p.weights.shape() != slots[i].weight_shape()) {
      throw ShapeError("convolution " + std::to_string(i) + " kernel is " + to_string(p.weights.shape()) +
                       ", config needs " + to_string(slots[i].weight_shape()));
    }
    if (p.bias.size() != static_cast<std::size_t>(slots[i].out_channels)) {
      throw ShapeError("convolution " + std::to_string(i) + " bias length mismatch");
    }
    if (p.stride != slots[i].stride) throw ShapeError("convolution " + std::to_string(i) + " stride mismatch");
  }
}

Tensor apply_layer(const LayerSpec& layer, std::span<const ConvParams> convs, const Tensor& input) {
  switch (layer.kind) {
    case LayerKind::kConv: {
      Tensor out = conv2d(input, convs[0]);
      relu6_inplace(out);
      return out;
    }
    case LayerKind::kInvertedResidual: {
      std::size_t next = 0;
      Tensor hidden;
      if (layer.expansion > 1) {
        hidden = conv2d(input, convs[next++]);
        relu6_inplace(hidden);
      }
      Tensor spatial = depthwise_conv2d(layer.expansion > 1 ? hidden : input, convs[next++]);
      relu6_inplace(spatial);
      Tensor out = conv2d(spatial, convs[next]);
      if (layer.residual) {
        if (out.shape() != input.shape()) throw ShapeError("residual shape mismatch");
        auto o = out.data();
        auto in = input.data();
        for (std::size_t i = 0; i < o.size(); ++i) o[i] += in[i];
      }
      return out;
    }
    case LayerKind::kGlobalPool: {
      std::vector<float> pooled = global_avg_pool(input);
      const std::size_t ch = pooled.size();
      return Tensor({1, 1, 1, ch}, std::move(pooled));
    }
  }
  throw ShapeError("unknown layer kind");
}

namespace {

std::size_t slots_in_layer(const LayerSpec& l) {
  switch (l.kind) {
    case LayerKind::kConv:
      return 1;
    case LayerKind::kInvertedResidual:
      return l.expansion > 1 ? 3 : 2;
    case LayerKind::kGlobalPool:
      return 0;
  }
  return 0;
}

void check_image(const ArchitectureConfig& config, const Tensor& image) {
  const auto r = static_cast<std::size_t>(config.resolution);
  const Shape expected{1, r, r, 3};
  if (image.shape() != expected) {
    throw ShapeError("backbone input must be " + to_string(expected) + ", got " + to_string(image.shape()));
  }
}

}  // namespace

Tensor forward_features(const ArchitectureConfig& config, const BackboneWeights& weights,
                        const Tensor& image) {
  check_image(config, image);
  if (weights.convs.size() != conv_slots(config).size()) {
    throw ShapeError("weights do not match architecture");
  }
  Tensor x = image;
  std::size_t slot = 0;
  for (const LayerSpec& layer : config.layers) {
    if (layer.kind == LayerKind::kGlobalPool) break;
    const std::size_t n = slots_in_layer(layer);
    x = apply_layer(layer, std::span<const ConvParams>(weights.convs).subspan(slot, n), x);
    slot += n;
  }
  return x;
}

std::vector<float> forward(const ArchitectureConfig& config, const BackboneWeights& weights,
                           const Tensor& image) {
  return global_avg_pool(forward_features(config, weights, image));
}

}  // namespace edgederm
