// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

// MobileNetV2-style feature extractor: a 3x3 stem convolution, a stack of
// inverted-residual blocks, a 1x1 head convolution and global average pooling.
// Batch norms are assumed folded into the convolution biases.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "edgederm/kernels.hpp"
#include "edgederm/tensor.hpp"

namespace edgederm {

enum class LayerKind : std::uint8_t { kConv = 0, kInvertedResidual = 1, kGlobalPool = 2 };

std::string to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::kConv;
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;     // kConv only; inverted residuals use a 3x3 depthwise stage
  int stride = 1;
  int expansion = 1;  // kInvertedResidual only
  bool residual = false;

  bool operator==(const LayerSpec&) const = default;
};

struct ArchitectureConfig {
  int resolution = 224;
  double alpha = 1.0;
  std::vector<LayerSpec> layers;
  int embedding_dim = 0;

  bool operator==(const ArchitectureConfig&) const = default;
};

/// Channel count scaled by a width multiplier: nearest multiple of 8, at least 8.
int scale_channels(int channels, double alpha);

/// Throws ShapeError when the layer table is inconsistent.
void validate(const ArchitectureConfig& config);

/// The standard 17-block inverted-residual table scaled by `alpha`.
/// `resolution` must be a positive multiple of 32.
ArchitectureConfig build_default_config(double alpha, int resolution);

/// Three-block profile (alpha 0.25, 32x32 input) for fast tests.
ArchitectureConfig build_tiny_config();

/// One convolution in execution order. Weights for a backbone are stored as
/// one ConvParams per slot.
struct ConvSlot {
  ConvKind kind = ConvKind::kStandard;
  int kernel = 1;
  int in_channels = 0;
  int out_channels = 0;
  int stride = 1;
  bool relu6 = true;
  std::size_t layer = 0;   // index into ArchitectureConfig::layers
  std::size_t in_extent = 0;  // input height == width at this slot

  Shape weight_shape() const;
  std::size_t parameter_count() const;
};

std::vector<ConvSlot> conv_slots(const ArchitectureConfig& config);
std::size_t parameter_count(const ArchitectureConfig& config);
std::uint64_t multiply_accumulates(const ArchitectureConfig& config);

/// Largest (input + output) activation footprint, in bytes, over all
/// convolution steps of a single-image forward pass.
std::size_t peak_activation_bytes(const ArchitectureConfig& config);

struct BackboneWeights {
  std::vector<ConvParams> convs;  // aligned with conv_slots()
};

/// Zero-valued weights with stride and padding resolved for every slot.
BackboneWeights zero_weights(const ArchitectureConfig& config);

/// He-normal kernels (std = sqrt(2 / fan_in)) and zero biases; deterministic in `seed`.
BackboneWeights init_weights(const ArchitectureConfig& config, std::uint64_t seed);

/// Throws ShapeError if weights do not match the configuration.
void check_weights(const ArchitectureConfig& config, const BackboneWeights& weights);

/// Runs one layer. `convs` are that layer's slots in execution order.
Tensor apply_layer(const LayerSpec& layer, std::span<const ConvParams> convs, const Tensor& input);

/// Feature map entering the global pool.
Tensor forward_features(const ArchitectureConfig& config, const BackboneWeights& weights,
                        const Tensor& image);

/// Embedding of length config.embedding_dim for a (1, r, r, 3) image.
std::vector<float> forward(const ArchitectureConfig& config, const BackboneWeights& weights,
                           const Tensor& image);

}  // namespace edgederm
