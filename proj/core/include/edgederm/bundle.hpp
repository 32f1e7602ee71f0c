// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

// The offloadable model artifact and its `.edrm` binary encoding
// (layout in docs/format.md).

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "edgederm/backbone.hpp"
#include "edgederm/head.hpp"
#include "edgederm/image.hpp"

namespace edgederm {

inline constexpr std::uint16_t kBundleVersion = 1;

enum class Precision : std::uint8_t { kFloat32 = 0, kInt8 = 1 };

std::string to_string(Precision precision);

struct QuantParams {
  float scale = 1.0f;
  std::int32_t zero_point = 0;
};

struct QuantizedTensor {
  Shape shape;
  std::vector<std::int8_t> values;
  QuantParams params;
};

/// int8 backbone: one weight tensor and one bias tensor per convolution slot.
struct QuantizedConv {
  QuantizedTensor weights;
  QuantizedTensor bias;
};

struct ModelBundle {
  std::uint16_t version = kBundleVersion;
  ArchitectureConfig config;
  Precision precision = Precision::kFloat32;
  BackboneWeights backbone;                // populated when precision == kFloat32
  std::vector<QuantizedConv> quantized;    // populated when precision == kInt8
  SoftmaxHead head;
  std::vector<std::string> labels;
  PreprocessMeta preprocess;
};

/// Float bundle with He-initialised backbone, zero head and default labels.
ModelBundle make_bundle(const ArchitectureConfig& config, std::uint64_t seed);

/// Throws ShapeError / FormatError when invariants do not hold.
void validate(const ModelBundle& bundle);

std::vector<std::uint8_t> serialize(const ModelBundle& bundle);
ModelBundle deserialize(std::span<const std::uint8_t> bytes);

void save(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load(const std::filesystem::path& path);

/// CRC-32 of the serialized payload, as 8 lowercase hex digits.
std::string checksum(const ModelBundle& bundle);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

/// Field-by-field comparison; floats are compared by bit pattern.
bool bitwise_equal(const ModelBundle& a, const ModelBundle& b);

}  // namespace edgederm
