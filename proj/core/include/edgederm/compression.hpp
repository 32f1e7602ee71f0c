// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

// Post-training int8 quantization, magnitude pruning and device-fit reporting.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "edgederm/bundle.hpp"
#include "edgederm/devices.hpp"

namespace edgederm {

/// Per-tensor affine parameters. A constant tensor gets scale 1 and zero
/// point clamp(round(-value)). Otherwise the range is widened to include 0;
/// a range symmetric about 0 uses scale = max|x| / 127 and zero point 0,
/// anything else scale = (max - min) / 255.
QuantParams choose_quant_params(std::span<const float> values);

/// q = clamp(round(x / scale) + zero_point, -128, 127)
QuantizedTensor quantize_tensor(const Shape& shape, std::span<const float> values);
std::vector<float> dequantize(const QuantizedTensor& tensor);

/// Float32 bundle in, int8 bundle out (backbone only; head, labels and
/// metadata are carried over unchanged). Throws FormatError if already int8.
ModelBundle quantize_int8(const ModelBundle& bundle);

/// Float32 copy of an int8 bundle's backbone (identity for float bundles).
ModelBundle dequantize_bundle(const ModelBundle& bundle);

struct AgreementStats {
  std::size_t images = 0;
  double top1_agreement = 0.0;    // fraction of images with matching argmax
  double max_logit_deviation = 0.0;
};

/// Runs both bundles (int8 via dequantize-then-float) on the same
/// preprocessed images and compares their head outputs.
AgreementStats dequantized_forward_check(const ModelBundle& reference, const ModelBundle& candidate,
                                         std::span<const Tensor> images);

struct SparsityReport {
  std::size_t prunable = 0;      // backbone convolution weights (biases and head excluded)
  std::size_t pruned = 0;        // weights set to zero by this call
  std::size_t zeros = 0;         // zero-valued prunable weights afterwards
  double sparsity = 0.0;         // zeros / prunable
};

struct PruneResult {
  ModelBundle bundle;
  SparsityReport report;
};

/// Zeroes the floor(fraction * N) smallest-magnitude backbone convolution
/// weights, ranked globally; ties go to the earlier convolution, then the
/// lower flat index.
PruneResult prune_magnitude(const ModelBundle& bundle, double fraction);

struct DeviceVerdict {
  DeviceBudget device;
  std::uint64_t required_bytes = 0;
  bool fits = false;
  double min_seconds_per_frame = 0.0;  // MACs / clock at one MAC per cycle
};

struct SizeReport {
  std::uint64_t serialized_bytes = 0;
  std::uint64_t backbone_value_bytes = 0;  // tensor values only: no headers, padding or QuantParams
  std::uint64_t parameter_count = 0;       // backbone parameters
  std::uint64_t peak_activation_bytes = 0;
  std::uint64_t multiply_accumulates = 0;
  std::vector<DeviceVerdict> verdicts;
};

SizeReport size_report(const ModelBundle& bundle, std::span<const DeviceBudget> budgets);

std::string render_size_report(const SizeReport& report);

}  // namespace edgederm
