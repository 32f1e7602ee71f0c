// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

// Neural-network kernels over NHWC float tensors. Every function here is pure.

#pragma once

#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "edgederm/error.hpp"
#include "edgederm/tensor.hpp"

namespace edgederm {

struct Padding {
  int top = 0;
  int bottom = 0;
  int left = 0;
  int right = 0;

  bool operator==(const Padding&) const = default;
};

enum class PadMode { kSame, kValid };

/// Resolves a padding mode to explicit per-side pixel counts. For "same",
/// the output is ceil(in / stride) and an odd total pad puts the extra
/// pixel on the top/left side.
Padding resolve_padding(PadMode mode, std::size_t in_h, std::size_t in_w, std::size_t kernel_h,
                        std::size_t kernel_w, int stride);

enum class ConvKind { kStandard, kDepthwise };

/// Weights are (kh, kw, in_ch, out_ch) for a standard convolution and
/// (kh, kw, ch, 1) for a depthwise one. Bias has one entry per output channel.
struct ConvParams {
  int stride = 1;
  Padding padding;
  Tensor weights;
  std::vector<float> bias;

  std::size_t kernel_h() const { return weights.dim(0); }
  std::size_t kernel_w() const { return weights.dim(1); }
};

/// Output spatial extent for a given input extent, kernel, stride and padding.
/// Throws ShapeError if the result would be < 1.
std::size_t conv_output_extent(std::size_t in, std::size_t kernel, int stride, int pad_before,
                               int pad_after);

Tensor conv2d(const Tensor& input, const ConvParams& params);
Tensor depthwise_conv2d(const Tensor& input, const ConvParams& params);

/// out[k] = sum_e input[e] * weights(e, k) + bias[k]
template <std::floating_point T>
std::vector<T> dense(std::span<const T> input, const Matrix<T>& weights, std::span<const T> bias) {
  if (input.size() != weights.rows) {
    throw ShapeError("dense: input length " + std::to_string(input.size()) +
                     " does not match weight rows " + std::to_string(weights.rows));
  }
  if (bias.size() != weights.cols) {
    throw ShapeError("dense: bias length " + std::to_string(bias.size()) +
                     " does not match weight cols " + std::to_string(weights.cols));
  }
  std::vector<T> out(bias.begin(), bias.end());
  for (std::size_t e = 0; e < weights.rows; ++e) {
    const T x = input[e];
    const T* w = weights.values.data() + e * weights.cols;
    for (std::size_t k = 0; k < weights.cols; ++k) out[k] += x * w[k];
  }
  return out;
}

Tensor relu6(const Tensor& input);
void relu6_inplace(Tensor& tensor) noexcept;

/// Mean over all spatial positions (and batch) per channel of a 4-D tensor.
std::vector<float> global_avg_pool(const Tensor& input);

/// Numerically stable softmax (max subtraction), evaluated in double.
/// Throws NumericError on non-finite input and ShapeError on empty input.
std::vector<double> softmax(std::span<const double> logits);
std::vector<double> softmax(std::span<const float> logits);

struct BatchNorm {
  std::vector<float> gamma;
  std::vector<float> beta;
  std::vector<float> mean;
  std::vector<float> variance;
  float epsilon = 1e-3f;
};

/// Folds an inference-mode batch norm into the preceding convolution so that
/// conv(x, folded) == bn(conv(x, original)).
ConvParams batchnorm_fold(const ConvParams& conv, const BatchNorm& bn,
                          ConvKind kind = ConvKind::kStandard);

}  // namespace edgederm
