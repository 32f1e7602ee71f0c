// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgederm/compression.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "edgederm/error.hpp"
#include "edgederm/kernels.hpp"

namespace edgederm {

QuantParams choose_quant_params(std::span<const float> values) {
  if (values.empty()) return {};
  float lo = values.front();
  float hi = values.front();
  for (float v : values) {
    if (!std::isfinite(v)) throw NumericError("cannot quantize a non-finite value");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  QuantParams q;
  if (lo == hi) {
    q.scale = 1.0f;
    q.zero_point = static_cast<std::int32_t>(std::clamp(std::round(-static_cast<double>(lo)), -128.0, 127.0));
    return q;
  }
  // Keep 0 exactly representable.
  lo = std::min(lo, 0.0f);
  hi = std::max(hi, 0.0f);
  constexpr float kMinScale = std::numeric_limits<float>::min();
  if (-lo == hi) {
    q.scale = std::max(hi / 127.0f, kMinScale);
    q.zero_point = 0;
    return q;
  }
  q.scale = std::max(static_cast<float>((static_cast<double>(hi) - lo) / 255.0), kMinScale);
  const double zp = -128.0 - std::round(static_cast<double>(lo) / q.scale);
  q.zero_point = static_cast<std::int32_t>(std::clamp(zp, -128.0, 127.0));
  return q;
}

QuantizedTensor quantize_tensor(const Shape& shape, std::span<const float> values) {
  if (shape_size(shape) != values.size()) throw ShapeError("quantize: shape does not match value count");
  QuantizedTensor t;
  t.shape = shape;
  t.params = choose_quant_params(values);
  t.values.resize(values.size());
  const double scale = t.params.scale;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double q = std::round(static_cast<double>(values[i]) / scale) + t.params.zero_point;
    t.values[i] = static_cast<std::int8_t>(std::clamp(q, -128.0, 127.0));
  }
  return t;
}

std::vector<float> dequantize(const QuantizedTensor& tensor) {
  std::vector<float> out(tensor.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(tensor.values[i] - tensor.params.zero_point) * tensor.params.scale;
  }
  return out;
}

ModelBundle quantize_int8(const ModelBundle& bundle) {
  if (bundle.precision != Precision::kFloat32) {
    throw FormatError(FormatError::Kind::kPrecision, "bundle is already quantized");
  }
  validate(bundle);
  ModelBundle out;
  out.version = bundle.version;
  out.config = bundle.config;
  out.precision = Precision::kInt8;
  out.head = bundle.head;
  out.labels = bundle.labels;
  out.preprocess = bundle.preprocess;
  out.quantized.reserve(bundle.backbone.convs.size());
  for (const ConvParams& p : bundle.backbone.convs) {
    out.quantized.push_back({quantize_tensor(p.weights.shape(), p.weights.data()),
                             quantize_tensor({p.bias.size()}, p.bias)});
  }
  return out;
}

ModelBundle dequantize_bundle(const ModelBundle& bundle) {
  if (bundle.precision == Precision::kFloat32) return bundle;
  validate(bundle);
  ModelBundle out;
  out.version = bundle.version;
  out.config = bundle.config;
  out.precision = Precision::kFloat32;
  out.head = bundle.head;
  out.labels = bundle.labels;
  out.preprocess = bundle.preprocess;
  out.backbone = zero_weights(bundle.config);
  for (std::size_t i = 0; i < bundle.quantized.size(); ++i) {
    ConvParams& p = out.backbone.convs[i];
    p.weights = Tensor(bundle.quantized[i].weights.shape, dequantize(bundle.quantized[i].weights));
    p.bias = dequantize(bundle.quantized[i].bias);
  }
  return out;
}

namespace {

std::vector<double> logits(const ModelBundle& bundle, const Tensor& image) {
  const std::vector<float> embedding = forward(bundle.config, bundle.backbone, image);
  const std::vector<double> wide(embedding.begin(), embedding.end());
  return dense<double>(wide, bundle.head.weights, bundle.head.bias);
}

}  // namespace

AgreementStats dequantized_forward_check(const ModelBundle& reference, const ModelBundle& candidate,
                                         std::span<const Tensor> images) {
  if (!(reference.config == candidate.config)) {
    throw ShapeError("dequantized_forward_check: bundles have different architectures");
  }
  const ModelBundle ref = dequantize_bundle(reference);
  const ModelBundle cand = dequantize_bundle(candidate);
  AgreementStats stats;
  stats.images = images.size();
  std::size_t agree = 0;
  for (const Tensor& image : images) {
    const std::vector<double> a = logits(ref, image);
    const std::vector<double> b = logits(cand, image);
    const auto top_a = std::max_element(a.begin(), a.end()) - a.begin();
    const auto top_b = std::max_element(b.begin(), b.end()) - b.begin();
    if (top_a == top_b) ++agree;
    for (std::size_t k = 0; k < a.size(); ++k) {
      stats.max_logit_deviation = std::max(stats.max_logit_deviation, std::abs(a[k] - b[k]));
    }
  }
  stats.top1_agreement = images.empty() ? 1.0 : static_cast<double>(agree) / static_cast<double>(images.size());
  return stats;
}

PruneResult prune_magnitude(const ModelBundle& bundle, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("prune fraction must lie in [0, 1]");
  }
  if (bundle.precision != Precision::kFloat32) {
    throw FormatError(FormatError::Kind::kPrecision, "pruning requires a float32 bundle");
  }
  PruneResult result{bundle, {}};
  std::vector<std::span<float>> tensors;
  for (ConvParams& p : result.bundle.backbone.convs) tensors.push_back(p.weights.data());

  // Global index order is (convolution, flat index), which is also the tie-break order.
  std::vector<std::pair<float, std::size_t>> ranked;
  for (const auto& t : tensors) {
    for (float w : t) ranked.emplace_back(std::abs(w), ranked.size());
  }
  const std::size_t n = ranked.size();
  const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
  result.report.prunable = n;
  if (k > 0) {
    std::nth_element(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k - 1), ranked.end());
    std::vector<bool> prune(n, false);
    for (std::size_t i = 0; i < n; ++i) {
      if (ranked[i] <= ranked[k - 1]) prune[ranked[i].second] = true;
    }
    std::size_t global = 0;
    for (auto& t : tensors) {
      for (float& w : t) {
        if (prune[global++]) {
          if (w != 0.0f) ++result.report.pruned;
          w = 0.0f;
        }
      }
    }
  }
  for (const auto& t : tensors) {
    result.report.zeros += static_cast<std::size_t>(std::count(t.begin(), t.end(), 0.0f));
  }
  result.report.sparsity = n == 0 ? 0.0 : static_cast<double>(result.report.zeros) / static_cast<double>(n);
  return result;
}

SizeReport size_report(const ModelBundle& bundle, std::span<const DeviceBudget> budgets) {
  SizeReport report;
  report.serialized_bytes = serialize(bundle).size();
  report.parameter_count = parameter_count(bundle.config);
  report.backbone_value_bytes =
      report.parameter_count * (bundle.precision == Precision::kInt8 ? 1u : sizeof(float));
  report.peak_activation_bytes = peak_activation_bytes(bundle.config);
  report.multiply_accumulates = multiply_accumulates(bundle.config);
  for (const DeviceBudget& device : budgets) {
    DeviceVerdict v;
    v.device = device;
    v.required_bytes = report.serialized_bytes + report.peak_activation_bytes;
    v.fits = v.required_bytes <= device.memory_bytes;
    v.min_seconds_per_frame =
        device.clock_hz == 0 ? 0.0 : static_cast<double>(report.multiply_accumulates) / static_cast<double>(device.clock_hz);
    report.verdicts.push_back(v);
  }
  return report;
}

std::string render_size_report(const SizeReport& report) {
  std::ostringstream os;
  os << "model file         " << report.serialized_bytes << " bytes\n"
     << "backbone params    " << report.parameter_count << " (" << report.backbone_value_bytes << " bytes)\n"
     << "peak activations   " << report.peak_activation_bytes << " bytes\n"
     << "multiply-adds      " << report.multiply_accumulates << " per frame\n\n";
  os << std::left << std::setw(26) << "device" << std::setw(16) << "memory" << std::setw(10) << "clock"
     << std::setw(14) << ">= s/frame" << "verdict\n";
  for (const DeviceVerdict& v : report.verdicts) {
    std::ostringstream mem;
    mem << std::fixed << std::setprecision(0) << static_cast<double>(v.device.memory_bytes) / kMiB << " MiB";
    std::ostringstream clock;
    clock << std::fixed << std::setprecision(2) << static_cast<double>(v.device.clock_hz) / 1e9 << " GHz";
    std::ostringstream secs;
    secs << std::fixed << std::setprecision(4) << v.min_seconds_per_frame;
    os << std::left << std::setw(26) << v.device.name << std::setw(16) << mem.str() << std::setw(10) << clock.str()
       << std::setw(14) << secs.str() << (v.fits ? "fits" : "does not fit") << '\n';
  }
  return os.str();
}

}  // namespace edgederm
