// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

// On-device latency / memory benchmark against the device catalog.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "edgederm/classify.hpp"
#include "edgederm/compression.hpp"
#include "edgederm/devices.hpp"

namespace edgederm {

inline constexpr std::size_t kWarmupFrames = 3;
inline constexpr std::size_t kMinBenchmarkFrames = 10;

struct BenchmarkReport {
  std::vector<double> latencies_ms;  // timed frames only, in run order
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double max_ms = 0.0;
  double throughput_fps = 0.0;
  Precision precision = Precision::kFloat32;
  std::uint64_t model_bytes = 0;            // serialized .edrm size
  std::uint64_t peak_activation_bytes = 0;
  std::vector<DeviceVerdict> verdicts;
};

/// Nearest-rank percentile: the ceil(q * n)-th smallest sample, q in (0, 1].
double nearest_rank(std::span<const double> samples, double q);

/// Runs kWarmupFrames untimed frames, then `frames` timed ones on synthetic
/// images. Throws std::invalid_argument when frames < kMinBenchmarkFrames.
BenchmarkReport run_benchmark(const Classifier& classifier, std::size_t frames, std::uint64_t seed = 0,
                              std::span<const DeviceBudget> budgets = {});

BenchmarkReport benchmark(const ModelBundle& bundle, const SoftmaxHead& head, std::size_t frames);

std::string render_benchmark(const BenchmarkReport& report);

}  // namespace edgederm
