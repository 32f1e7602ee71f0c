// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgederm/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "edgederm/dataset.hpp"
#include "edgederm/labels.hpp"

namespace edgederm {

double nearest_rank(std::span<const double> samples, double q) {
  if (samples.empty()) throw std::invalid_argument("percentile of an empty sample");
  if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("percentile must be in (0, 1]");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
  return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

BenchmarkReport run_benchmark(const Classifier& classifier, std::size_t frames, std::uint64_t seed,
                              std::span<const DeviceBudget> budgets) {
  if (frames < kMinBenchmarkFrames) {
    throw std::invalid_argument("benchmark needs at least " + std::to_string(kMinBenchmarkFrames) + " frames, got " +
                                std::to_string(frames));
  }
  const ModelBundle& bundle = classifier.source_bundle();
  const std::size_t image_size = static_cast<std::size_t>(bundle.preprocess.resolution);
  std::vector<Image> images;
  images.reserve(kNumClasses);
  for (std::size_t c = 0; c < kNumClasses; ++c) images.push_back(synth_image(static_cast<int>(c), seed + c, image_size));

  using Clock = std::chrono::steady_clock;
  for (std::size_t i = 0; i < kWarmupFrames; ++i) (void)classifier.classify(images[i % images.size()], 0);

  BenchmarkReport report;
  report.latencies_ms.reserve(frames);
  double total_ms = 0.0;
  for (std::size_t i = 0; i < frames; ++i) {
    const auto start = Clock::now();
    (void)classifier.classify(images[i % images.size()], static_cast<std::int64_t>(i));
    const double ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    report.latencies_ms.push_back(ms);
    total_ms += ms;
  }
  report.p50_ms = nearest_rank(report.latencies_ms, 0.50);
  report.p95_ms = nearest_rank(report.latencies_ms, 0.95);
  report.max_ms = *std::max_element(report.latencies_ms.begin(), report.latencies_ms.end());
  // Guard against a clock too coarse to see a frame.
  report.throughput_fps = static_cast<double>(frames) / std::max(total_ms / 1000.0, 1e-9);

  const std::vector<DeviceBudget> catalog = device_catalog();
  const SizeReport size = size_report(bundle, budgets.empty() ? std::span<const DeviceBudget>(catalog) : budgets);
  report.precision = bundle.precision;
  report.model_bytes = size.serialized_bytes;
  report.peak_activation_bytes = size.peak_activation_bytes;
  report.verdicts = size.verdicts;
  return report;
}

BenchmarkReport benchmark(const ModelBundle& bundle, const SoftmaxHead& head, std::size_t frames) {
  return run_benchmark(Classifier(bundle, head), frames);
}

std::string render_benchmark(const BenchmarkReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  os << "frames            " << r.latencies_ms.size() << " (+" << kWarmupFrames << " warmup)\n"
     << "latency p50       " << r.p50_ms << " ms\n"
     << "latency p95       " << r.p95_ms << " ms\n"
     << "latency max       " << r.max_ms << " ms\n"
     << std::setprecision(1) << "throughput        " << r.throughput_fps << " frames/s\n"
     << "precision         " << to_string(r.precision) << '\n'
     << "model size        " << r.model_bytes << " bytes\n"
     << "peak activations  " << r.peak_activation_bytes << " bytes\n\n";
  os << std::left << std::setw(26) << "device" << std::setw(18) << "needs (bytes)" << std::setw(8) << "fits"
     << "min s/frame\n";
  for (const DeviceVerdict& v : r.verdicts) {
    os << std::left << std::setw(26) << v.device.name << std::setw(18) << v.required_bytes << std::setw(8)
       << (v.fits ? "yes" : "no") << std::scientific << std::setprecision(2) << v.min_seconds_per_frame
       << std::fixed << '\n';
  }
  return os.str();
}

}  // namespace edgederm
