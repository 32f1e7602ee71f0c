// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <random>

#include "edgederm/backbone.hpp"
#include "edgederm/bundle.hpp"
#include "edgederm/classify.hpp"
#include "edgederm/compression.hpp"
#include "edgederm/dataset.hpp"
#include "edgederm/kernels.hpp"

namespace edgederm {
namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  Tensor t(std::move(shape));
  for (float& v : t.values()) v = dist(rng);
  return t;
}

void BM_Conv2dPointwise(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const Tensor in = random_tensor({1, 28, 28, c}, 1);
  ConvParams p;
  p.weights = random_tensor({1, 1, c, c}, 2);
  p.bias.assign(c, 0.0f);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(in, p));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(28 * 28 * c * c));
}
BENCHMARK(BM_Conv2dPointwise)->Arg(16)->Arg(64);

void BM_Depthwise3x3(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const Tensor in = random_tensor({1, 28, 28, c}, 3);
  ConvParams p;
  p.weights = random_tensor({3, 3, c, 1}, 4);
  p.bias.assign(c, 0.0f);
  p.padding = resolve_padding(PadMode::kSame, 28, 28, 3, 3, 1);
  for (auto _ : state) benchmark::DoNotOptimize(depthwise_conv2d(in, p));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(28 * 28 * 9 * c));
}
BENCHMARK(BM_Depthwise3x3)->Arg(96)->Arg(384);

void BM_ForwardTiny(benchmark::State& state) {
  const ArchitectureConfig config = build_tiny_config();
  const BackboneWeights w = init_weights(config, 5);
  const Tensor image = random_tensor({1, 32, 32, 3}, 6);
  for (auto _ : state) benchmark::DoNotOptimize(forward(config, w, image));
}
BENCHMARK(BM_ForwardTiny);

void BM_ForwardDefault(benchmark::State& state) {
  const auto resolution = static_cast<int>(state.range(0));
  const ArchitectureConfig config = build_default_config(0.35, resolution);
  const BackboneWeights w = init_weights(config, 7);
  const Tensor image = random_tensor({1, static_cast<std::size_t>(resolution), static_cast<std::size_t>(resolution), 3}, 8);
  for (auto _ : state) benchmark::DoNotOptimize(forward(config, w, image));
}
BENCHMARK(BM_ForwardDefault)->Arg(96)->Unit(benchmark::kMillisecond);

void BM_ClassifyInt8Tiny(benchmark::State& state) {
  const Classifier classifier(quantize_int8(make_bundle(build_tiny_config(), 9)));
  const Image image = synth_image(3, 10, 64);
  for (auto _ : state) benchmark::DoNotOptimize(classifier.classify(image, 0));
}
BENCHMARK(BM_ClassifyInt8Tiny);

void BM_SerializeRoundTrip(benchmark::State& state) {
  const ModelBundle bundle = make_bundle(build_default_config(0.35, 96), 11);
  for (auto _ : state) benchmark::DoNotOptimize(deserialize(serialize(bundle)));
}
BENCHMARK(BM_SerializeRoundTrip)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace edgederm

BENCHMARK_MAIN();
