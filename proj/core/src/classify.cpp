// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgederm/classify.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "edgederm/compression.hpp"
#include "edgederm/error.hpp"
#include "edgederm/evaluator.hpp"
#include "json_io.hpp"

namespace edgederm {

std::vector<std::size_t> rank_top_k(std::span<const double> probabilities, std::size_t k) {
  std::vector<std::size_t> order(probabilities.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return probabilities[a] > probabilities[b]; });
  order.resize(std::min(k, order.size()));
  return order;
}

std::int64_t now_us() {
  return std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

Classifier::Classifier(const ModelBundle& bundle) : Classifier(bundle, bundle.head) {}

Classifier::Classifier(const ModelBundle& bundle, const SoftmaxHead& head)
    : source_(std::make_shared<const ModelBundle>(bundle)),
      float_bundle_(dequantize_bundle(bundle)),
      head_(head),
      labels_(bundle.labels),
      checksum_(edgederm::checksum(bundle)) {
  if (head_.embedding_dim() != static_cast<std::size_t>(bundle.config.embedding_dim)) {
    throw ShapeError("head expects " + std::to_string(head_.embedding_dim()) + " features, backbone produces " +
                     std::to_string(bundle.config.embedding_dim));
  }
  if (head_.classes() != labels_.size()) {
    throw ShapeError("head has " + std::to_string(head_.classes()) + " outputs for " +
                     std::to_string(labels_.size()) + " labels");
  }
}

ClassificationResult Classifier::classify(const Image& image, std::int64_t timestamp_us, std::size_t top_k) const {
  const Tensor input = preprocess(image, float_bundle_.preprocess);
  const std::vector<float> features = forward(float_bundle_.config, float_bundle_.backbone, input);
  ClassificationResult result;
  const std::vector<double> p = predict(head_, features);
  for (std::size_t i = 0; i < p.size(); ++i) result.distribution.push_back({labels_[i], static_cast<int>(i), p[i]});
  for (std::size_t i : rank_top_k(p, top_k)) result.top.push_back(result.distribution[i]);
  result.timestamp_us = timestamp_us;
  result.model_checksum = checksum_;
  return result;
}

ClassificationResult classify(const ModelBundle& bundle, const SoftmaxHead& head, const Image& image,
                              std::size_t top_k) {
  return Classifier(bundle, head).classify(image, now_us(), top_k);
}

std::string render_text(const ClassificationResult& result, bool verbose) {
  std::ostringstream os;
  for (const ScoredLabel& s : result.top) os << s.label << " – " << percent_half_up(s.probability) << '\n';
  if (verbose) {
    std::vector<double> p;
    for (const ScoredLabel& s : result.distribution) p.push_back(s.probability);
    os << "\nall classes:\n";
    os.precision(17);
    for (std::size_t i : rank_top_k(p, p.size())) {
      os << "  " << result.distribution[i].label << " – " << percent_half_up(p[i]) << " (" << p[i] << ")\n";
    }
    os << "model " << result.model_checksum << ", captured " << result.timestamp_us << " us\n";
  }
  os << result.disclaimer << '\n';
  return os.str();
}

std::string to_json(const ClassificationResult& result) { return result_json(result).dump(); }

}  // namespace edgederm
