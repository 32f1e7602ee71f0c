// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

// Single-image inference and its human / machine renderings.

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "edgederm/bundle.hpp"
#include "edgederm/image.hpp"

namespace edgederm {

inline constexpr std::string_view kDisclaimer =
    "Research prototype — not an approved medical device. Confirm any result with a medical professional.";

inline constexpr std::size_t kDefaultTopK = 5;

struct ScoredLabel {
  std::string label;
  int class_id = 0;
  double probability = 0.0;

  bool operator==(const ScoredLabel&) const = default;
};

struct ClassificationResult {
  std::vector<ScoredLabel> top;       // descending probability, ties by label order
  std::vector<ScoredLabel> distribution;  // every class, label order
  std::int64_t timestamp_us = 0;      // capture time, microseconds since the Unix epoch
  std::string model_checksum;
  std::string disclaimer{kDisclaimer};

  bool operator==(const ClassificationResult&) const = default;
};

/// Indices of the k largest probabilities, descending; equal values keep index order.
std::vector<std::size_t> rank_top_k(std::span<const double> probabilities, std::size_t k);

/// Microseconds since the Unix epoch.
std::int64_t now_us();

/// Immutable inference state shared by the CLI, stream loop and service.
/// int8 bundles are dequantized once at construction. classify() is const
/// and safe to call from several threads.
class Classifier {
 public:
  explicit Classifier(const ModelBundle& bundle);
  Classifier(const ModelBundle& bundle, const SoftmaxHead& head);

  /// Throws DataError for an empty or non-RGB image.
  ClassificationResult classify(const Image& image, std::int64_t timestamp_us, std::size_t top_k = kDefaultTopK) const;
  ClassificationResult classify(const Image& image) const { return classify(image, now_us()); }

  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::string& checksum() const noexcept { return checksum_; }
  const ModelBundle& source_bundle() const noexcept { return *source_; }

 private:
  std::shared_ptr<const ModelBundle> source_;
  ModelBundle float_bundle_;
  SoftmaxHead head_;
  std::vector<std::string> labels_;
  std::string checksum_;
};

/// One-shot convenience over Classifier. Throws ShapeError when the head
/// does not match the bundle.
ClassificationResult classify(const ModelBundle& bundle, const SoftmaxHead& head, const Image& image,
                              std::size_t top_k = kDefaultTopK);

/// "label – NN" lines for the ranked entries, then the disclaimer. Verbose
/// mode lists every class with its full probability and the model checksum.
std::string render_text(const ClassificationResult& result, bool verbose = false);

/// JSON object with full-precision probabilities and integer percents.
std::string to_json(const ClassificationResult& result);

}  // namespace edgederm
