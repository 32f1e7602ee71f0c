// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

// Transfer learning: embeddings through a frozen backbone and a softmax head
// trained with minibatch SGD on cross-entropy. The head runs in double.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "edgederm/tensor.hpp"

namespace edgederm {

struct ModelBundle;
struct LabeledSample;

struct SoftmaxHead {
  Matrix<double> weights;  // embedding_dim x classes
  std::vector<double> bias;

  static SoftmaxHead zeros(std::size_t embedding_dim, std::size_t classes);
  std::size_t embedding_dim() const noexcept { return weights.rows; }
  std::size_t classes() const noexcept { return weights.cols; }
};

struct EmbeddingSet {
  Matrix<float> rows;  // N x E
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

struct EmbeddingOptions {
  unsigned workers = 1;
  std::optional<std::filesystem::path> cache_dir;
};

/// Row i = forward(preprocess(sample i)). Requires a float32 bundle.
EmbeddingSet compute_embeddings(const ModelBundle& bundle, std::span<const LabeledSample> samples,
                                const EmbeddingOptions& options = {});

/// -ln(max(p[k], 1e-12)).
double cross_entropy(std::span<const double> probabilities, int true_class);

/// softmax(dense(embedding)).
std::vector<double> predict(const SoftmaxHead& head, std::span<const float> embedding);
std::vector<double> predict(const SoftmaxHead& head, std::span<const double> embedding);

struct TrainConfig {
  int epochs = 10;
  double learning_rate = 0.05;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  double l2 = 0.0;
  bool inverse_frequency_weights = false;
  // Fit on per-feature standardized embeddings, then fold mean/stddev back
  // into the head so it still consumes raw embeddings. L2 then acts on the
  // standardized weights.
  bool standardize = true;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainResult {
  SoftmaxHead head;
  std::vector<EpochRecord> records;
  double initial_train_loss = 0.0;  // zero-init head, before any update
  double initial_train_accuracy = 0.0;
};

struct HeadGradient {
  Matrix<double> weights;
  std::vector<double> bias;
  double loss = 0.0;
};

/// Objective: sum_i w_i * CE(softmax(x_i W + b), y_i) / n + (l2 / 2) * |W|^2,
/// where w_i are class weights (all 1 unless given). Gradient uses
/// dL/dlogits = softmax - onehot.
HeadGradient head_gradient(const SoftmaxHead& head, const EmbeddingSet& data, std::span<const std::size_t> batch,
                           double l2 = 0.0, std::span<const double> class_weights = {});

/// Mean loss and top-1 accuracy of the head over a whole set.
struct LossAccuracy {
  double loss = 0.0;
  double accuracy = 0.0;
};
LossAccuracy measure(const SoftmaxHead& head, const EmbeddingSet& data);

/// Per-feature mean and population standard deviation (1 where a feature is constant).
struct FeatureScaling {
  std::vector<double> mean;
  std::vector<double> stddev;

  static FeatureScaling identity(std::size_t dim);
};

FeatureScaling feature_scaling(const EmbeddingSet& data);
EmbeddingSet standardized(const EmbeddingSet& data, const FeatureScaling& scaling);

/// Head h' on raw x equivalent to h on (x - mean) / stddev.
SoftmaxHead fold_scaling(const SoftmaxHead& head, const FeatureScaling& scaling);

/// Minibatch SGD from a zero head. One record per epoch, measured over the
/// full train (and validation, if non-empty) set after the epoch.
TrainResult train_head(const EmbeddingSet& train, const EmbeddingSet& val, const TrainConfig& config);

}  // namespace edgederm
