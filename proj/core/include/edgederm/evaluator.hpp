// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

// Four-metric evaluation (accuracy, precision, recall, F1), confusion
// matrices, literature comparison tables and training-curve artifacts.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "edgederm/head.hpp"
#include "edgederm/labels.hpp"

namespace edgederm {

struct ModelBundle;
struct LabeledSample;

/// Entry (i, j) counts samples of true class i predicted as j.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = kNumClasses);

  void add(int truth, int predicted);
  std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts_[truth * classes_ + predicted]; }
  std::uint64_t& at(std::size_t truth, std::size_t predicted) { return counts_[truth * classes_ + predicted]; }
  std::size_t classes() const noexcept { return classes_; }
  std::uint64_t total() const;
  std::uint64_t trace() const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;  // true samples of the class
};

enum class Averaging { kMacro, kWeighted };

struct AveragedMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Zero denominators yield 0, never NaN.
std::vector<ClassMetrics> per_class_metrics(const ConfusionMatrix& cm);

/// Unweighted (macro) mean over all classes by default; kWeighted weights by support.
AveragedMetrics macro_metrics(const ConfusionMatrix& cm, Averaging mode = Averaging::kMacro);

struct EvalReport {
  std::size_t n = 0;
  double accuracy = 0.0;
  double mean_loss = 0.0;
  Averaging averaging = Averaging::kMacro;
  AveragedMetrics averaged;
  std::vector<ClassMetrics> per_class;
  ConfusionMatrix confusion;
};

/// Report from raw predictions; `losses` holds one cross-entropy per sample.
EvalReport build_report(std::span<const int> truth, std::span<const int> predicted, std::span<const double> losses,
                        Averaging mode = Averaging::kMacro);

/// Report for a head over precomputed embeddings. Throws on an empty set.
EvalReport evaluate_embeddings(const SoftmaxHead& head, const EmbeddingSet& data,
                               Averaging mode = Averaging::kMacro);

/// Full pipeline: preprocess, backbone (int8 bundles are dequantized), head.
EvalReport evaluate(const ModelBundle& bundle, const SoftmaxHead& head, std::span<const LabeledSample> samples,
                    Averaging mode = Averaging::kMacro, const EmbeddingOptions& options = {});

/// floor(fraction * 100 + 0.5)
int percent_half_up(double fraction);

/// Summary row in the four-metric layout, then per-class metrics and the confusion matrix.
std::string render_report(const EvalReport& report, std::span<const std::string> labels,
                          std::string_view model_name);

/// `key=value` lines for scripts.
std::string render_key_values(const EvalReport& report, std::span<const std::string> labels);

struct ComparisonRow {
  std::string name;
  double accuracy_percent = 0.0;
};

/// Published skin-lesion classifier accuracies used as reference points.
std::vector<ComparisonRow> literature_rows();

/// Aligned two-column table sorted by accuracy, descending; ties keep input order.
std::string render_comparison(std::vector<ComparisonRow> rows);

/// epoch,train_loss,train_acc,val_loss,val_acc with shortest round-trip number formatting.
std::string render_epoch_csv(std::span<const EpochRecord> records);
std::vector<EpochRecord> parse_epoch_csv(std::string_view csv);

struct CurveArtifacts {
  std::string csv;
  std::string plot_data;  // whitespace-separated columns with a '#' header, gnuplot-ready
};

CurveArtifacts render_curves(std::span<const EpochRecord> records);

}  // namespace edgederm
