// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

// HAM10000 ingestion, stratified splitting and a synthetic stand-in dataset.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "edgederm/image.hpp"

namespace edgederm {

using ImageRef = std::variant<std::filesystem::path, Image>;

struct LabeledSample {
  std::string image_id;
  std::string lesion_id;  // empty when the source has no lesion grouping
  ImageRef image;
  int class_id = 0;
};

/// Decodes (or copies) the sample's pixels. Throws DataError naming the sample.
Image load_sample_image(const LabeledSample& sample);

/// Reads a HAM10000-style metadata CSV. Required columns: `image_id`, `dx`;
/// `lesion_id` is used for leakage-free splitting when present. Images are
/// looked up by id (any supported extension) anywhere under `image_dir`.
std::vector<LabeledSample> load_manifest(const std::filesystem::path& csv_path,
                                         const std::filesystem::path& image_dir);

/// Finds the manifest inside a dataset directory (or accepts a CSV path directly)
/// and loads it.
std::vector<LabeledSample> load_dataset(const std::filesystem::path& path);

struct SplitSpec {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
  std::uint64_t seed = 0;
};

void validate(const SplitSpec& spec);

struct DatasetSplits {
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> val;
  std::vector<LabeledSample> test;
};

/// Per-class split. Samples sharing a lesion id always land in the same split.
/// Without lesion grouping each split's per-class count is within 1 of
/// fraction * class_count.
DatasetSplits stratified_split(std::span<const LabeledSample> samples, const SplitSpec& spec);

/// One synthetic lesion image with a class-specific colour and texture signature.
Image synth_image(int class_id, std::uint64_t seed, std::size_t size = 48);

/// `per_class` synthetic samples for each of the seven classes, in memory.
std::vector<LabeledSample> synth_dataset(int per_class, std::uint64_t seed, std::size_t image_size = 48);

/// Writes samples as `<dir>/images/<image_id>.png` plus `<dir>/HAM10000_metadata.csv`.
void write_dataset(std::span<const LabeledSample> samples, const std::filesystem::path& dir);

}  // namespace edgederm
