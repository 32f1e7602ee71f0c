// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgederm/head.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "edgederm/bundle.hpp"
#include "edgederm/dataset.hpp"
#include "edgederm/error.hpp"
#include "edgederm/kernels.hpp"
#include "edgederm/labels.hpp"

namespace edgederm {

namespace fs = std::filesystem;

SoftmaxHead SoftmaxHead::zeros(std::size_t embedding_dim, std::size_t classes) {
  return {Matrix<double>(embedding_dim, classes, 0.0), std::vector<double>(classes, 0.0)};
}

namespace {

std::uint64_t fnv1a(std::uint64_t h, std::string_view s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h ^ 0xff;
}

fs::path cache_path(const fs::path& dir, const ModelBundle& bundle, std::span<const LabeledSample> samples) {
  std::uint64_t h = 14695981039346656037ull;
  for (const LabeledSample& s : samples) {
    h = fnv1a(h, s.image_id);
    h = fnv1a(h, std::to_string(s.class_id));
  }
  char name[64];
  std::snprintf(name, sizeof name, "%s-%016llx.emb", checksum(bundle).c_str(), static_cast<unsigned long long>(h));
  return dir / name;
}

constexpr char kCacheMagic[4] = {'E', 'D', 'E', 'M'};

std::optional<EmbeddingSet> read_cache(const fs::path& path, std::size_t n, std::size_t dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[4];
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&rows), sizeof rows);
  in.read(reinterpret_cast<char*>(&cols), sizeof cols);
  if (!in || !std::equal(magic, magic + 4, kCacheMagic) || rows != n || cols != dim) return std::nullopt;
  EmbeddingSet set;
  set.rows = Matrix<float>(n, dim);
  set.labels.resize(n);
  in.read(reinterpret_cast<char*>(set.rows.values.data()), static_cast<std::streamsize>(n * dim * sizeof(float)));
  in.read(reinterpret_cast<char*>(set.labels.data()), static_cast<std::streamsize>(n * sizeof(int)));
  if (!in) return std::nullopt;
  return set;
}

void write_cache(const fs::path& path, const EmbeddingSet& set) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    const std::uint64_t rows = set.rows.rows;
    const std::uint64_t cols = set.rows.cols;
    out.write(kCacheMagic, 4);
    out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
    out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
    out.write(reinterpret_cast<const char*>(set.rows.values.data()),
              static_cast<std::streamsize>(set.rows.values.size() * sizeof(float)));
    out.write(reinterpret_cast<const char*>(set.labels.data()),
              static_cast<std::streamsize>(set.labels.size() * sizeof(int)));
    if (!out) return;
  }
  fs::rename(tmp, path);
}

}  // namespace

EmbeddingSet compute_embeddings(const ModelBundle& bundle, std::span<const LabeledSample> samples,
                                const EmbeddingOptions& options) {
  if (bundle.precision != Precision::kFloat32) {
    throw FormatError(FormatError::Kind::kPrecision, "embeddings require a float32 bundle");
  }
  const auto dim = static_cast<std::size_t>(bundle.config.embedding_dim);
  std::optional<fs::path> cache;
  if (options.cache_dir) {
    cache = cache_path(*options.cache_dir, bundle, samples);
    if (auto hit = read_cache(*cache, samples.size(), dim)) return std::move(*hit);
  }

  EmbeddingSet set;
  set.rows = Matrix<float>(samples.size(), dim);
  set.labels.resize(samples.size());

  const unsigned workers = std::max(1u, std::min<unsigned>(options.workers, static_cast<unsigned>(samples.size())));
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&](unsigned worker) {
    for (std::size_t i = worker; i < samples.size(); i += workers) {
      try {
        const Tensor input = preprocess(load_sample_image(samples[i]), bundle.preprocess);
        const std::vector<float> e = forward(bundle.config, bundle.backbone, input);
        std::copy(e.begin(), e.end(), set.rows.row(i).begin());
        set.labels[i] = samples[i].class_id;
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w);
  }
  if (failure) std::rethrow_exception(failure);
  if (cache) write_cache(*cache, set);
  return set;
}

double cross_entropy(std::span<const double> probabilities, int true_class) {
  if (true_class < 0 || static_cast<std::size_t>(true_class) >= probabilities.size()) {
    throw std::out_of_range("cross_entropy: class " + std::to_string(true_class) + " out of range");
  }
  return -std::log(std::max(probabilities[static_cast<std::size_t>(true_class)], 1e-12));
}

std::vector<double> predict(const SoftmaxHead& head, std::span<const double> embedding) {
  const std::vector<double> logits = dense<double>(embedding, head.weights, head.bias);
  return softmax(std::span<const double>(logits));
}

std::vector<double> predict(const SoftmaxHead& head, std::span<const float> embedding) {
  const std::vector<double> wide(embedding.begin(), embedding.end());
  return predict(head, std::span<const double>(wide));
}

namespace {

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

HeadGradient head_gradient(const SoftmaxHead& head, const EmbeddingSet& data, std::span<const std::size_t> batch,
                           double l2, std::span<const double> class_weights) {
  const std::size_t dim = head.embedding_dim();
  const std::size_t classes = head.classes();
  if (data.rows.cols != dim) throw ShapeError("head_gradient: embedding width does not match head");
  HeadGradient g{Matrix<double>(dim, classes, 0.0), std::vector<double>(classes, 0.0), 0.0};
  if (batch.empty()) return g;

  std::vector<double> x(dim);
  for (std::size_t idx : batch) {
    const auto row = data.rows.row(idx);
    std::copy(row.begin(), row.end(), x.begin());
    const int y = data.labels[idx];
    const double w = class_weights.empty() ? 1.0 : class_weights[static_cast<std::size_t>(y)];
    std::vector<double> delta = predict(head, std::span<const double>(x));
    g.loss += w * cross_entropy(delta, y);
    delta[static_cast<std::size_t>(y)] -= 1.0;
    for (double& d : delta) d *= w;
    for (std::size_t e = 0; e < dim; ++e) {
      const double xe = x[e];
      double* gw = g.weights.values.data() + e * classes;
      for (std::size_t k = 0; k < classes; ++k) gw[k] += xe * delta[k];
    }
    for (std::size_t k = 0; k < classes; ++k) g.bias[k] += delta[k];
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  g.loss *= inv;
  for (double& v : g.weights.values) v *= inv;
  for (double& v : g.bias) v *= inv;
  if (l2 != 0.0) {
    double sq = 0.0;
    for (std::size_t i = 0; i < g.weights.values.size(); ++i) {
      const double wv = head.weights.values[i];
      sq += wv * wv;
      g.weights.values[i] += l2 * wv;
    }
    g.loss += 0.5 * l2 * sq;
  }
  return g;
}

LossAccuracy measure(const SoftmaxHead& head, const EmbeddingSet& data) {
  LossAccuracy m;
  if (data.size() == 0) return m;
  std::size_t correct = 0;
  double loss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::vector<double> p = predict(head, data.rows.row(i));
    loss += cross_entropy(p, data.labels[i]);
    if (static_cast<int>(argmax(p)) == data.labels[i]) ++correct;
  }
  m.loss = loss / static_cast<double>(data.size());
  m.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return m;
}

FeatureScaling FeatureScaling::identity(std::size_t dim) {
  return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
}

FeatureScaling feature_scaling(const EmbeddingSet& data) {
  const std::size_t n = data.size();
  const std::size_t dim = data.rows.cols;
  FeatureScaling s = FeatureScaling::identity(dim);
  if (n == 0) return s;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = data.rows.row(i);
    for (std::size_t e = 0; e < dim; ++e) s.mean[e] += row[e];
  }
  for (double& m : s.mean) m /= static_cast<double>(n);
  std::vector<double> var(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = data.rows.row(i);
    for (std::size_t e = 0; e < dim; ++e) {
      const double d = row[e] - s.mean[e];
      var[e] += d * d;
    }
  }
  for (std::size_t e = 0; e < dim; ++e) {
    const double sd = std::sqrt(var[e] / static_cast<double>(n));
    s.stddev[e] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

EmbeddingSet standardized(const EmbeddingSet& data, const FeatureScaling& scaling) {
  if (scaling.mean.size() != data.rows.cols) throw ShapeError("feature scaling width differs from embeddings");
  EmbeddingSet out{Matrix<float>(data.size(), data.rows.cols), data.labels};
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto in = data.rows.row(i);
    const auto dst = out.rows.row(i);
    for (std::size_t e = 0; e < in.size(); ++e) {
      dst[e] = static_cast<float>((in[e] - scaling.mean[e]) / scaling.stddev[e]);
    }
  }
  return out;
}

SoftmaxHead fold_scaling(const SoftmaxHead& head, const FeatureScaling& scaling) {
  if (scaling.mean.size() != head.embedding_dim()) throw ShapeError("feature scaling width differs from head");
  SoftmaxHead out = head;
  for (std::size_t e = 0; e < head.embedding_dim(); ++e) {
    for (std::size_t k = 0; k < head.classes(); ++k) {
      const double w = head.weights(e, k) / scaling.stddev[e];
      out.weights(e, k) = w;
      out.bias[k] -= scaling.mean[e] * w;
    }
  }
  return out;
}

TrainResult train_head(const EmbeddingSet& train, const EmbeddingSet& val, const TrainConfig& config) {
  if (config.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (!(std::isfinite(config.learning_rate) && config.learning_rate >= 0.0)) {
    throw std::invalid_argument("learning rate must be finite and >= 0");
  }
  if (config.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (train.size() < config.batch_size) {
    throw std::invalid_argument("training set (" + std::to_string(train.size()) + ") smaller than batch size " +
                                std::to_string(config.batch_size));
  }
  if (val.size() > 0 && val.rows.cols != train.rows.cols) throw ShapeError("validation embedding width differs");

  std::vector<std::size_t> class_counts(kNumClasses, 0);
  for (int y : train.labels) {
    if (y < 0 || y >= static_cast<int>(kNumClasses)) throw DataError(DataError::Kind::kMalformed, "label out of range");
    ++class_counts[static_cast<std::size_t>(y)];
  }
  const auto present = std::count_if(class_counts.begin(), class_counts.end(), [](std::size_t c) { return c > 0; });
  if (present < 2) throw DataError(DataError::Kind::kMissingClass, "training data must cover at least two classes");

  std::vector<double> class_weights;
  if (config.inverse_frequency_weights) {
    class_weights.assign(kNumClasses, 0.0);
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      if (class_counts[c] > 0) {
        class_weights[c] = static_cast<double>(train.size()) /
                           (static_cast<double>(present) * static_cast<double>(class_counts[c]));
      }
    }
  }

  TrainResult result;
  result.head = SoftmaxHead::zeros(train.rows.cols, kNumClasses);
  const FeatureScaling scaling = config.standardize ? feature_scaling(train) : FeatureScaling::identity(train.rows.cols);
  const EmbeddingSet fit = config.standardize ? standardized(train, scaling) : EmbeddingSet{};
  const EmbeddingSet& data = config.standardize ? fit : train;
  SoftmaxHead working = result.head;
  try {
    const LossAccuracy initial = measure(result.head, train);
    result.initial_train_loss = initial.loss;
    result.initial_train_accuracy = initial.accuracy;
  } catch (const NumericError&) {
    // Reported with its epoch and batch once SGD reaches the bad row.
    result.initial_train_loss = std::numeric_limits<double>::quiet_NaN();
  }

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t len = std::min(config.batch_size, order.size() - start);
      const std::string where = "epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index);
      HeadGradient g;
      try {
        g = head_gradient(working, data, std::span<const std::size_t>(order).subspan(start, len), config.l2,
                          class_weights);
      } catch (const NumericError& e) {
        throw NumericError("non-finite loss at " + where + " (" + e.what() + ")");
      }
      if (!std::isfinite(g.loss)) throw NumericError("non-finite loss at " + where);
      for (std::size_t i = 0; i < g.weights.values.size(); ++i) {
        working.weights.values[i] -= config.learning_rate * g.weights.values[i];
      }
      for (std::size_t k = 0; k < g.bias.size(); ++k) working.bias[k] -= config.learning_rate * g.bias[k];
    }
    result.head = fold_scaling(working, scaling);
    EpochRecord rec;
    rec.epoch = epoch;
    const LossAccuracy t = measure(result.head, train);
    rec.train_loss = t.loss;
    rec.train_accuracy = t.accuracy;
    const LossAccuracy v = measure(result.head, val);
    rec.val_loss = v.loss;
    rec.val_accuracy = v.accuracy;
    result.records.push_back(rec);
  }
  return result;
}

}  // namespace edgederm
