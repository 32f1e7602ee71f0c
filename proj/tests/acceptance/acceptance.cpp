// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. Every check is seeded.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "edgederm/benchmark.hpp"
#include "edgederm/bundle.hpp"
#include "edgederm/classify.hpp"
#include "edgederm/compression.hpp"
#include "edgederm/dataset.hpp"
#include "edgederm/error.hpp"
#include "edgederm/evaluator.hpp"
#include "edgederm/head.hpp"
#include "edgederm/image_io.hpp"
#include "edgederm/kernels.hpp"
#include "edgederm/service.hpp"
#include "edgederm/stream.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

namespace edgederm {
namespace {

using namespace std::chrono_literals;
using nlohmann::json;
using testing::Gen;

// Collects the first few failure messages of one criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures_;
    if (messages_.size() < 3) messages_.push_back(what);
  }
  bool ok() const { return failures_ == 0; }
  std::string summary() const {
    std::ostringstream os;
    os << failures_ << " failure(s)";
    for (const std::string& m : messages_) os << "; " << m;
    return os.str();
  }

 private:
  std::size_t failures_ = 0;
  std::vector<std::string> messages_;
};

std::string num(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

ConvParams conv(Tensor w, std::vector<float> b, int stride, Padding pad) {
  ConvParams p;
  p.weights = std::move(w);
  p.bias = std::move(b);
  p.stride = stride;
  p.padding = pad;
  return p;
}

// 100 random cases per kernel, absolute tolerance 1e-5, under 30 s in total.
void kernel_oracles(Check& c) {
  const auto start = std::chrono::steady_clock::now();
  Gen g(9001);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<std::size_t>(g.integer(1, 2));
    const auto h = static_cast<std::size_t>(g.integer(1, 9));
    const auto w = static_cast<std::size_t>(g.integer(1, 9));
    const auto cin = static_cast<std::size_t>(g.integer(1, 6));
    const auto cout = static_cast<std::size_t>(g.integer(1, 6));
    const auto k = static_cast<std::size_t>(g.integer(1, 3));
    const int stride = g.integer(1, 2);
    const Padding pad = resolve_padding(PadMode::kSame, h, w, k, k, stride);
    const Tensor in = g.tensor({n, h, w, cin});
    const Tensor wt = g.tensor({k, k, cin, cout});
    const std::vector<float> bias = g.floats(cout, -1, 1);
    const Tensor out = conv2d(in, conv(wt, bias, stride, pad));
    std::size_t oh = 0, ow = 0;
    const auto ref = testing::oracle_conv2d(in.values(), {n, h, w, cin}, wt.values(), k, k, cout, bias, stride,
                                            pad.top, pad.bottom, pad.left, pad.right, &oh, &ow);
    c.expect(out.shape() == Shape{n, oh, ow, cout}, "conv2d shape, trial " + std::to_string(trial));
    if (out.size() != ref.size()) continue;
    for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(out[i] - ref[i]));
  }
  c.expect(worst <= 1e-5, "conv2d max deviation " + num(worst));

  worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto h = static_cast<std::size_t>(g.integer(1, 9));
    const auto w = static_cast<std::size_t>(g.integer(1, 9));
    const auto ch = static_cast<std::size_t>(g.integer(1, 8));
    const auto k = static_cast<std::size_t>(g.integer(1, 3));
    const int stride = g.integer(1, 2);
    const Padding pad = resolve_padding(PadMode::kSame, h, w, k, k, stride);
    const Tensor in = g.tensor({1, h, w, ch});
    const Tensor wt = g.tensor({k, k, ch, 1});
    const std::vector<float> bias = g.floats(ch, -1, 1);
    const Tensor out = depthwise_conv2d(in, conv(wt, bias, stride, pad));
    std::size_t oh = 0, ow = 0;
    const auto ref = testing::oracle_depthwise(in.values(), {1, h, w, ch}, wt.values(), k, k, bias, stride, pad.top,
                                               pad.bottom, pad.left, pad.right, &oh, &ow);
    c.expect(out.shape() == Shape{1, oh, ow, ch}, "depthwise shape, trial " + std::to_string(trial));
    if (out.size() != ref.size()) continue;
    for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(out[i] - ref[i]));
  }
  c.expect(worst <= 1e-5, "depthwise max deviation " + num(worst));

  worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto e = static_cast<std::size_t>(g.integer(1, 64));
    const auto k = static_cast<std::size_t>(g.integer(1, 10));
    Matrix<double> wm(e, k);
    wm.values = g.doubles(e * k, -1, 1);
    const auto x = g.doubles(e, -1, 1);
    const auto b = g.doubles(k, -1, 1);
    const auto out = dense<double>(x, wm, b);
    const auto ref = testing::oracle_dense(x, wm.values, k, b);
    for (std::size_t j = 0; j < k; ++j) worst = std::max(worst, std::abs(out[j] - ref[j]));
  }
  c.expect(worst <= 1e-5, "dense max deviation " + num(worst));
  const double elapsed = seconds_since(start);
  c.expect(elapsed < 30.0, "runtime " + num(elapsed) + " s");
}

// 1000 vectors: sum within 1e-6, shift invariance within 1e-9, argmax kept.
void softmax_properties(Check& c) {
  Gen g(9002);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = static_cast<std::size_t>(g.integer(1, 16));
    const double spread = trial % 4 == 0 ? 50.0 : 5.0;
    const std::vector<double> z = g.doubles(n, -spread, spread);
    const std::vector<double> p = softmax(std::span<const double>(z));
    double sum = 0.0;
    for (double v : p) sum += v;
    c.expect(std::abs(sum - 1.0) <= 1e-6, "sum " + num(sum) + ", trial " + std::to_string(trial));

    const double shift = g.uniform(-100.0, 100.0);
    std::vector<double> shifted = z;
    for (double& v : shifted) v += shift;
    const std::vector<double> q = softmax(std::span<const double>(shifted));
    double dev = 0.0;
    for (std::size_t i = 0; i < n; ++i) dev = std::max(dev, std::abs(p[i] - q[i]));
    c.expect(dev <= 1e-9, "shift deviation " + num(dev) + ", trial " + std::to_string(trial));

    const auto az = std::max_element(z.begin(), z.end()) - z.begin();
    const auto ap = std::max_element(p.begin(), p.end()) - p.begin();
    c.expect(az == ap, "argmax moved, trial " + std::to_string(trial));
  }
}

// 20 instances, central differences h = 1e-4, max relative error 1e-4.
void gradient_check(Check& c) {
  Gen g(9003);
  constexpr double h = 1e-4;
  double worst = 0.0;
  for (int instance = 0; instance < 20; ++instance) {
    const auto dim = static_cast<std::size_t>(g.integer(2, 12));
    const EmbeddingSet data = testing::random_set(g, 40, dim, 2.0f);
    std::vector<std::size_t> batch;
    for (int i = 0; i < g.integer(1, 16); ++i) batch.push_back(static_cast<std::size_t>(g.integer(0, 39)));
    const double l2 = instance % 3 == 0 ? g.uniform(0.0, 0.1) : 0.0;
    SoftmaxHead head = testing::random_head(g, dim, 7, 0.7);
    const HeadGradient analytic = head_gradient(head, data, batch, l2);
    auto loss_at = [&](double& param, double value) {
      const double saved = param;
      param = value;
      const double loss = head_gradient(head, data, batch, l2).loss;
      param = saved;
      return loss;
    };
    auto probe = [&](double& param, double grad) {
      const double x = param;
      const double numeric = (loss_at(param, x + h) - loss_at(param, x - h)) / (2 * h);
      worst = std::max(worst, std::abs(grad - numeric) / std::max({std::abs(grad), std::abs(numeric), 1e-7}));
    };
    for (std::size_t i = 0; i < head.weights.values.size(); ++i) probe(head.weights.values[i], analytic.weights.values[i]);
    for (std::size_t k = 0; k < 7; ++k) probe(head.bias[k], analytic.bias[k]);
  }
  c.expect(worst <= 1e-4, "max relative error " + num(worst));
}

// 7 classes x 50, 50 epochs: train accuracy >= 0.95, initial loss within
// 0.05 of ln 7, epoch CSV parses back exactly.
void training_sanity(Check& c) {
  Gen g(9004);
  const EmbeddingSet train = testing::separable_set(g, 50, 16);
  const EmbeddingSet val = testing::separable_set(g, 10, 16);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.learning_rate = 0.1;
  cfg.seed = 4;
  const TrainResult r = train_head(train, val, cfg);
  c.expect(r.records.size() == 50, "epochs recorded " + std::to_string(r.records.size()));
  double best = 0.0;
  for (const EpochRecord& rec : r.records) best = std::max(best, rec.train_accuracy);
  c.expect(best >= 0.95, "best train accuracy " + num(best));
  c.expect(std::abs(r.initial_train_loss - std::log(7.0)) <= 0.05, "initial loss " + num(r.initial_train_loss));
  c.expect(parse_epoch_csv(render_epoch_csv(r.records)) == r.records, "CSV round trip differs");
}

// 70 synthetic images, tiny backbone, 10 epochs: test accuracy >= 0.6 and
// above 1/7, under 2 minutes.
void tiny_pipeline(Check& c) {
  const auto start = std::chrono::steady_clock::now();
  const auto samples = synth_dataset(10, 9005);
  c.expect(samples.size() == 70, "dataset size " + std::to_string(samples.size()));
  const DatasetSplits split = stratified_split(samples, SplitSpec{0.8, 0.1, 0.1, 9005});
  ModelBundle bundle = make_bundle(build_tiny_config(), 9005);
  const EmbeddingSet train = compute_embeddings(bundle, split.train);
  const EmbeddingSet val = compute_embeddings(bundle, split.val);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.batch_size = 8;
  bundle.head = train_head(train, val, cfg).head;
  const EvalReport report = evaluate(bundle, bundle.head, split.test);
  const double elapsed = seconds_since(start);
  c.expect(report.accuracy >= 0.6, "test accuracy " + num(report.accuracy));
  c.expect(report.accuracy > 1.0 / 7.0, "not above chance");
  c.expect(elapsed < 120.0, "runtime " + num(elapsed) + " s");
}

// 1000 random prediction sets against the counting oracle; literature rows verbatim.
void metrics_oracle(Check& c) {
  Gen g(9006);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = g.integer(1, 300);
    const int skew = g.integer(0, 2);
    std::vector<int> truth, pred;
    std::vector<double> losses;
    for (int i = 0; i < n; ++i) {
      const int t = skew == 0 ? g.integer(0, 6) : g.integer(0, 6) / (skew + 1);
      truth.push_back(t);
      pred.push_back(g.coin() ? t : g.integer(0, 6));
      losses.push_back(g.uniform(0.0, 4.0));
    }
    const EvalReport r = build_report(truth, pred, losses);
    const testing::OracleMetrics o = testing::counting_oracle(truth, pred, losses);
    const std::string at = ", trial " + std::to_string(trial);
    bool counts = r.n == truth.size();
    for (std::size_t i = 0; i < 7; ++i)
      for (std::size_t j = 0; j < 7; ++j) counts = counts && r.confusion.at(i, j) == o.counts[i * 7 + j];
    c.expect(counts, "confusion counts" + at);
    c.expect(r.accuracy == o.accuracy, "accuracy" + at);
    bool per_class = true;
    for (std::size_t k = 0; k < 7; ++k) {
      per_class = per_class && std::abs(r.per_class[k].precision - o.precision[k]) <= 1e-12 &&
                  std::abs(r.per_class[k].recall - o.recall[k]) <= 1e-12 &&
                  std::abs(r.per_class[k].f1 - o.f1[k]) <= 1e-12;
    }
    c.expect(per_class, "per-class metrics" + at);
    c.expect(std::abs(r.averaged.precision - o.macro_p) <= 1e-12 && std::abs(r.averaged.recall - o.macro_r) <= 1e-12 &&
                 std::abs(r.averaged.f1 - o.macro_f1) <= 1e-12,
             "macro averages" + at);
    c.expect(std::abs(r.mean_loss - o.loss) <= 1e-12, "mean loss" + at);
  }

  const std::string table = render_comparison(literature_rows());
  std::istringstream in(table);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> values;
  while (std::getline(in, line)) {
    const auto space = line.find_last_of(' ');
    values.push_back(line.substr(space + 1));
  }
  std::sort(values.begin(), values.end());
  c.expect(values == std::vector<std::string>{"66.7", "78.0", "95.2", "99.0"}, "literature rows:\n" + table);
}

// Round trip, corruption detection, int8 payload size, quantization error,
// float/int8 agreement.
void bundle_format(Check& c) {
  Gen g(9007);
  for (int trial = 0; trial < 50; ++trial) {
    const ModelBundle b = testing::random_bundle(g);
    const std::vector<std::uint8_t> bytes = serialize(b);
    const ModelBundle back = deserialize(bytes);
    c.expect(bitwise_equal(back, b) && serialize(back) == bytes, "round trip, trial " + std::to_string(trial));
  }

  std::size_t corrupted = 0, detected = 0;
  for (bool int8 : {false, true}) {
    ModelBundle b = make_bundle(build_tiny_config(), 9007);
    b.head = testing::random_head(g, b.head.embedding_dim(), 7);
    if (int8) b = quantize_int8(b);
    const auto bytes = serialize(b);
    for (std::size_t i = 0; i < bytes.size(); ++i) {
      auto bad = bytes;
      bad[i] ^= static_cast<std::uint8_t>(g.integer(1, 255));
      ++corrupted;
      try {
        (void)deserialize(bad);
      } catch (const FormatError&) {
        ++detected;
      }
    }
  }
  c.expect(detected == corrupted, "detected " + std::to_string(detected) + " of " + std::to_string(corrupted));

  for (const ArchitectureConfig& config : {build_tiny_config(), build_default_config(0.35, 96)}) {
    const ModelBundle q = quantize_int8(make_bundle(config, g.seed()));
    const std::size_t value_bytes = testing::walk_backbone(serialize(q)).value_bytes;
    c.expect(value_bytes == parameter_count(config),
             "int8 value bytes " + std::to_string(value_bytes) + " vs params " + std::to_string(parameter_count(config)));
  }

  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = static_cast<std::size_t>(g.integer(1, 200));
    const float lo = g.uniformf(-5.0f, 5.0f);
    std::vector<float> v = g.floats(n, lo, lo + g.uniformf(0.0f, 10.0f));
    if (trial % 10 == 0) std::fill(v.begin(), v.end(), v[0]);
    const QuantizedTensor qt = quantize_tensor({n}, v);
    const std::vector<float> back = dequantize(qt);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, static_cast<double>(std::abs(back[i] - v[i])));
    // Relative slack covers the float rounding of the dequantized value.
    c.expect(worst <= qt.params.scale / 2.0 * (1 + 1e-5),
             "quantization error " + num(worst) + " > scale/2, trial " + std::to_string(trial));
  }

  ModelBundle f = make_bundle(build_tiny_config(), 9008);
  f.head = testing::random_head(g, f.head.embedding_dim(), 7);
  const AgreementStats stats = dequantized_forward_check(f, quantize_int8(f), testing::random_images(g, 50, 32));
  c.expect(stats.images == 50 && stats.top1_agreement >= 0.95, "top-1 agreement " + num(stats.top1_agreement));
}

void pruning(Check& c) {
  Gen g(9009);
  ModelBundle b = make_bundle(build_tiny_config(), 9009);
  b.head = testing::random_head(g, b.head.embedding_dim(), 7);
  c.expect(bitwise_equal(prune_magnitude(b, 0.0).bundle, b), "p=0 changed the bundle");
  bool all_zero = true;
  for (const ConvParams& p : prune_magnitude(b, 1.0).bundle.backbone.convs) {
    for (float v : p.weights.values()) all_zero = all_zero && v == 0.0f;
  }
  c.expect(all_zero, "p=1 left non-zero weights");

  ModelBundle ten = make_bundle(testing::ten_weight_config(), 9009);
  ten.backbone.convs[0].weights.values() = {0.5f, -0.1f, 0.3f, -0.9f, 0.05f, 0.7f};
  ten.backbone.convs[1].weights.values() = {-0.2f, 0.4f, 0.6f, -0.8f};
  const PruneResult ten_half = prune_magnitude(ten, 0.5);
  const auto ten_oracle = testing::prune_oracle(ten, 0.5);
  c.expect(ten_half.bundle.backbone.convs[0].weights.values() == std::vector<float>{0.5f, 0, 0, -0.9f, 0, 0.7f} &&
               ten_half.bundle.backbone.convs[1].weights.values() == std::vector<float>{0, 0, 0.6f, -0.8f} &&
               ten_half.bundle.backbone.convs[0].weights.values() == ten_oracle[0] &&
               ten_half.bundle.backbone.convs[1].weights.values() == ten_oracle[1],
           "10-weight toy: p=0.5 did not zero exactly the five smallest");

  // Larger toy: coarse values so magnitude ties are common.
  ModelBundle toy = make_bundle(build_tiny_config(), 9010);
  for (ConvParams& p : toy.backbone.convs) {
    for (float& v : p.weights.values()) v = static_cast<float>(g.integer(-6, 6)) * 0.125f;
  }
  const PruneResult half = prune_magnitude(toy, 0.5);
  const auto oracle = testing::prune_oracle(toy, 0.5);
  bool same = true;
  for (std::size_t i = 0; i < oracle.size(); ++i) same = same && half.bundle.backbone.convs[i].weights.values() == oracle[i];
  c.expect(same, "p=0.5 differs from the sort oracle");

  double last = -1.0;
  for (int step = 0; step <= 20; ++step) {
    const double s = prune_magnitude(toy, step / 20.0).report.sparsity;
    c.expect(s >= last, "sparsity decreased at p=" + num(step / 20.0));
    last = s;
  }
}

// Compares everything except the capture timestamp.
bool same_prediction(json a, json b) {
  a.erase("timestamp_us");
  b.erase("timestamp_us");
  return a == b;
}

bool has_disclaimer(const json& j) {
  return j.is_object() && j.contains("disclaimer") && j.at("disclaimer") == std::string(kDisclaimer);
}

// Reads `count` SSE result events from /events.
std::vector<json> result_events(int port, std::size_t count, std::vector<json>& all) {
  httplib::Client client("127.0.0.1", port);
  client.set_read_timeout(10, 0);
  std::vector<json> results;
  std::string buffer;
  client.Get("/events", [&](const char* data, std::size_t len) {
    buffer.append(data, len);
    for (std::size_t end; (end = buffer.find("\n\n")) != std::string::npos;) {
      const std::string block = buffer.substr(0, end);
      buffer.erase(0, end + 2);
      std::string name, payload;
      std::istringstream lines(block);
      for (std::string line; std::getline(lines, line);) {
        if (line.rfind("event: ", 0) == 0) name = line.substr(7);
        if (line.rfind("data: ", 0) == 0) payload = line.substr(6);
      }
      if (name.empty()) continue;
      all.push_back(json::parse(payload));
      if (name == "result") results.push_back(all.back());
      if (results.size() >= count) return false;
    }
    return true;
  });
  return results;
}

void service_contract(Check& c) {
  Gen g(9011);
  ModelBundle bundle = make_bundle(build_tiny_config(), 9011);
  bundle.head = testing::random_head(g, bundle.head.embedding_dim(), 7, 0.3);
  auto classifier = std::make_shared<const Classifier>(bundle);

  ServiceOptions options;
  options.port = 0;
  options.keepalive = 200ms;
  ClassifyService service(classifier, open_source(parse_source_spec("synthetic", 20ms)), options);
  const int port = service.start();
  httplib::Client client("127.0.0.1", port);

  const auto labels = client.Get("/labels");
  c.expect(labels && labels->status == 200, "/labels unreachable");
  if (labels) {
    const json body = json::parse(labels->body);
    c.expect(body.at("labels") == std::vector<std::string>{"benign keratosis", "melanocytic nevus", "dermatofibroma",
                                                          "melanoma", "vascular lesion", "basal cell carcinoma",
                                                          "actinic keratosis"},
             "label order " + body.at("labels").dump());
    c.expect(has_disclaimer(body), "/labels lacks the disclaimer");
  }

  // Stream: strictly increasing timestamps, disclaimer on every event.
  std::vector<json> events;
  const std::vector<json> results = result_events(port, 8, events);
  c.expect(results.size() == 8, "stream delivered " + std::to_string(results.size()) + " results");
  for (std::size_t i = 1; i < results.size(); ++i) {
    c.expect(results[i].at("timestamp_us") > results[i - 1].at("timestamp_us"), "timestamps not increasing");
  }
  for (const json& e : events) c.expect(has_disclaimer(e), "event lacks the disclaimer: " + e.dump());

  // Concurrent /classify equals the serialized result for the same image.
  std::vector<std::string> bodies;
  std::vector<json> serial;
  for (int i = 0; i < 6; ++i) {
    const Image img = g.image(48, 40);
    const auto png = encode_png(img);
    bodies.emplace_back(png.begin(), png.end());
    const auto res = client.Post("/classify", bodies.back(), "image/png");
    c.expect(res && res->status == 200, "/classify failed");
    serial.push_back(res ? json::parse(res->body) : json{});
    c.expect(has_disclaimer(serial.back()), "/classify lacks the disclaimer");
    c.expect(same_prediction(serial.back(), json::parse(to_json(classifier->classify(img)))),
             "/classify differs from the library");
  }
  std::vector<std::future<json>> futures;
  for (int round = 0; round < 3; ++round) {
    for (std::size_t i = 0; i < bodies.size(); ++i) {
      futures.push_back(std::async(std::launch::async, [&, i] {
        httplib::Client local("127.0.0.1", port);
        const auto res = local.Post("/classify", bodies[i], "image/png");
        return res && res->status == 200 ? json::parse(res->body) : json{};
      }));
    }
  }
  for (std::size_t f = 0; f < futures.size(); ++f) {
    c.expect(same_prediction(futures[f].get(), serial[f % bodies.size()]), "concurrent /classify differs");
  }

  // Every JSON endpoint, error or not, carries the disclaimer.
  const auto capture = client.Post("/capture");
  c.expect(capture && capture->status == 201, "/capture failed");
  for (const char* path : {"/health", "/result", "/history", "/history/999/frame", "/missing"}) {
    const auto res = client.Get(path);
    c.expect(res && res->get_header_value("Content-Type") == "application/json" && has_disclaimer(json::parse(res->body)),
             std::string(path) + " lacks the disclaimer");
  }
  if (capture) c.expect(has_disclaimer(json::parse(capture->body)), "/capture lacks the disclaimer");
  const auto bad = client.Post("/classify", "not an image", "application/octet-stream");
  c.expect(bad && bad->status == 400 && has_disclaimer(json::parse(bad->body)), "error body lacks the disclaimer");
  service.stop();

  const ClassificationResult direct = classifier->classify(g.image(32, 32));
  c.expect(has_disclaimer(json::parse(to_json(direct))), "to_json lacks the disclaimer");
  for (bool verbose : {false, true}) {
    const std::string text = render_text(direct, verbose);
    c.expect(text.find(kDisclaimer) != std::string::npos, "render_text lacks the disclaimer");
  }

  // Benchmark order statistics and activation estimate.
  const BenchmarkReport report = run_benchmark(*classifier, 20, 9011);
  c.expect(report.p50_ms <= report.p95_ms && report.p95_ms <= report.max_ms,
           "p50 " + num(report.p50_ms) + " p95 " + num(report.p95_ms) + " max " + num(report.max_ms));
  for (const ArchitectureConfig& config : {build_tiny_config(), build_default_config(1.0, 224)}) {
    c.expect(peak_activation_bytes(config) == testing::oracle_walk(config).peak_bytes, "activation estimate differs");
  }
  c.expect(report.peak_activation_bytes == testing::oracle_walk(bundle.config).peak_bytes,
           "benchmark activation estimate differs");
}

struct Criterion {
  const char* name;
  std::function<void(Check&)> run;
};

}  // namespace
}  // namespace edgederm

int main() {
  using edgederm::Check;
  const std::vector<edgederm::Criterion> criteria{
      {"kernel oracles", edgederm::kernel_oracles},       {"softmax properties", edgederm::softmax_properties},
      {"gradient check", edgederm::gradient_check},       {"training sanity", edgederm::training_sanity},
      {"tiny end-to-end pipeline", edgederm::tiny_pipeline}, {"metrics oracle", edgederm::metrics_oracle},
      {"bundle format", edgederm::bundle_format},         {"pruning", edgederm::pruning},
      {"service contract", edgederm::service_contract},
  };
  int failed = 0;
  for (const auto& criterion : criteria) {
    Check check;
    const auto start = std::chrono::steady_clock::now();
    try {
      criterion.run(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = edgederm::seconds_since(start);
    if (check.ok()) {
      std::printf("PASS  %-26s (%.2f s)\n", criterion.name, secs);
    } else {
      ++failed;
      std::printf("FAIL  %-26s (%.2f s) %s\n", criterion.name, secs, check.summary().c_str());
    }
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
