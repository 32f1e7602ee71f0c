// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <atomic>
#include <fstream>
#include <mutex>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "edgederm/benchmark.hpp"
#include "edgederm/bundle.hpp"
#include "edgederm/classify.hpp"
#include "edgederm/compression.hpp"
#include "edgederm/dataset.hpp"
#include "edgederm/error.hpp"
#include "edgederm/image_io.hpp"
#include "edgederm/stream.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

namespace edgederm {
namespace {

using namespace std::chrono_literals;
using testing::Gen;

ModelBundle trained_like_bundle(std::uint64_t seed) {
  Gen g(seed);
  ModelBundle b = make_bundle(build_tiny_config(), seed);
  b.head = testing::random_head(g, b.head.embedding_dim(), 7, 0.3);
  return b;
}

TEST(Classify, ZeroHeadGivesFiveFourteens) {
  const ModelBundle b = make_bundle(build_tiny_config(), 1);
  const ClassificationResult r = classify(b, b.head, synth_image(3, 1, 40));
  ASSERT_EQ(r.top.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_NEAR(r.top[i].probability, 1.0 / 7.0, 1e-12);
    EXPECT_EQ(r.top[i].class_id, static_cast<int>(i));  // ties keep label order
  }
  const std::string text = render_text(r);
  std::istringstream in(text);
  std::string line;
  for (std::size_t i = 0; i < 5; ++i) {
    ASSERT_TRUE(std::getline(in, line));
    EXPECT_EQ(line, r.top[i].label + " – 14");
  }
  ASSERT_TRUE(std::getline(in, line));
  EXPECT_EQ(line, kDisclaimer);
}

TEST(Classify, ResultInvariants) {
  Gen g(500);
  for (int trial = 0; trial < 30; ++trial) {
    const ModelBundle b = testing::random_bundle(g);
    const Image img = g.image(static_cast<std::size_t>(g.integer(8, 64)), static_cast<std::size_t>(g.integer(8, 64)));
    const ClassificationResult r = classify(b, b.head, img);
    ASSERT_EQ(r.top.size(), 5u);
    ASSERT_EQ(r.distribution.size(), 7u);
    double all = 0;
    for (std::size_t k = 0; k < 7; ++k) {
      EXPECT_EQ(r.distribution[k].class_id, static_cast<int>(k));
      EXPECT_EQ(r.distribution[k].label, b.labels[k]);
      all += r.distribution[k].probability;
    }
    EXPECT_NEAR(all, 1.0, 1e-6);
    double top = 0;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < 5; ++i) {
      EXPECT_GE(r.top[i].probability, 0.0);
      EXPECT_LE(r.top[i].probability, 1.0);
      if (i > 0) {
        EXPECT_GE(r.top[i - 1].probability, r.top[i].probability);
      }
      seen.insert(r.top[i].label);
      top += r.top[i].probability;
      EXPECT_EQ(r.top[i], r.distribution[static_cast<std::size_t>(r.top[i].class_id)]);
    }
    EXPECT_EQ(seen.size(), 5u);
    EXPECT_LE(top, 1.0 + 1e-12);
    EXPECT_EQ(r.disclaimer, kDisclaimer);
    EXPECT_EQ(r.model_checksum, checksum(b));
  }
}

TEST(Classify, RankTopKTiesAndBounds) {
  const std::vector<double> p{0.1, 0.3, 0.1, 0.3, 0.2};
  EXPECT_EQ(rank_top_k(p, 5), (std::vector<std::size_t>{1, 3, 4, 0, 2}));
  EXPECT_EQ(rank_top_k(p, 2), (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(rank_top_k(p, 9).size(), 5u);
}

TEST(Classify, DeterministicAndMatchesManualPipeline) {
  const ModelBundle b = trained_like_bundle(501);
  const Classifier c(b);
  const Image img = synth_image(2, 9, 50);
  const ClassificationResult a = c.classify(img, 42);
  const ClassificationResult again = c.classify(img, 42);
  EXPECT_EQ(a, again);
  EXPECT_EQ(a.timestamp_us, 42);
  const auto e = forward(b.config, b.backbone, preprocess(img, b.preprocess));
  const auto p = predict(b.head, std::span<const float>(e));
  for (std::size_t k = 0; k < 7; ++k) EXPECT_EQ(a.distribution[k].probability, p[k]);
}

TEST(Classify, Int8ClassifierKeepsOriginalChecksum) {
  const ModelBundle b = trained_like_bundle(502);
  const ModelBundle q = quantize_int8(b);
  const Classifier c(q);
  EXPECT_EQ(c.checksum(), checksum(q));
  EXPECT_EQ(c.source_bundle().precision, Precision::kInt8);
  const ClassificationResult r = c.classify(synth_image(1, 1, 32), 1);
  EXPECT_EQ(r.model_checksum, checksum(q));
  EXPECT_EQ(r.distribution, classify(dequantize_bundle(q), q.head, synth_image(1, 1, 32)).distribution);
}

TEST(Classify, Errors) {
  const ModelBundle b = make_bundle(build_tiny_config(), 3);
  EXPECT_THROW(Classifier(b, SoftmaxHead::zeros(10, 7)), ShapeError);
  EXPECT_THROW(Classifier(b, SoftmaxHead::zeros(static_cast<std::size_t>(b.config.embedding_dim), 6)), ShapeError);
  const Classifier c(b);
  EXPECT_THROW(c.classify(Image{}, 0), DataError);
  EXPECT_THROW(c.classify(Image(4, 4, 1), 0), DataError);
}

TEST(Classify, RenderingsCarryDisclaimer) {
  const ModelBundle b = trained_like_bundle(504);
  const ClassificationResult r = Classifier(b).classify(synth_image(4, 2, 40), 1'700'000'000'000'000);
  const std::regex entry("^[a-z ]+ – [0-9]{1,3}$");
  std::istringstream in(render_text(r));
  std::string line;
  for (int i = 0; i < 5; ++i) {
    ASSERT_TRUE(std::getline(in, line));
    EXPECT_TRUE(std::regex_match(line, entry)) << line;
  }
  const std::string verbose = render_text(r, true);
  EXPECT_NE(verbose.find("all classes:"), std::string::npos);
  EXPECT_NE(verbose.find(r.model_checksum), std::string::npos);
  EXPECT_EQ(verbose.substr(verbose.size() - kDisclaimer.size() - 1), std::string(kDisclaimer) + "\n");

  const auto json = nlohmann::json::parse(to_json(r));
  EXPECT_EQ(json.at("disclaimer").get<std::string>(), kDisclaimer);
  EXPECT_EQ(json.at("model_checksum").get<std::string>(), checksum(b));
  EXPECT_EQ(json.at("timestamp_us").get<std::int64_t>(), 1'700'000'000'000'000);
  ASSERT_EQ(json.at("top").size(), 5u);
  ASSERT_EQ(json.at("distribution").size(), 7u);
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& t = json.at("top")[i];
    EXPECT_EQ(t.at("probability").get<double>(), r.top[i].probability);  // full precision
    EXPECT_EQ(t.at("percent").get<int>(), static_cast<int>(std::floor(r.top[i].probability * 100 + 0.5)));
    EXPECT_EQ(t.at("label").get<std::string>(), r.top[i].label);
  }
}

// ---- streams --------------------------------------------------------------

struct Collector {
  std::mutex m;
  std::vector<std::pair<Frame, ClassificationResult>> results;
  std::vector<StreamStatus> statuses;

  StreamSink sink() {
    return {[this](const Frame& f, const ClassificationResult& r) {
              std::lock_guard lock(m);
              Frame copy{Image{}, f.index, f.timestamp_us};
              results.emplace_back(copy, r);
            },
            [this](const StreamStatus& s) {
              std::lock_guard lock(m);
              statuses.push_back(s);
            }};
  }
  std::size_t result_count() {
    std::lock_guard lock(m);
    return results.size();
  }
};

std::shared_ptr<const Classifier> tiny_classifier() {
  return std::make_shared<const Classifier>(trained_like_bundle(505));
}

TEST(Stream, SyntheticTenFramesGiveTenResultsInOrder) {
  auto source = open_source(parse_source_spec("synthetic:10"));
  Collector c;
  const StreamStats stats = classify_stream(*source, frame_classifier(tiny_classifier()), c.sink(), {});
  EXPECT_EQ(stats.captured, 10u);
  EXPECT_EQ(stats.classified, 10u);
  EXPECT_EQ(stats.dropped, 0u);
  ASSERT_EQ(c.results.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(c.results[i].first.index, i);
    EXPECT_EQ(c.results[i].second.timestamp_us, c.results[i].first.timestamp_us);
    EXPECT_EQ(c.results[i].second.disclaimer, kDisclaimer);
    if (i > 0) {
      EXPECT_GT(c.results[i].second.timestamp_us, c.results[i - 1].second.timestamp_us);
    }
  }
  ASSERT_EQ(c.statuses.size(), 2u);
  EXPECT_EQ(c.statuses.front().kind, StreamStatusKind::kOpened);
  EXPECT_EQ(c.statuses.back().kind, StreamStatusKind::kEnded);
}

// Live source that records how many frames it has produced.
class CountingSource final : public FrameSource {
 public:
  CountingSource(std::uint64_t frames, std::chrono::milliseconds interval) : frames_(frames), interval_(interval) {}
  std::optional<Frame> next() override {
    if (produced_ >= frames_) return std::nullopt;
    Frame f{Image(8, 8), produced_.load(), now_us() + static_cast<std::int64_t>(produced_.load())};
    ++produced_;
    return f;
  }
  void reopen() override {}
  std::string describe() const override { return "counting"; }
  std::chrono::milliseconds interval() const override { return interval_; }
  std::uint64_t produced() const { return produced_; }

 private:
  std::uint64_t frames_;
  std::atomic<std::uint64_t> produced_{0};
  std::chrono::milliseconds interval_;
};

TEST(Stream, SlowModelDropsFramesWithoutBacklog) {
  CountingSource source(60, 5ms);
  std::uint64_t worst_lag = 0;
  const FrameClassifier slow = [&](const Frame& f) {
    // At the start of inference the frame must be the newest (or the one
    // just superseded while the loop was handing it over).
    worst_lag = std::max(worst_lag, source.produced() - 1 - f.index);
    std::this_thread::sleep_for(30ms);
    ClassificationResult r;
    r.timestamp_us = f.timestamp_us;
    return r;
  };
  Collector c;
  const StreamStats stats = classify_stream(source, slow, c.sink(), {});
  EXPECT_EQ(stats.captured, 60u);
  EXPECT_LT(c.results.size(), 60u);
  EXPECT_GT(stats.dropped, 0u);
  EXPECT_EQ(stats.classified + stats.dropped, stats.captured);
  EXPECT_LE(worst_lag, 1u);
  for (std::size_t i = 1; i < c.results.size(); ++i) {
    EXPECT_GT(c.results[i].first.index, c.results[i - 1].first.index);
    EXPECT_GT(c.results[i].second.timestamp_us, c.results[i - 1].second.timestamp_us);
  }
  // The last captured frame is never lost behind a stale one.
  EXPECT_EQ(c.results.back().first.index, 59u);
}

TEST(Stream, StopIsCleanAndFinal) {
  auto source = open_source(parse_source_spec("synthetic", 2ms));
  Collector c;
  StreamRunner runner(std::move(source), frame_classifier(tiny_classifier()), c.sink());
  runner.start();
  for (int i = 0; i < 500 && c.result_count() < 3; ++i) std::this_thread::sleep_for(10ms);
  ASSERT_GE(c.result_count(), 3u);
  runner.stop();
  const std::size_t at_stop = c.result_count();
  EXPECT_TRUE(runner.finished());
  ASSERT_TRUE(runner.final_stats().has_value());
  std::this_thread::sleep_for(100ms);
  EXPECT_EQ(c.result_count(), at_stop);
  std::lock_guard lock(c.m);
  EXPECT_EQ(c.statuses.back().kind, StreamStatusKind::kStopped);
}

// Fails once after three frames; the first reopen attempt fails too.
class FlakySource final : public FrameSource {
 public:
  std::optional<Frame> next() override {
    if (produced_ == 3 && !failed_) {
      failed_ = true;
      throw SourceError("unplugged");
    }
    if (produced_ >= 6) return std::nullopt;
    return Frame{Image(8, 8), produced_, static_cast<std::int64_t>(++produced_)};
  }
  void reopen() override {
    if (reopen_calls_++ == 0) throw SourceError("still unplugged");
  }
  std::string describe() const override { return "flaky"; }
  std::chrono::milliseconds interval() const override { return 0ms; }

 private:
  std::uint64_t produced_ = 0;
  bool failed_ = false;
  int reopen_calls_ = 0;
};

TEST(Stream, DisconnectEmitsStatusAndRetries) {
  FlakySource source;
  Collector c;
  const FrameClassifier stamp = [](const Frame& f) {
    ClassificationResult r;
    r.timestamp_us = f.timestamp_us;
    return r;
  };
  StreamOptions options;
  options.initial_backoff = 1ms;
  const StreamStats stats = classify_stream(source, stamp, c.sink(), {}, options);
  EXPECT_EQ(stats.classified, 6u);
  std::vector<StreamStatusKind> kinds;
  for (const auto& s : c.statuses) kinds.push_back(s.kind);
  EXPECT_EQ(kinds, (std::vector<StreamStatusKind>{StreamStatusKind::kOpened, StreamStatusKind::kDisconnected,
                                                  StreamStatusKind::kDisconnected, StreamStatusKind::kReconnected,
                                                  StreamStatusKind::kEnded}));
  EXPECT_EQ(c.statuses[1].attempt, 1);
  EXPECT_EQ(c.statuses[2].attempt, 2);
  EXPECT_EQ(c.statuses[2].message, "still unplugged");

  FlakySource give_up;
  Collector c2;
  options.max_reconnects = 0;
  EXPECT_EQ(classify_stream(give_up, stamp, c2.sink(), {}, options).classified, 3u);
  EXPECT_EQ(c2.statuses.back().kind, StreamStatusKind::kEnded);
}

TEST(Stream, SourceSpecs) {
  testing::TempDir dir;
  write_image(dir.path() / "b.png", synth_image(1, 1, 16));
  write_image(dir.path() / "a.png", synth_image(2, 1, 16));
  std::ofstream(dir.path() / "notes.txt") << "x";

  FrameSourceSpec spec = parse_source_spec("cam2");
  ASSERT_TRUE(std::holds_alternative<CameraSourceSpec>(spec.kind));
  EXPECT_EQ(std::get<CameraSourceSpec>(spec.kind).device, 2);
  spec = parse_source_spec("synthetic:12", 40ms);
  EXPECT_EQ(std::get<SyntheticSourceSpec>(spec.kind).frames, 12u);
  EXPECT_EQ(spec.interval, 40ms);
  EXPECT_THROW(parse_source_spec("synthetic:x"), DataError);
  EXPECT_THROW(parse_source_spec((dir.path() / "missing").string()), DataError);
  EXPECT_TRUE(std::holds_alternative<FileSourceSpec>(parse_source_spec((dir.path() / "a.png").string()).kind));

  spec = parse_source_spec(dir.path().string());
  ASSERT_TRUE(std::holds_alternative<DirectorySourceSpec>(spec.kind));
  std::get<DirectorySourceSpec>(spec.kind).loop = false;
  auto source = open_source(spec);
  EXPECT_FALSE(source->live());
  std::vector<Image> frames;
  std::int64_t last = 0;
  while (auto f = source->next()) {
    EXPECT_GT(f->timestamp_us, last);
    last = f->timestamp_us;
    frames.push_back(f->image);
  }
  ASSERT_EQ(frames.size(), 2u);
  EXPECT_EQ(frames[0], synth_image(2, 1, 16));  // sorted by name

  testing::TempDir empty;
  EXPECT_THROW(open_source(parse_source_spec(empty.path().string())), DataError);
  EXPECT_THROW(open_source(FrameSourceSpec{CameraSourceSpec{97}, {}}), DataError);
}

// ---- benchmark ------------------------------------------------------------

TEST(Benchmark, OrderStatisticsAndFields) {
  const ModelBundle b = trained_like_bundle(506);
  const BenchmarkReport r = benchmark(b, b.head, 25);
  ASSERT_EQ(r.latencies_ms.size(), 25u);
  EXPECT_LE(r.p50_ms, r.p95_ms);
  EXPECT_LE(r.p95_ms, r.max_ms);
  EXPECT_EQ(r.max_ms, *std::max_element(r.latencies_ms.begin(), r.latencies_ms.end()));
  EXPECT_GT(r.throughput_fps, 0.0);
  EXPECT_EQ(r.model_bytes, serialize(b).size());
  EXPECT_EQ(r.peak_activation_bytes, testing::oracle_walk(b.config).peak_bytes);
  EXPECT_EQ(r.verdicts.size(), device_catalog().size());
  const std::string text = render_benchmark(r);
  EXPECT_NE(text.find("p95"), std::string::npos);
  // Every device name is separated from its byte count.
  for (const DeviceBudget& d : device_catalog()) {
    EXPECT_NE(text.find(d.name + "  "), std::string::npos) << d.name << '\n' << text;
  }
  EXPECT_THROW(benchmark(b, b.head, 9), std::invalid_argument);
}

TEST(Benchmark, NearestRank) {
  const std::vector<double> v{5, 1, 4, 2, 3, 10, 9, 8, 7, 6};
  EXPECT_EQ(nearest_rank(v, 0.5), 5.0);
  EXPECT_EQ(nearest_rank(v, 0.95), 10.0);
  EXPECT_EQ(nearest_rank(v, 0.1), 1.0);
  EXPECT_EQ(nearest_rank(v, 1.0), 10.0);
  Gen g(507);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = g.doubles(static_cast<std::size_t>(g.integer(1, 50)), 0, 100);
    EXPECT_LE(nearest_rank(s, 0.5), nearest_rank(s, 0.95));
    EXPECT_LE(nearest_rank(s, 0.95), *std::max_element(s.begin(), s.end()));
  }
}

TEST(Benchmark, ActivationEstimateMatchesLayerOracle) {
  for (const ArchitectureConfig& cfg :
       {build_tiny_config(), build_default_config(0.35, 96), build_default_config(1.0, 224)}) {
    EXPECT_EQ(peak_activation_bytes(cfg), testing::oracle_walk(cfg).peak_bytes);
  }
  // Full-width default: the largest step is the stride-2 depthwise of the
  // second block, 112x112x96 in and 56x56x96 out.
  EXPECT_EQ(peak_activation_bytes(build_default_config(1.0, 224)), 4u * (112 * 112 * 96 + 56 * 56 * 96));
}

TEST(Benchmark, Int8ModelIsAboutAQuarter) {
  const ModelBundle f = make_bundle(build_default_config(1.0, 224), 508);
  const std::vector<DeviceBudget> none;
  const double ratio = static_cast<double>(size_report(quantize_int8(f), none).serialized_bytes) /
                       static_cast<double>(size_report(f, none).serialized_bytes);
  EXPECT_GT(ratio, 0.25);
  EXPECT_LT(ratio, 0.27);
}

}  // namespace
}  // namespace edgederm
