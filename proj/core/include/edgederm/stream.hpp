// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

// Frame sources and the capture/inference loop behind live classification.

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stop_token>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "edgederm/classify.hpp"
#include "edgederm/image.hpp"

namespace edgederm {

struct Frame {
  Image image;
  std::uint64_t index = 0;        // 0-based, in capture order
  std::int64_t timestamp_us = 0;  // strictly increasing per source
};

struct FileSourceSpec {
  std::filesystem::path path;
  bool loop = true;
};

struct DirectorySourceSpec {
  std::filesystem::path dir;
  std::string extension;  // e.g. ".png"; empty means any supported image
  bool loop = true;
};

struct CameraSourceSpec {
  int device = 0;
};

struct SyntheticSourceSpec {
  std::uint64_t frames = 0;  // 0 = unbounded
  std::uint64_t seed = 0;
  std::size_t size = 64;
};

struct FrameSourceSpec {
  std::variant<FileSourceSpec, DirectorySourceSpec, CameraSourceSpec, SyntheticSourceSpec> kind;
  std::chrono::milliseconds interval{0};  // 0 = as fast as the consumer pulls
};

/// "cam0", "synthetic", "synthetic:N", a directory or an image file.
/// Throws DataError when the text names nothing resolvable.
FrameSourceSpec parse_source_spec(const std::string& text, std::chrono::milliseconds interval = {});

class FrameSource {
 public:
  virtual ~FrameSource() = default;

  /// Next frame, or nullopt once a finite source is exhausted. Throws
  /// SourceError when the device stops delivering.
  virtual std::optional<Frame> next() = 0;

  /// Attempt to recover after a SourceError. Throws SourceError on failure.
  virtual void reopen() = 0;

  virtual std::string describe() const = 0;

  /// Live sources are captured on their own thread with latest-frame-wins.
  virtual bool live() const { return interval().count() > 0; }
  virtual std::chrono::milliseconds interval() const = 0;
};

/// Resolves the spec now: missing files, empty directories and cameras that
/// fail to open throw DataError.
std::unique_ptr<FrameSource> open_source(const FrameSourceSpec& spec);

enum class StreamStatusKind { kOpened, kDisconnected, kReconnected, kEnded, kStopped };

std::string to_string(StreamStatusKind kind);

struct StreamStatus {
  StreamStatusKind kind = StreamStatusKind::kOpened;
  std::string message;
  int attempt = 0;  // reconnect attempt, for kDisconnected
  std::int64_t timestamp_us = 0;
};

using FrameClassifier = std::function<ClassificationResult(const Frame&)>;

struct StreamSink {
  std::function<void(const Frame&, const ClassificationResult&)> on_result;
  std::function<void(const StreamStatus&)> on_status;
};

struct StreamOptions {
  std::chrono::milliseconds initial_backoff{100};
  std::chrono::milliseconds max_backoff{5000};
  int max_reconnects = -1;  // -1 = keep trying until stopped
};

/// Counters updated while the loop runs.
struct StreamStats {
  std::uint64_t captured = 0;
  std::uint64_t classified = 0;
  std::uint64_t dropped = 0;
};

/// Runs until the source ends, reconnection gives up, or stop is requested.
/// Each emitted result belongs to a frame newer than the previous one.
StreamStats classify_stream(FrameSource& source, const FrameClassifier& classifier, const StreamSink& sink,
                            std::stop_token stop, const StreamOptions& options = {});

/// Classifier adapter that stamps results with the frame's capture time.
FrameClassifier frame_classifier(std::shared_ptr<const Classifier> classifier);

/// Owns the loop thread. After stop() returns, the sink is never called again.
class StreamRunner {
 public:
  StreamRunner(std::unique_ptr<FrameSource> source, FrameClassifier classifier, StreamSink sink,
               StreamOptions options = {});
  ~StreamRunner();

  StreamRunner(const StreamRunner&) = delete;
  StreamRunner& operator=(const StreamRunner&) = delete;

  void start();
  void stop();
  bool finished() const noexcept { return finished_.load(); }

  /// Counters of the completed run; nullopt while the loop is still going.
  std::optional<StreamStats> final_stats() const;

 private:
  std::unique_ptr<FrameSource> source_;
  FrameClassifier classifier_;
  StreamSink sink_;
  StreamOptions options_;
  std::jthread thread_;
  std::atomic<bool> finished_{false};
  mutable std::mutex stats_mutex_;
  std::optional<StreamStats> stats_;
};

}  // namespace edgederm
