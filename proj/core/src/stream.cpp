// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgederm/stream.hpp"

#include <algorithm>
#include <condition_variable>
#include <deque>

#include <opencv2/core.hpp>
#include <opencv2/videoio.hpp>

#include "edgederm/dataset.hpp"
#include "edgederm/error.hpp"
#include "edgederm/image_io.hpp"
#include "edgederm/labels.hpp"

namespace edgederm {

namespace fs = std::filesystem;

FrameSourceSpec parse_source_spec(const std::string& text, std::chrono::milliseconds interval) {
  FrameSourceSpec spec;
  spec.interval = interval;
  if (text.rfind("cam", 0) == 0 && text.size() > 3 &&
      std::all_of(text.begin() + 3, text.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    spec.kind = CameraSourceSpec{std::stoi(text.substr(3))};
    return spec;
  }
  if (text == "synthetic") {
    spec.kind = SyntheticSourceSpec{};
    return spec;
  }
  if (text.rfind("synthetic:", 0) == 0) {
    const std::string n = text.substr(10);
    if (n.empty() || !std::all_of(n.begin(), n.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      throw DataError(DataError::Kind::kMalformed, "bad synthetic frame count in '" + text + "'");
    }
    spec.kind = SyntheticSourceSpec{std::stoull(n)};
    return spec;
  }
  std::error_code ec;
  if (fs::is_directory(text, ec)) {
    spec.kind = DirectorySourceSpec{text, {}, true};
    return spec;
  }
  if (fs::is_regular_file(text, ec)) {
    spec.kind = FileSourceSpec{text, true};
    return spec;
  }
  throw DataError(DataError::Kind::kMissingFile, "frame source '" + text + "' is not a camera, directory or file");
}

namespace {

class SourceBase : public FrameSource {
 public:
  explicit SourceBase(std::chrono::milliseconds interval) : interval_(interval) {}
  std::chrono::milliseconds interval() const override { return interval_; }

 protected:
  Frame make_frame(Image image) {
    Frame f;
    f.image = std::move(image);
    f.index = next_index_++;
    f.timestamp_us = std::max(now_us(), last_timestamp_ + 1);
    last_timestamp_ = f.timestamp_us;
    return f;
  }

 private:
  std::chrono::milliseconds interval_;
  std::uint64_t next_index_ = 0;
  std::int64_t last_timestamp_ = 0;
};

class FileSource final : public SourceBase {
 public:
  FileSource(const FileSourceSpec& spec, std::chrono::milliseconds interval)
      : SourceBase(interval), spec_(spec), image_(read_image(spec.path)) {}

  std::optional<Frame> next() override {
    if (!spec_.loop && emitted_) return std::nullopt;
    emitted_ = true;
    return make_frame(image_);
  }

  void reopen() override {
    try {
      image_ = read_image(spec_.path);
    } catch (const DataError& e) {
      throw SourceError(e.what());
    }
  }

  std::string describe() const override { return "file " + spec_.path.string(); }

 private:
  FileSourceSpec spec_;
  Image image_;
  bool emitted_ = false;
};

class DirectorySource final : public SourceBase {
 public:
  DirectorySource(const DirectorySourceSpec& spec, std::chrono::milliseconds interval)
      : SourceBase(interval), spec_(spec) {
    files_ = list();
    if (files_.empty()) {
      throw DataError(DataError::Kind::kMissingFile, "no images in directory " + spec_.dir.string());
    }
  }

  std::optional<Frame> next() override {
    if (position_ >= files_.size()) {
      if (!spec_.loop) return std::nullopt;
      position_ = 0;
    }
    const fs::path& path = files_[position_];
    try {
      Image image = read_image(path);
      ++position_;
      return make_frame(std::move(image));
    } catch (const DataError& e) {
      throw SourceError(e.what());
    }
  }

  void reopen() override {
    std::vector<fs::path> files;
    try {
      files = list();
    } catch (const fs::filesystem_error& e) {
      throw SourceError(e.what());
    }
    if (files.empty()) throw SourceError("no images in directory " + spec_.dir.string());
    // Resume after the last delivered name so a refreshed listing does not replay frames.
    const fs::path last = position_ > 0 && position_ <= files_.size() ? files_[position_ - 1] : fs::path{};
    files_ = std::move(files);
    position_ = last.empty() ? 0
                             : static_cast<std::size_t>(std::upper_bound(files_.begin(), files_.end(), last) -
                                                        files_.begin());
  }

  std::string describe() const override { return "directory " + spec_.dir.string(); }

 private:
  std::vector<fs::path> list() const {
    std::vector<fs::path> files;
    for (const fs::directory_entry& entry : fs::directory_iterator(spec_.dir)) {
      if (!entry.is_regular_file()) continue;
      const fs::path& p = entry.path();
      if (spec_.extension.empty() ? is_image_file(p) : p.extension() == spec_.extension) files.push_back(p);
    }
    std::sort(files.begin(), files.end());
    return files;
  }

  DirectorySourceSpec spec_;
  std::vector<fs::path> files_;
  std::size_t position_ = 0;
};

class CameraSource final : public SourceBase {
 public:
  CameraSource(const CameraSourceSpec& spec, std::chrono::milliseconds interval)
      : SourceBase(interval), spec_(spec) {
    if (!capture_.open(spec_.device)) {
      throw DataError(DataError::Kind::kMissingFile, "camera " + std::to_string(spec_.device) + " could not be opened");
    }
  }

  std::optional<Frame> next() override {
    cv::Mat bgr;
    if (!capture_.read(bgr) || bgr.empty()) {
      throw SourceError("camera " + std::to_string(spec_.device) + " stopped delivering frames");
    }
    if (bgr.depth() != CV_8U) throw SourceError("camera delivered a non 8-bit frame");
    const int channels = bgr.channels();
    Image image;
    image.width = static_cast<std::size_t>(bgr.cols);
    image.height = static_cast<std::size_t>(bgr.rows);
    image.channels = 3;
    image.pixels.resize(image.width * image.height * 3);
    std::size_t out = 0;
    for (int y = 0; y < bgr.rows; ++y) {
      const std::uint8_t* row = bgr.ptr<std::uint8_t>(y);
      for (int x = 0; x < bgr.cols; ++x, row += channels) {
        if (channels >= 3) {
          image.pixels[out++] = row[2];
          image.pixels[out++] = row[1];
          image.pixels[out++] = row[0];
        } else {
          image.pixels[out++] = row[0];
          image.pixels[out++] = row[0];
          image.pixels[out++] = row[0];
        }
      }
    }
    return make_frame(std::move(image));
  }

  void reopen() override {
    capture_.release();
    if (!capture_.open(spec_.device)) {
      throw SourceError("camera " + std::to_string(spec_.device) + " could not be reopened");
    }
  }

  std::string describe() const override { return "camera " + std::to_string(spec_.device); }
  bool live() const override { return true; }

 private:
  CameraSourceSpec spec_;
  cv::VideoCapture capture_;
};

class SyntheticSource final : public SourceBase {
 public:
  SyntheticSource(const SyntheticSourceSpec& spec, std::chrono::milliseconds interval)
      : SourceBase(interval), spec_(spec) {}

  std::optional<Frame> next() override {
    if (spec_.frames != 0 && produced_ >= spec_.frames) return std::nullopt;
    const int class_id = static_cast<int>(produced_ % kNumClasses);
    Image image = synth_image(class_id, spec_.seed + produced_, spec_.size);
    ++produced_;
    return make_frame(std::move(image));
  }

  void reopen() override {}

  std::string describe() const override {
    return "synthetic" + (spec_.frames ? ":" + std::to_string(spec_.frames) : std::string{});
  }

 private:
  SyntheticSourceSpec spec_;
  std::uint64_t produced_ = 0;
};

// Sleeps for `d` unless stop is requested first. Returns false when stopped.
bool sleep_for(std::chrono::milliseconds d, std::stop_token stop) {
  if (d.count() <= 0) return !stop.stop_requested();
  std::mutex m;
  std::condition_variable_any cv;
  std::unique_lock lock(m);
  cv.wait_for(lock, stop, d, [] { return false; });
  return !stop.stop_requested();
}

StreamStatus status(StreamStatusKind kind, std::string message, int attempt = 0) {
  return {kind, std::move(message), attempt, now_us()};
}

// Retries reopen() with exponential backoff. Returns true once the source is back.
bool reconnect(FrameSource& source, const std::string& reason, const StreamOptions& options, std::stop_token stop,
               const std::function<void(StreamStatus)>& emit) {
  std::chrono::milliseconds backoff = options.initial_backoff;
  std::string message = reason;
  for (int attempt = 1;; ++attempt) {
    if (options.max_reconnects >= 0 && attempt > options.max_reconnects) {
      emit(status(StreamStatusKind::kEnded, "giving up on " + source.describe() + ": " + message));
      return false;
    }
    emit(status(StreamStatusKind::kDisconnected, message, attempt));
    if (!sleep_for(backoff, stop)) return false;
    try {
      source.reopen();
      emit(status(StreamStatusKind::kReconnected, source.describe()));
      return true;
    } catch (const SourceError& e) {
      message = e.what();
    }
    backoff = std::min(backoff * 2, options.max_backoff);
  }
}

void emit_status(const StreamSink& sink, const StreamStatus& s) {
  if (sink.on_status) sink.on_status(s);
}

void emit_result(const StreamSink& sink, const Frame& frame, const ClassificationResult& result) {
  if (sink.on_result) sink.on_result(frame, result);
}

// Pull mode: the consumer drives the source, so no frame is ever dropped.
StreamStats run_pulled(FrameSource& source, const FrameClassifier& classifier, const StreamSink& sink,
                       std::stop_token stop, const StreamOptions& options) {
  StreamStats stats;
  auto emit = [&](StreamStatus s) { emit_status(sink, s); };
  while (!stop.stop_requested()) {
    std::optional<Frame> frame;
    try {
      frame = source.next();
    } catch (const SourceError& e) {
      if (!reconnect(source, e.what(), options, stop, emit)) break;
      continue;
    }
    if (!frame) {
      emit(status(StreamStatusKind::kEnded, source.describe() + " exhausted"));
      return stats;
    }
    ++stats.captured;
    ClassificationResult result = classifier(*frame);
    if (stop.stop_requested()) break;
    emit_result(sink, *frame, result);
    ++stats.classified;
  }
  if (stop.stop_requested()) emit(status(StreamStatusKind::kStopped, "stop requested"));
  return stats;
}

// Live mode: a capture thread keeps only the newest frame; the inference
// loop always takes whatever is newest when it becomes free.
StreamStats run_live(FrameSource& source, const FrameClassifier& classifier, const StreamSink& sink,
                     std::stop_token stop, const StreamOptions& options) {
  std::mutex mutex;
  std::condition_variable_any cv;
  std::optional<Frame> latest;
  std::deque<StreamStatus> statuses;
  bool done = false;
  StreamStats stats;

  auto push_status = [&](StreamStatus s) {
    {
      std::lock_guard lock(mutex);
      statuses.push_back(std::move(s));
    }
    cv.notify_all();
  };

  std::jthread capture([&](std::stop_token inner) {
    while (!inner.stop_requested()) {
      std::optional<Frame> frame;
      try {
        frame = source.next();
      } catch (const SourceError& e) {
        if (reconnect(source, e.what(), options, inner, push_status)) continue;
        break;
      }
      if (!frame) {
        push_status(status(StreamStatusKind::kEnded, source.describe() + " exhausted"));
        break;
      }
      {
        std::lock_guard lock(mutex);
        if (latest) ++stats.dropped;
        latest = std::move(frame);
        ++stats.captured;
      }
      cv.notify_all();
      if (!sleep_for(source.interval(), inner)) break;
    }
    {
      std::lock_guard lock(mutex);
      done = true;
    }
    cv.notify_all();
  });
  std::stop_callback forward_stop(stop, [&] { capture.request_stop(); });

  while (true) {
    std::optional<Frame> frame;
    std::deque<StreamStatus> pending;
    bool finished = false;
    {
      std::unique_lock lock(mutex);
      cv.wait(lock, stop, [&] { return latest.has_value() || done || !statuses.empty(); });
      pending.swap(statuses);
      if (!stop.stop_requested()) {
        if (latest) {
          frame = std::move(latest);
          latest.reset();
        } else {
          finished = done;
        }
      }
    }
    for (const StreamStatus& s : pending) emit_status(sink, s);
    if (stop.stop_requested() || finished) break;
    if (!frame) continue;
    ClassificationResult result = classifier(*frame);
    if (stop.stop_requested()) break;
    emit_result(sink, *frame, result);
    std::lock_guard lock(mutex);
    ++stats.classified;
  }
  capture.request_stop();
  capture.join();
  if (stop.stop_requested()) emit_status(sink, status(StreamStatusKind::kStopped, "stop requested"));
  std::lock_guard lock(mutex);
  return stats;
}

}  // namespace

std::unique_ptr<FrameSource> open_source(const FrameSourceSpec& spec) {
  return std::visit(
      [&](const auto& kind) -> std::unique_ptr<FrameSource> {
        using T = std::decay_t<decltype(kind)>;
        if constexpr (std::is_same_v<T, FileSourceSpec>) {
          return std::make_unique<FileSource>(kind, spec.interval);
        } else if constexpr (std::is_same_v<T, DirectorySourceSpec>) {
          return std::make_unique<DirectorySource>(kind, spec.interval);
        } else if constexpr (std::is_same_v<T, CameraSourceSpec>) {
          return std::make_unique<CameraSource>(kind, spec.interval);
        } else {
          return std::make_unique<SyntheticSource>(kind, spec.interval);
        }
      },
      spec.kind);
}

std::string to_string(StreamStatusKind kind) {
  switch (kind) {
    case StreamStatusKind::kOpened: return "opened";
    case StreamStatusKind::kDisconnected: return "disconnected";
    case StreamStatusKind::kReconnected: return "reconnected";
    case StreamStatusKind::kEnded: return "ended";
    case StreamStatusKind::kStopped: return "stopped";
  }
  return "unknown";
}

StreamStats classify_stream(FrameSource& source, const FrameClassifier& classifier, const StreamSink& sink,
                            std::stop_token stop, const StreamOptions& options) {
  emit_status(sink, status(StreamStatusKind::kOpened, source.describe()));
  return source.live() ? run_live(source, classifier, sink, stop, options)
                       : run_pulled(source, classifier, sink, stop, options);
}

FrameClassifier frame_classifier(std::shared_ptr<const Classifier> classifier) {
  return [classifier = std::move(classifier)](const Frame& frame) {
    return classifier->classify(frame.image, frame.timestamp_us);
  };
}

StreamRunner::StreamRunner(std::unique_ptr<FrameSource> source, FrameClassifier classifier, StreamSink sink,
                           StreamOptions options)
    : source_(std::move(source)), classifier_(std::move(classifier)), sink_(std::move(sink)), options_(options) {}

StreamRunner::~StreamRunner() { stop(); }

void StreamRunner::start() {
  if (thread_.joinable()) return;
  finished_ = false;
  thread_ = std::jthread([this](std::stop_token stop) {
    StreamStats stats = classify_stream(*source_, classifier_, sink_, stop, options_);
    {
      std::lock_guard lock(stats_mutex_);
      stats_ = stats;
    }
    finished_ = true;
  });
}

void StreamRunner::stop() {
  if (!thread_.joinable()) return;
  thread_.request_stop();
  thread_.join();
}

std::optional<StreamStats> StreamRunner::final_stats() const {
  std::lock_guard lock(stats_mutex_);
  return stats_;
}

}  // namespace edgederm
