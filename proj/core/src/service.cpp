// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgederm/service.hpp"

#include <atomic>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include <httplib.h>

#include "edgederm/error.hpp"
#include "edgederm/image_io.hpp"
#include "json_io.hpp"

namespace edgederm {

namespace {

using nlohmann::json;

struct Event {
  std::uint64_t seq = 0;
  std::string name;
  std::string data;
};

struct HistoryEntry {
  std::uint64_t id = 0;
  std::int64_t captured_us = 0;
  std::uint64_t frame_index = 0;
  Image frame;
  ClassificationResult result;
};

json with_disclaimer(json body) {
  body["disclaimer"] = std::string(kDisclaimer);
  return body;
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(with_disclaimer(body).dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

json entry_json(const HistoryEntry& e) {
  return {{"id", e.id},
          {"captured_us", e.captured_us},
          {"frame_index", e.frame_index},
          {"frame_url", "/history/" + std::to_string(e.id) + "/frame"},
          {"result", result_json(e.result)}};
}

}  // namespace

struct ClassifyService::Impl {
  std::shared_ptr<const Classifier> classifier;
  std::unique_ptr<FrameSource> pending_source;
  std::string source_name;
  ServiceOptions options;
  httplib::Server server;
  std::unique_ptr<StreamRunner> runner;
  std::thread listener;
  std::chrono::steady_clock::time_point started;
  int bound_port = -1;
  std::atomic<bool> serving{false};

  mutable std::mutex mutex;
  std::condition_variable cv;
  bool stopping = false;
  std::optional<Frame> latest_frame;
  std::optional<ClassificationResult> latest_result;
  std::deque<Event> events;
  std::uint64_t last_seq = 0;
  std::uint64_t frames_classified = 0;
  std::vector<HistoryEntry> history;
  std::uint64_t next_history_id = 1;

  void push_event(std::string name, std::string data) {
    events.push_back({++last_seq, std::move(name), std::move(data)});
    while (events.size() > options.event_backlog) events.pop_front();
  }

  void on_result(const Frame& frame, const ClassificationResult& result) {
    json body = result_json(result);
    body["frame_index"] = frame.index;
    {
      std::lock_guard lock(mutex);
      latest_frame = frame;
      latest_result = result;
      ++frames_classified;
      push_event("result", body.dump());
    }
    cv.notify_all();
  }

  void on_status(const StreamStatus& s) {
    const json body = with_disclaimer({{"status", to_string(s.kind)},
                                       {"message", s.message},
                                       {"attempt", s.attempt},
                                       {"timestamp_us", s.timestamp_us}});
    {
      std::lock_guard lock(mutex);
      push_event("status", body.dump());
    }
    cv.notify_all();
  }

  void routes();
  void handle_events(const httplib::Request& req, httplib::Response& res);
};

void ClassifyService::Impl::routes() {
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  // httplib's default also sets SO_REUSEPORT, which lets a second server
  // bind the same port silently.
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof yes);
  });

  server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
    const double uptime = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    std::lock_guard lock(mutex);
    send_json(res, 200,
              {{"status", "ok"},
               {"model_checksum", classifier->checksum()},
               {"precision", to_string(classifier->source_bundle().precision)},
               {"uptime_seconds", uptime},
               {"source", source_name.empty() ? json(nullptr) : json(source_name)},
               {"frames_classified", frames_classified},
               {"history_size", history.size()}});
  });

  server.Get("/labels", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"labels", classifier->labels()}});
  });

  server.Post("/classify", [this](const httplib::Request& req, httplib::Response& res) {
    std::string upload;
    std::string_view body = req.body;
    if (req.is_multipart_form_data()) {
      if (!req.has_file("image")) return send_error(res, 400, "multipart upload needs an \"image\" field");
      upload = req.get_file_value("image").content;
      body = upload;
    }
    if (body.empty()) return send_error(res, 400, "empty request body; send image bytes");
    Image image;
    try {
      image = decode_image({reinterpret_cast<const std::uint8_t*>(body.data()), body.size()});
    } catch (const DataError& e) {
      return send_error(res, 400, e.what());
    }
    send_json(res, 200, result_json(classifier->classify(image)));
  });

  server.Get("/result", [this](const httplib::Request&, httplib::Response& res) {
    std::lock_guard lock(mutex);
    if (!latest_result) {
      res.status = 204;
      return;
    }
    json body = result_json(*latest_result);
    body["frame_index"] = latest_frame->index;
    send_json(res, 200, body);
  });

  server.Get("/frame", [this](const httplib::Request&, httplib::Response& res) {
    Image frame;
    {
      std::lock_guard lock(mutex);
      if (!latest_frame) {
        res.status = 204;
        return;
      }
      frame = latest_frame->image;
    }
    const std::vector<std::uint8_t> png = encode_png(frame);
    res.set_content(reinterpret_cast<const char*>(png.data()), png.size(), "image/png");
  });

  server.Post("/capture", [this](const httplib::Request&, httplib::Response& res) {
    std::lock_guard lock(mutex);
    if (!latest_frame || !latest_result) return send_error(res, 409, "no frame has been classified yet");
    HistoryEntry entry{next_history_id++, now_us(), latest_frame->index, latest_frame->image, *latest_result};
    const json body = entry_json(entry);
    history.push_back(std::move(entry));
    if (history.size() > options.history_limit) history.erase(history.begin());
    send_json(res, 201, body);
  });

  server.Get("/history", [this](const httplib::Request&, httplib::Response& res) {
    std::lock_guard lock(mutex);
    json entries = json::array();
    for (const HistoryEntry& e : history) entries.push_back(entry_json(e));
    send_json(res, 200, {{"entries", std::move(entries)}});
  });

  server.Get(R"(/history/(\d+)/frame)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::uint64_t id = std::stoull(req.matches[1].str());
    Image frame;
    {
      std::lock_guard lock(mutex);
      const auto it = std::find_if(history.begin(), history.end(), [&](const HistoryEntry& e) { return e.id == id; });
      if (it == history.end()) return send_error(res, 404, "no history entry " + std::to_string(id));
      frame = it->frame;
    }
    const std::vector<std::uint8_t> png = encode_png(frame);
    res.set_content(reinterpret_cast<const char*>(png.data()), png.size(), "image/png");
  });

  server.Get("/events", [this](const httplib::Request& req, httplib::Response& res) { handle_events(req, res); });

  server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (res.body.empty()) send_error(res, res.status, "no route for " + req.method + " " + req.path);
  });

  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string message = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      message = e.what();
    } catch (...) {
    }
    send_error(res, 500, message);
  });
}

void ClassifyService::Impl::handle_events(const httplib::Request&, httplib::Response& res) {
  std::uint64_t cursor;
  {
    std::lock_guard lock(mutex);
    cursor = last_seq;
  }
  res.set_header("Cache-Control", "no-cache");
  res.set_chunked_content_provider(
      "text/event-stream", [this, cursor, first = true](std::size_t, httplib::DataSink& sink) mutable {
        std::string out;
        if (first) {
          out = "retry: 2000\n\n";
          first = false;
        }
        {
          std::unique_lock lock(mutex);
          cv.wait_for(lock, options.keepalive, [&] { return stopping || last_seq > cursor; });
          if (stopping) {
            sink.done();
            return false;
          }
          for (const Event& e : events) {
            if (e.seq <= cursor) continue;
            out += "id: " + std::to_string(e.seq) + "\nevent: " + e.name + "\ndata: " + e.data + "\n\n";
            cursor = e.seq;
          }
        }
        if (out.empty()) out = ": keepalive\n\n";
        return sink.write(out.data(), out.size());
      });
}

ClassifyService::ClassifyService(std::shared_ptr<const Classifier> classifier, std::unique_ptr<FrameSource> source,
                                 ServiceOptions options)
    : impl_(std::make_unique<Impl>()) {
  if (!classifier) throw std::invalid_argument("service needs a classifier");
  impl_->classifier = std::move(classifier);
  impl_->pending_source = std::move(source);
  impl_->source_name = impl_->pending_source ? impl_->pending_source->describe() : std::string{};
  impl_->options = std::move(options);
  impl_->routes();
}

ClassifyService::~ClassifyService() { stop(); }

int ClassifyService::start() {
  Impl& s = *impl_;
  if (s.serving) return s.bound_port;
  if (s.options.port == 0) {
    s.bound_port = s.server.bind_to_any_port(s.options.host);
  } else {
    s.bound_port = s.server.bind_to_port(s.options.host, s.options.port) ? s.options.port : -1;
  }
  if (s.bound_port <= 0) {
    throw Error("cannot bind " + s.options.host + ":" + std::to_string(s.options.port));
  }
  s.started = std::chrono::steady_clock::now();
  {
    std::lock_guard lock(s.mutex);
    s.stopping = false;
  }
  s.serving = true;
  s.listener = std::thread([&s] { s.server.listen_after_bind(); });
  // A stop() that lands before the accept loop runs would be lost.
  s.server.wait_until_ready();
  if (s.pending_source) {
    StreamSink sink{[&s](const Frame& f, const ClassificationResult& r) { s.on_result(f, r); },
                    [&s](const StreamStatus& st) { s.on_status(st); }};
    s.runner = std::make_unique<StreamRunner>(std::move(s.pending_source), frame_classifier(s.classifier),
                                              std::move(sink), s.options.stream);
    s.runner->start();
  }
  return s.bound_port;
}

void ClassifyService::stop() {
  Impl& s = *impl_;
  if (!s.serving.exchange(false)) return;
  if (s.runner) s.runner->stop();
  {
    std::lock_guard lock(s.mutex);
    s.stopping = true;
    s.history.clear();
  }
  s.cv.notify_all();
  s.server.stop();
  if (s.listener.joinable()) s.listener.join();
}

bool ClassifyService::running() const { return impl_->serving; }

int ClassifyService::port() const { return impl_->bound_port; }

}  // namespace edgederm
