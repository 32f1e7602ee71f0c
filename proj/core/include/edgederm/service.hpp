// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

// Local HTTP service: stateless classification, a live result stream over
// server-sent events, the latest frame, and an in-memory capture history.
//
//   GET  /health                 model checksum, uptime, stream counters
//   GET  /labels                 class names in class-id order
//   POST /classify               raw image body or multipart field "image"
//   GET  /result                 latest stream result (204 before the first)
//   GET  /events                 text/event-stream of "result" and "status" events
//   GET  /frame                  latest frame as PNG (204 before the first)
//   POST /capture                freeze latest frame + result (409 before the first)
//   GET  /history                captured entries, oldest first
//   GET  /history/{id}/frame     captured frame as PNG
//
// Every JSON body carries a "disclaimer" field.

#pragma once

#include <chrono>
#include <memory>
#include <string>

#include "edgederm/classify.hpp"
#include "edgederm/stream.hpp"

namespace edgederm {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 8077;  // 0 picks a free port
  std::size_t history_limit = 100;
  std::size_t event_backlog = 64;  // events kept for slow /events readers
  std::chrono::milliseconds keepalive{1000};
  StreamOptions stream;
};

class ClassifyService {
 public:
  /// `source` may be null: the service then only answers /classify.
  ClassifyService(std::shared_ptr<const Classifier> classifier, std::unique_ptr<FrameSource> source,
                  ServiceOptions options = {});
  ~ClassifyService();

  ClassifyService(const ClassifyService&) = delete;
  ClassifyService& operator=(const ClassifyService&) = delete;

  /// Binds, starts serving and starts the frame loop. Returns the bound port.
  /// Throws Error when the port cannot be bound.
  int start();

  /// Stops the frame loop, closes event streams and clears the history.
  void stop();

  bool running() const;
  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace edgederm
