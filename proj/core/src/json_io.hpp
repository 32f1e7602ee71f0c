// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

// JSON shapes shared by the CLI and the service. Internal header.

#pragma once

#include <nlohmann/json.hpp>

#include "edgederm/classify.hpp"
#include "edgederm/evaluator.hpp"

namespace edgederm {

inline nlohmann::json scored_json(const ScoredLabel& s) {
  return {{"label", s.label},
          {"class_id", s.class_id},
          {"probability", s.probability},
          {"percent", percent_half_up(s.probability)}};
}

inline nlohmann::json result_json(const ClassificationResult& r) {
  nlohmann::json top = nlohmann::json::array();
  for (const ScoredLabel& s : r.top) top.push_back(scored_json(s));
  nlohmann::json all = nlohmann::json::array();
  for (const ScoredLabel& s : r.distribution) all.push_back(scored_json(s));
  return {{"top", std::move(top)},
          {"distribution", std::move(all)},
          {"timestamp_us", r.timestamp_us},
          {"model_checksum", r.model_checksum},
          {"disclaimer", r.disclaimer}};
}

}  // namespace edgederm
