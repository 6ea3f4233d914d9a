// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "curb/config.hpp"
#include "curb/domain.hpp"
#include "curb/judgeclient.hpp"
#include "curb/store.hpp"

namespace curb {

/// JSON-over-HTTP API for the dashboard. Reads go straight to the store;
/// POST /assess enqueues an attribute QA job run by a single job worker.
///
///   GET  /api/properties?city=&bbox=minLon,minLat,maxLon,maxLat
///   GET  /api/properties/{id}
///   GET  /api/properties/{id}/assessment[?model=]
///   GET  /api/properties/{id}/report[?model=]      text/markdown attachment
///   GET  /api/cities/{city}/summary[?model=]
///   POST /api/properties/{id}/assess                {model_id, trials, seed?}
///   GET  /api/jobs/{id}
class Service {
 public:
  using ClientFactory = std::function<std::shared_ptr<JudgeClient>(const BackendConfig&)>;

  Service(Store& store, AppConfig config, AttributeCatalog catalog);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Defaults to make_client. Clients are created once per model and reused.
  void set_client_factory(ClientFactory factory);

  /// Binds to `port` (0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves on the bound socket until stop().
  void listen();
  /// bind + listen on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  void stop();

  /// Blocks until every queued job has finished.
  void wait_for_jobs();
  std::optional<nlohmann::json> job(const std::string& id) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Parses "minLon,minLat,maxLon,maxLat"; nullopt when malformed or out of range.
std::optional<BoundingBox> parse_bbox(const std::string& text);

}  // namespace curb
