// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "curb/domain.hpp"

struct sqlite3;

namespace curb {

/// Content-addressed blob directory: <dir>/<sha[0:2]>/<sha>. Writes go to a
/// temporary file first and are renamed into place.
class BlobStore {
 public:
  explicit BlobStore(std::string dir);
  std::string put(std::string_view content) const;
  std::optional<std::string> get(const std::string& ref) const;
  bool contains(const std::string& ref) const;

 private:
  std::string dir_;
};

struct IngestReject {
  std::size_t line = 0;  // 1-based source line (header is line 1 for CSV)
  std::string image_id;
  std::string reason;
};

struct IngestResult {
  std::size_t accepted = 0;   // rows newly stored
  std::size_t unchanged = 0;  // rows identical to what is already stored
  std::vector<IngestReject> rejects;
  std::string source_digest;
  bool already_ingested = false;  // identical source file seen before
};

struct RunItem {
  std::string run_set;
  std::string image_id;
  std::string model_id;
  int run_index = 0;
  std::string status;  // "ok" or "failed"
  std::string error_kind;
  std::string error_detail;
  std::string raw_response_ref;
  std::uint64_t seed = 0;
  double latency_s = 0.0;
  int attempts = 0;
  bool from_cache = false;
  std::string timestamp;
};

struct JudgmentFilter {
  std::optional<std::string> image_id;
  std::optional<std::string> model_id;
  std::optional<std::string> run_set;
  std::optional<int> run_index;
  std::optional<std::string> attribute_id;
  std::optional<std::string> city;
  /// Model ids starting with this prefix ("expert:" selects ingested human labels).
  std::optional<std::string> model_prefix;
};

struct BoundingBox {
  double min_lon, min_lat, max_lon, max_lat;
};

struct PropertyFilter {
  std::optional<std::string> city;
  std::optional<BoundingBox> bbox;
};

nlohmann::json judgment_to_json(const Judgment& j, bool include_timestamp = true);
Judgment judgment_from_json(const nlohmann::json& j);
nlohmann::json property_to_json(const PropertyRecord& p);

inline constexpr std::string_view kExpertPrefix = "expert:";

/// Embedded single-file database plus a blob directory alongside it
/// (<path>.blobs). One connection guarded by a mutex serializes writers;
/// multi-statement reads run inside a transaction so they see one snapshot.
class Store {
 public:
  explicit Store(const std::string& path);
  ~Store();
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  const std::string& path() const { return path_; }
  const BlobStore& blobs() const { return blobs_; }

  IngestResult ingest_properties(const std::string& manifest_path);
  /// CSV image_id,rater_id,rating. Stored ratings are immutable unless
  /// `supersede` is set, in which case the change is recorded as lineage.
  IngestResult ingest_human_ratings(const std::string& csv_path, bool supersede = false);
  /// CSV image_id,rater_id,attribute_id,label. Stored as attribute_qa
  /// judgments of model "expert:<rater_id>", run 0.
  IngestResult ingest_expert_labels(const std::string& csv_path, const AttributeCatalog& catalog);

  std::optional<PropertyRecord> property(const std::string& image_id) const;
  std::vector<PropertyRecord> properties(const PropertyFilter& filter = {}) const;
  std::vector<HumanRating> human_ratings(const std::optional<std::string>& image_id = std::nullopt) const;
  std::vector<std::string> model_ids(const std::string& run_set) const;

  std::optional<RunItem> run_item(const std::string& run_set, const std::string& image_id,
                                  const std::string& model_id, int run_index) const;
  std::vector<RunItem> run_items(const std::string& run_set, const std::optional<std::string>& model_id = {}) const;
  /// Atomically records a successful item and its judgments.
  void commit_success(const RunItem& item, const std::vector<Judgment>& judgments);
  void commit_failure(const RunItem& item);

  /// Canonical order: image_id, model_id, run_index, attribute_id, run_set.
  std::vector<Judgment> query(const JudgmentFilter& filter = {}) const;
  std::string export_judgments_jsonl(const JudgmentFilter& filter = {}, bool include_timestamps = true) const;

  void put_run_meta(const std::string& run_id, const nlohmann::json& meta);
  std::optional<nlohmann::json> run_meta(const std::string& run_id) const;

 private:
  void exec(const char* sql) const;
  bool source_seen(const std::string& digest) const;
  void record_source(const std::string& digest, const std::string& kind, const std::string& path,
                     const IngestResult& r);

  std::string path_;
  BlobStore blobs_;
  sqlite3* db_ = nullptr;
  mutable std::recursive_mutex mu_;
};

}  // namespace curb
