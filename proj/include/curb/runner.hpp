// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "curb/domain.hpp"
#include "curb/judgeclient.hpp"
#include "curb/promptkit.hpp"
#include "curb/store.hpp"

namespace curb {

struct ConditionTask {
  OutputFormat format = OutputFormat::kSingleWord;
};
struct AttributeQaTask {};
using RunTask = std::variant<ConditionTask, AttributeQaTask>;

inline constexpr int kDefaultAttributeTrials = 5;

struct RunPlan {
  std::vector<PropertyRecord> corpus;
  std::vector<std::shared_ptr<JudgeClient>> backends;
  RunTask task = AttributeQaTask{};
  /// Unset means 5 for attribute QA and 1 for condition rating.
  std::optional<int> trials;
  std::uint64_t base_seed = 0;
  /// Skip items already recorded as successful. Without it the plan must not
  /// overlap completed items.
  bool resume = true;
  /// Relative image_source paths resolve against this directory.
  std::string image_root;
  const AttributeCatalog* catalog = nullptr;  // null -> default_catalog()

  int effective_trials() const;
  void validate() const;
};

std::string condition_run_set(OutputFormat format);

/// Shuffle seed for one trial: a stable hash of (base_seed, image_id, trial).
std::uint64_t trial_seed(std::uint64_t base_seed, const std::string& image_id, int trial);

struct ItemFailure {
  std::string image_id;
  std::string model_id;
  int run_index = 0;
  std::string error_kind;
  std::string detail;
  std::string raw_response_ref;  // empty when no response was received
};

struct LatencyStats {
  double mean_s = 0.0;
  double median_s = 0.0;
  double max_s = 0.0;
};

struct RunReport {
  std::string run_id;
  std::string run_set;
  std::size_t planned = 0;
  std::size_t skipped = 0;  // already complete before this run
  std::size_t succeeded = 0;
  std::size_t failed = 0;
  std::size_t judgments_written = 0;
  std::size_t backend_calls = 0;
  LatencyStats latency;
  std::vector<ItemFailure> failures;

  bool ok() const { return failed == 0; }
  nlohmann::json to_json() const;
};

/// Reads a local path (optionally file://) or fetches an http(s) URL.
ImagePayload load_image_source(const std::string& source, const std::string& image_root);

RunReport run_condition(Store& store, const RunPlan& plan);
RunReport run_attribute_qa(Store& store, const RunPlan& plan);
/// Dispatches on plan.task.
RunReport run_plan(Store& store, const RunPlan& plan);

// ---------------------------------------------------------------------------
// Distillation artifacts
// ---------------------------------------------------------------------------

struct DistillRow {
  std::string image_id;
  std::string image_source;
  std::string teacher_model_id;
  std::string rating_word;
  int rating_number = 0;
};

struct DistillReject {
  std::string image_id;
  std::string error_kind;
  std::string raw_text_ref;
};

struct DistillManifest {
  std::vector<DistillRow> rows;
  std::vector<DistillReject> rejects;
  nlohmann::json meta;

  std::string to_csv() const;
  std::string rejects_jsonl() const;
  /// Writes <path>, <path>.rejects.jsonl and <path>.meta.json.
  void write(const std::string& path) const;
};

inline constexpr const char* kDistillHeader = "image_id,image_source,teacher_model_id,rating_word,rating_number";

/// Labels every corpus image once with the teacher and returns one manifest
/// row per successfully parsed image.
DistillManifest export_distill_manifest(Store& store, std::shared_ptr<JudgeClient> teacher,
                                        const std::vector<PropertyRecord>& corpus,
                                        OutputFormat format = OutputFormat::kSingleWord,
                                        const std::string& image_root = {});

DistillManifest read_distill_manifest(const std::string& path);

struct PredictionSet {
  std::string model_id;
  std::vector<std::pair<std::string, double>> rows;  // (image_id, predicted rating)

  std::size_t size() const { return rows.size(); }
};

/// CSV image_id,prediction. Throws ValidationError listing every bad row.
PredictionSet import_predictions(const std::string& path, std::string model_id = "student");
PredictionSet parse_predictions(const std::string& csv_content, std::string model_id = "student");

struct PredictionScore {
  double srcc = 0.0;
  double plcc = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
  std::size_t n = 0;
  std::vector<std::string> unmatched;  // predicted images without a reference value

  nlohmann::json to_json() const;
};

/// Pairs predictions with reference values by image id.
PredictionScore score_predictions(const PredictionSet& predictions, const std::map<std::string, double>& reference);

}  // namespace curb
