// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "curb/errors.hpp"

namespace curb {

// ---------------------------------------------------------------------------
// Condition scale
// ---------------------------------------------------------------------------

struct ConditionLevel {
  int number;
  std::string_view word;
  std::string_view criteria;
};

/// The five-level building condition scale, worst (1) to best (5).
class ConditionScale {
 public:
  static constexpr int kMin = 1;
  static constexpr int kMax = 5;

  static const std::array<ConditionLevel, 5>& levels();
  static const ConditionLevel& level(int number);
};

std::string_view word_for_rating(int n);
int rating_for_word(std::string_view word);

/// House Condition lists options best-first, so option 0 is rating 5.
int option_index_for_rating(int n);
int rating_for_option_index(int index);

// ---------------------------------------------------------------------------
// Attribute catalog
// ---------------------------------------------------------------------------

enum class ScaleType { kOrdinal, kNominal };

std::string_view to_string(ScaleType t);

struct AttributeOption {
  std::string label;
  std::string definition;
};

struct AttributeSpec {
  std::string id;
  std::string display_name;
  std::string question_text;
  ScaleType scale_type = ScaleType::kOrdinal;
  std::vector<AttributeOption> options;

  /// Index of `label` by exact match; nullopt when absent.
  std::optional<int> option_index(std::string_view label) const;
  bool valid_index(int index) const {
    return index >= 0 && index < static_cast<int>(options.size());
  }
};

inline constexpr std::string_view kHouseConditionId = "house_condition";

class AttributeCatalog {
 public:
  AttributeCatalog() = default;
  AttributeCatalog(std::string version, std::vector<AttributeSpec> attributes);

  const std::string& version() const { return version_; }
  const std::vector<AttributeSpec>& attributes() const { return attributes_; }
  std::size_t size() const { return attributes_.size(); }

  const AttributeSpec* find(std::string_view id) const;
  const AttributeSpec& at(std::string_view id) const;
  std::vector<std::string> ids() const;

  std::string to_json() const;

 private:
  std::string version_;
  std::vector<AttributeSpec> attributes_;
};

/// Lowercase ASCII alphanumerics only; used for lenient label and name matching.
std::string normalize_token(std::string_view s);

AttributeCatalog load_attribute_catalog(std::string_view json_document);
AttributeCatalog load_attribute_catalog_file(const std::string& path);
/// The shipped twelve-attribute catalog, compiled into the binary.
const AttributeCatalog& default_catalog();
std::string_view default_catalog_json();

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

struct PropertyRecord {
  std::string image_id;
  std::string image_source;
  std::optional<std::string> address;
  std::optional<double> latitude;
  std::optional<double> longitude;
  std::optional<std::string> city;
  std::optional<std::string> state;

  /// Human-readable reasons the record breaks its invariants; empty when valid.
  std::vector<std::string> violations() const;
};

struct HumanRating {
  std::string image_id;
  std::string rater_id;
  int rating = 0;
};

struct Judgment {
  std::string image_id;
  std::string model_id;
  /// "attribute_qa" or "condition:<format>"; uniqueness holds within a run set.
  std::string run_set;
  int run_index = 0;
  std::string attribute_id;
  int option_index = 0;
  std::string raw_response_ref;
  std::uint64_t attribute_order_seed = 0;
  std::string timestamp;

  friend bool operator==(const Judgment&, const Judgment&) = default;
};

inline constexpr std::string_view kAttributeQaRunSet = "attribute_qa";

std::string utc_timestamp_now();

}  // namespace curb
