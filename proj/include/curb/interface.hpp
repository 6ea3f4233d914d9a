// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "curb/agreement.hpp"
#include "curb/domain.hpp"
#include "curb/store.hpp"

namespace curb {

struct AttributeAssessment {
  std::string attribute_id;
  std::string display_name;
  std::string label;
  int option_index = 0;
  std::vector<int> vote_tally;  // one bin per option
  int votes = 0;
  int modal_count = 0;
  double agreement = 0.0;  // modal_count / votes
};

/// Majority-voted attribute labels for one property and one model across its
/// stored attribute QA runs. Entries follow catalog order; attributes with no
/// votes are absent.
struct AssessmentSummary {
  std::string image_id;
  std::string model_id;
  int trials = 0;
  std::string updated_at;
  std::vector<AttributeAssessment> attributes;
  std::optional<int> condition_rating;  // from the house condition attribute
  std::string catalog_version;

  const AttributeAssessment* find(const std::string& attribute_id) const;
  /// Catalog attributes with no entry in the summary.
  std::vector<std::string> missing(const AttributeCatalog& catalog) const;
  nlohmann::json to_json() const;
};

/// Pure aggregation over one image's judgments from one model.
AssessmentSummary summarize_judgments(const std::vector<Judgment>& judgments, const AttributeCatalog& catalog);

/// Attribute QA summary for `image_id`. Without `model_id` the model with the
/// most recent judgments is used. Nullopt when nothing is stored.
std::optional<AssessmentSummary> build_assessment_summary(const Store& store, const std::string& image_id,
                                                          const AttributeCatalog& catalog,
                                                          const std::optional<std::string>& model_id = {});

struct NarrativeReport {
  std::string image_id;
  std::string text;  // markdown
  nlohmann::json source;
  std::string filename() const { return "report-" + image_id + ".md"; }
};

/// Placeholder values the report templates are rendered from.
struct ReportFields {
  std::map<std::string, std::string> document;
  std::vector<std::map<std::string, std::string>> attribute_lines;
};
ReportFields report_fields(const AssessmentSummary& summary, const PropertyRecord& property,
                           const AttributeCatalog& catalog);

/// Deterministic template rendering. Throws Error("report.incomplete") unless
/// every catalog attribute is summarized.
NarrativeReport render_report(const AssessmentSummary& summary, const PropertyRecord& property,
                              const AttributeCatalog& catalog);

inline constexpr std::string_view kReportTemplate = "templates/report_v1.md";
inline constexpr std::string_view kReportAttributeTemplate = "templates/report_attribute_v1.md";

struct CitySummary {
  std::string city;
  std::size_t property_count = 0;
  std::vector<std::size_t> condition_histogram;  // index 0 -> rating 1 ... index 4 -> rating 5
  std::size_t unassessed = 0;
  std::vector<agreement::LabelHistogram> attribute_distributions;
  nlohmann::json to_json(const AttributeCatalog& catalog) const;
};

/// Majority-voted condition labels per property in `city`; properties without
/// a house condition label land in the unassessed bin.
CitySummary build_city_summary(const Store& store, const std::string& city, const AttributeCatalog& catalog,
                               const std::optional<std::string>& model_id = {});

}  // namespace curb
