// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

#include "curb/interface.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "curb/assets.hpp"
#include "curb/text_template.hpp"

namespace curb {

using nlohmann::json;

const AttributeAssessment* AssessmentSummary::find(const std::string& attribute_id) const {
  for (const auto& a : attributes) {
    if (a.attribute_id == attribute_id) return &a;
  }
  return nullptr;
}

std::vector<std::string> AssessmentSummary::missing(const AttributeCatalog& catalog) const {
  std::vector<std::string> out;
  for (const auto& a : catalog.attributes()) {
    if (!find(a.id)) out.push_back(a.id);
  }
  return out;
}

json AssessmentSummary::to_json() const {
  json attrs = json::array();
  for (const auto& a : attributes) {
    attrs.push_back({{"attribute_id", a.attribute_id},
                     {"display_name", a.display_name},
                     {"label", a.label},
                     {"option_index", a.option_index},
                     {"vote_tally", a.vote_tally},
                     {"votes", a.votes},
                     {"modal_count", a.modal_count},
                     {"agreement", a.agreement}});
  }
  json j = {{"image_id", image_id},
            {"model_id", model_id},
            {"trials", trials},
            {"updated_at", updated_at},
            {"catalog_version", catalog_version},
            {"attributes", attrs}};
  if (condition_rating) {
    j["condition"] = {{"number", *condition_rating}, {"word", std::string(word_for_rating(*condition_rating))}};
  } else {
    j["condition"] = nullptr;
  }
  return j;
}

AssessmentSummary summarize_judgments(const std::vector<Judgment>& judgments, const AttributeCatalog& catalog) {
  AssessmentSummary s;
  s.catalog_version = catalog.version();
  if (judgments.empty()) return s;
  s.image_id = judgments.front().image_id;
  s.model_id = judgments.front().model_id;
  std::map<std::string, std::vector<int>> votes;
  std::set<int> runs;
  for (const auto& j : judgments) {
    if (j.image_id != s.image_id || j.model_id != s.model_id) {
      throw Error("summary", "judgments for a summary must share one image and one model");
    }
    votes[j.attribute_id].push_back(j.option_index);
    runs.insert(j.run_index);
    s.updated_at = std::max(s.updated_at, j.timestamp);
  }
  s.trials = static_cast<int>(runs.size());
  for (const auto& attr : catalog.attributes()) {
    const auto it = votes.find(attr.id);
    if (it == votes.end()) continue;
    AttributeAssessment a;
    a.attribute_id = attr.id;
    a.display_name = attr.display_name;
    a.option_index = agreement::majority_vote(it->second, attr);
    a.label = attr.options[static_cast<std::size_t>(a.option_index)].label;
    a.vote_tally = agreement::vote_tally(it->second, attr);
    a.votes = static_cast<int>(it->second.size());
    a.modal_count = a.vote_tally[static_cast<std::size_t>(a.option_index)];
    a.agreement = static_cast<double>(a.modal_count) / static_cast<double>(a.votes);
    if (attr.id == kHouseConditionId) s.condition_rating = rating_for_option_index(a.option_index);
    s.attributes.push_back(std::move(a));
  }
  return s;
}

std::optional<AssessmentSummary> build_assessment_summary(const Store& store, const std::string& image_id,
                                                          const AttributeCatalog& catalog,
                                                          const std::optional<std::string>& model_id) {
  JudgmentFilter f;
  f.image_id = image_id;
  f.run_set = std::string(kAttributeQaRunSet);
  f.model_id = model_id;
  std::map<std::string, std::vector<Judgment>> by_model;
  for (auto& j : store.query(f)) {
    if (!model_id && j.model_id.rfind(kExpertPrefix, 0) == 0) continue;
    by_model[j.model_id].push_back(std::move(j));
  }
  if (by_model.empty()) return std::nullopt;
  const std::vector<Judgment>* chosen = nullptr;
  std::string latest;
  for (const auto& [m, js] : by_model) {
    std::string t;
    for (const auto& j : js) t = std::max(t, j.timestamp);
    if (!chosen || t > latest) {
      chosen = &js;
      latest = t;
    }
  }
  return summarize_judgments(*chosen, catalog);
}

namespace {

std::string or_unrecorded(const std::optional<std::string>& v) {
  return v && !v->empty() ? *v : std::string("not recorded");
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

ReportFields report_fields(const AssessmentSummary& summary, const PropertyRecord& property,
                           const AttributeCatalog& catalog) {
  if (const auto gaps = summary.missing(catalog); !gaps.empty()) {
    std::string list;
    for (const auto& g : gaps) list += (list.empty() ? "" : ", ") + g;
    throw Error("report.incomplete", "assessment summary lacks attributes: " + list);
  }
  if (!summary.condition_rating) throw Error("report.incomplete", "assessment summary lacks a condition rating");
  if (summary.image_id != property.image_id) throw Error("report", "summary and property refer to different images");

  ReportFields f;
  auto& d = f.document;
  d["image_id"] = property.image_id;
  d["address"] = or_unrecorded(property.address);
  d["city"] = or_unrecorded(property.city);
  d["state"] = or_unrecorded(property.state);
  d["coordinates"] = property.latitude && property.longitude
                         ? fixed(*property.latitude, 6) + ", " + fixed(*property.longitude, 6)
                         : std::string("not recorded");
  const ConditionLevel& level = ConditionScale::level(*summary.condition_rating);
  d["condition_number"] = std::to_string(level.number);
  d["condition_word"] = std::string(level.word);
  d["condition_criteria"] = std::string(level.criteria);
  d["condition_agreement"] = std::to_string(summary.find(std::string(kHouseConditionId))->modal_count);
  d["trials"] = std::to_string(summary.trials);
  d["model_id"] = summary.model_id;
  d["updated_at"] = summary.updated_at;
  d["catalog_version"] = catalog.version();

  std::string unstable;
  for (const auto& attr : catalog.attributes()) {
    const AttributeAssessment& a = *summary.find(attr.id);
    const std::string& def = attr.options[static_cast<std::size_t>(a.option_index)].definition;
    f.attribute_lines.push_back({{"display_name", attr.display_name},
                                 {"label", a.label},
                                 {"definition", def.empty() ? std::string() : " " + def},
                                 {"modal_count", std::to_string(a.modal_count)},
                                 {"trials", std::to_string(a.votes)},
                                 {"agreement_percent", fixed(100.0 * a.agreement, 0)}});
    if (a.modal_count < a.votes) unstable += (unstable.empty() ? "" : ", ") + attr.display_name;
  }
  d["unstable_attributes"] = unstable.empty() ? std::string("none") : unstable;
  return f;
}

NarrativeReport render_report(const AssessmentSummary& summary, const PropertyRecord& property,
                              const AttributeCatalog& catalog) {
  ReportFields f = report_fields(summary, property, catalog);
  std::string lines;
  for (const auto& values : f.attribute_lines) lines += render_template(assets::get(kReportAttributeTemplate), values);
  f.document["attribute_lines"] = lines;

  NarrativeReport r;
  r.image_id = property.image_id;
  r.text = render_template(assets::get(kReportTemplate), f.document);
  r.source = {{"templates", {std::string(kReportTemplate), std::string(kReportAttributeTemplate)}},
              {"summary", summary.to_json()},
              {"property", property_to_json(property)}};
  return r;
}

json CitySummary::to_json(const AttributeCatalog& catalog) const {
  json hist = json::array();
  for (std::size_t i = 0; i < condition_histogram.size(); ++i) {
    const int rating = static_cast<int>(i) + 1;
    hist.push_back({{"rating", rating}, {"word", std::string(word_for_rating(rating))}, {"count", condition_histogram[i]}});
  }
  json dists = json::array();
  for (const auto& h : attribute_distributions) {
    const AttributeSpec& attr = catalog.at(h.attribute_id);
    json bins = json::array();
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
      bins.push_back({{"option_index", i}, {"label", attr.options[i].label}, {"count", h.counts[i]}});
    }
    dists.push_back({{"attribute_id", h.attribute_id}, {"display_name", attr.display_name}, {"bins", bins}});
  }
  return {{"city", city},
          {"property_count", property_count},
          {"condition_histogram", hist},
          {"unassessed", unassessed},
          {"attribute_distributions", dists}};
}

CitySummary build_city_summary(const Store& store, const std::string& city, const AttributeCatalog& catalog,
                               const std::optional<std::string>& model_id) {
  CitySummary s;
  s.city = city;
  PropertyFilter pf;
  pf.city = city;
  const auto props = store.properties(pf);
  s.property_count = props.size();

  JudgmentFilter f;
  f.city = city;
  f.run_set = std::string(kAttributeQaRunSet);
  f.model_id = model_id;
  std::vector<Judgment> js;
  for (auto& j : store.query(f)) {
    if (!model_id && j.model_id.rfind(kExpertPrefix, 0) == 0) continue;
    js.push_back(std::move(j));
  }
  const auto labels = agreement::majority_labels(js, catalog);
  s.condition_histogram.assign(ConditionScale::kMax, 0);
  for (const auto& p : props) {
    const auto it = labels.find({p.image_id, std::string(kHouseConditionId)});
    if (it == labels.end()) {
      ++s.unassessed;
    } else {
      ++s.condition_histogram[static_cast<std::size_t>(rating_for_option_index(it->second) - 1)];
    }
  }
  s.attribute_distributions = agreement::label_distribution(js, catalog);
  return s;
}

}  // namespace curb
