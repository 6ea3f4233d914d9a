// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

#include "curb/domain.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "curb/assets.hpp"

namespace curb {

using nlohmann::json;

namespace {

constexpr std::array<ConditionLevel, 5> kLevels = {{
    {1, "Uninhabitable",
     "Likely unsuitable for rehabilitation; abandoned, fire-damaged, boarded-up, or vacant. "
     "Requires demolition."},
    {2, "Poor",
     "Requires substantial improvements, including major roof repairs, broken windows, bulging "
     "walls, or sagging foundations."},
    {3, "Adequate",
     "Requires basic cosmetic repairs, with no more than two issues such as painting/siding, "
     "trim, porch, minor roof improvements, or fence repair."},
    {4, "Good",
     "Structurally sound with good maintenance and no immediate repairs required. There may be "
     "no more than one minor issue, such as limited painting/siding replacement, minor porch "
     "repair/painting, or minor fence repair/painting."},
    {5, "Excellent",
     "Recently rehabilitated or remodeled; no repairs needed. New paint and roof in very good "
     "condition."},
}};

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

const std::array<ConditionLevel, 5>& ConditionScale::levels() { return kLevels; }

const ConditionLevel& ConditionScale::level(int number) {
  if (number < kMin || number > kMax) {
    throw DomainError("condition rating out of range 1..5: " + std::to_string(number));
  }
  return kLevels[static_cast<std::size_t>(number - 1)];
}

std::string_view word_for_rating(int n) { return ConditionScale::level(n).word; }

int rating_for_word(std::string_view word) {
  const std::string w = lower(trim(word));
  for (const auto& l : kLevels) {
    if (lower(l.word) == w) return l.number;
  }
  throw DomainError("unknown condition label: '" + std::string(word) + "'");
}

int option_index_for_rating(int n) { return ConditionScale::kMax - ConditionScale::level(n).number; }

int rating_for_option_index(int index) {
  if (index < 0 || index > 4) {
    throw DomainError("house condition option index out of range: " + std::to_string(index));
  }
  return ConditionScale::kMax - index;
}

std::string_view to_string(ScaleType t) { return t == ScaleType::kOrdinal ? "ordinal" : "nominal"; }

std::string normalize_token(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (unsigned char c : s) {
    if (c < 0x80 && std::isalnum(c)) out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::optional<int> AttributeSpec::option_index(std::string_view label) const {
  for (std::size_t i = 0; i < options.size(); ++i) {
    if (options[i].label == label) return static_cast<int>(i);
  }
  return std::nullopt;
}

AttributeCatalog::AttributeCatalog(std::string version, std::vector<AttributeSpec> attributes)
    : version_(std::move(version)), attributes_(std::move(attributes)) {}

const AttributeSpec* AttributeCatalog::find(std::string_view id) const {
  for (const auto& a : attributes_) {
    if (a.id == id) return &a;
  }
  return nullptr;
}

const AttributeSpec& AttributeCatalog::at(std::string_view id) const {
  if (const auto* a = find(id)) return *a;
  throw DomainError("unknown attribute id: " + std::string(id));
}

std::vector<std::string> AttributeCatalog::ids() const {
  std::vector<std::string> out;
  out.reserve(attributes_.size());
  for (const auto& a : attributes_) out.push_back(a.id);
  return out;
}

std::string AttributeCatalog::to_json() const {
  json doc;
  doc["version"] = version_;
  doc["attributes"] = json::array();
  for (const auto& a : attributes_) {
    json opts = json::array();
    for (const auto& o : a.options) opts.push_back({{"label", o.label}, {"definition", o.definition}});
    doc["attributes"].push_back({{"id", a.id},
                                 {"display_name", a.display_name},
                                 {"question_text", a.question_text},
                                 {"scale_type", std::string(to_string(a.scale_type))},
                                 {"options", std::move(opts)}});
  }
  return doc.dump(2);
}

AttributeCatalog load_attribute_catalog(std::string_view json_document) {
  std::vector<std::string> errors;
  json doc;
  try {
    doc = json::parse(json_document);
  } catch (const json::parse_error& e) {
    throw ValidationError({std::string("malformed catalog document: ") + e.what()});
  }
  if (!doc.is_object()) throw ValidationError({"catalog document must be a JSON object"});

  std::string version;
  if (doc.contains("version") && doc["version"].is_string()) {
    version = doc["version"].get<std::string>();
  } else {
    errors.push_back("missing string field 'version'");
  }
  if (!doc.contains("attributes") || !doc["attributes"].is_array()) {
    errors.push_back("missing array field 'attributes'");
    throw ValidationError(std::move(errors));
  }

  auto str_field = [&](const json& obj, const char* key, const std::string& where) -> std::string {
    if (!obj.contains(key) || !obj[key].is_string()) {
      errors.push_back(where + ": missing string field '" + key + "'");
      return {};
    }
    return obj[key].get<std::string>();
  };

  std::vector<AttributeSpec> attrs;
  std::set<std::string> seen_ids;
  std::set<std::string> seen_names;
  std::size_t pos = 0;
  for (const auto& a : doc["attributes"]) {
    const std::string where = "attributes[" + std::to_string(pos++) + "]";
    if (!a.is_object()) {
      errors.push_back(where + ": must be an object");
      continue;
    }
    AttributeSpec spec;
    spec.id = str_field(a, "id", where);
    spec.display_name = str_field(a, "display_name", where);
    spec.question_text = str_field(a, "question_text", where);
    const std::string scale = str_field(a, "scale_type", where);
    if (scale == "ordinal") {
      spec.scale_type = ScaleType::kOrdinal;
    } else if (scale == "nominal") {
      spec.scale_type = ScaleType::kNominal;
    } else if (!scale.empty()) {
      errors.push_back(where + ": scale_type must be 'ordinal' or 'nominal', got '" + scale + "'");
    }
    if (spec.id.empty() && a.contains("id")) errors.push_back(where + ": empty id");
    if (!spec.id.empty() && !seen_ids.insert(spec.id).second) {
      errors.push_back(where + ": duplicate attribute id '" + spec.id + "'");
    }
    if (!spec.display_name.empty() && !seen_names.insert(normalize_token(spec.display_name)).second) {
      errors.push_back(where + ": duplicate display_name '" + spec.display_name + "'");
    }

    if (!a.contains("options") || !a["options"].is_array()) {
      errors.push_back(where + ": missing array field 'options'");
    } else {
      std::set<std::string> labels;
      std::set<std::string> normalized;
      std::size_t opos = 0;
      for (const auto& o : a["options"]) {
        const std::string owhere = where + ".options[" + std::to_string(opos++) + "]";
        if (!o.is_object()) {
          errors.push_back(owhere + ": must be an object");
          continue;
        }
        AttributeOption opt;
        opt.label = str_field(o, "label", owhere);
        if (o.contains("definition") && !o["definition"].is_string()) {
          errors.push_back(owhere + ": 'definition' must be a string");
        } else if (o.contains("definition")) {
          opt.definition = o["definition"].get<std::string>();
        }
        if (opt.label.empty()) {
          if (o.contains("label")) errors.push_back(owhere + ": empty label");
          continue;
        }
        if (!labels.insert(opt.label).second) {
          errors.push_back(owhere + ": duplicate label '" + opt.label + "'");
        } else if (!normalized.insert(normalize_token(opt.label)).second) {
          errors.push_back(owhere + ": label '" + opt.label + "' collides with another after normalization");
        }
        spec.options.push_back(std::move(opt));
      }
      if (spec.options.size() < 2) {
        errors.push_back(where + ": attribute '" + spec.id + "' needs at least 2 options, has " +
                         std::to_string(spec.options.size()));
      }
    }
    attrs.push_back(std::move(spec));
  }
  if (attrs.empty()) errors.push_back("catalog has no attributes");
  if (!errors.empty()) throw ValidationError(std::move(errors));
  return AttributeCatalog(std::move(version), std::move(attrs));
}

AttributeCatalog load_attribute_catalog_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError({"cannot read catalog file: " + path});
  std::stringstream ss;
  ss << in.rdbuf();
  return load_attribute_catalog(ss.str());
}

std::string_view default_catalog_json() { return assets::get("data/default_catalog.json"); }

const AttributeCatalog& default_catalog() {
  static const AttributeCatalog catalog = load_attribute_catalog(default_catalog_json());
  return catalog;
}

std::vector<std::string> PropertyRecord::violations() const {
  std::vector<std::string> out;
  if (image_id.empty()) out.push_back("empty image_id");
  if (image_source.empty()) out.push_back("empty image_source");
  if (latitude && !(*latitude >= -90.0 && *latitude <= 90.0)) {
    out.push_back("latitude out of range [-90, 90]: " + std::to_string(*latitude));
  }
  if (longitude && !(*longitude >= -180.0 && *longitude <= 180.0)) {
    out.push_back("longitude out of range [-180, 180]: " + std::to_string(*longitude));
  }
  return out;
}

std::string utc_timestamp_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[40];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

}  // namespace curb
