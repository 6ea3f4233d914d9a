// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "curb/domain.hpp"
#include "curb/promptkit.hpp"

namespace curb {

struct AspectNotes {
  std::optional<std::string> paint;
  std::optional<std::string> windows;
  std::optional<std::string> structure;
  std::optional<std::string> maintenance;

  bool empty() const { return !paint && !windows && !structure && !maintenance; }
};

struct ConditionVerdict {
  int rating = 0;
  std::optional<AspectNotes> aspect_notes;  // Details* formats only
  OutputFormat format = OutputFormat::kSingleWord;
};

struct AttributeVerdict {
  std::map<std::string, int> labels;  // attribute id -> option index
  std::vector<std::string> unmatched_lines;
};

/// kind(): "parse.no_rating", "parse.ambiguous", "parse.incomplete",
/// "parse.unknown_label", "parse.conflict".
class ParseError : public Error {
 public:
  ParseError(std::string kind, const std::string& message, std::string raw_text,
             std::vector<std::string> subjects = {})
      : Error(std::move(kind), message), raw_text_(std::move(raw_text)), subjects_(std::move(subjects)) {}

  const std::string& raw_text() const noexcept { return raw_text_; }
  /// Attribute display names the error concerns (incomplete / label / conflict).
  const std::vector<std::string>& subjects() const noexcept { return subjects_; }

 private:
  std::string raw_text_;
  std::vector<std::string> subjects_;
};

ConditionVerdict parse_condition(std::string_view text, OutputFormat format);
AttributeVerdict parse_attributes(std::string_view text, const AttributeCatalog& catalog);

/// Resolves a label against the attribute's options: exact, then normalized,
/// then with a trailing parenthetical dropped. No edit-distance matching.
std::optional<int> resolve_label(const AttributeSpec& attribute, std::string_view label);

/// Strips list bullets, numbering, and markdown emphasis around a line.
std::string clean_line(std::string_view line);

}  // namespace curb
