// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

#include "curb/parse.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>
#include <sstream>

namespace curb {

namespace {

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

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

struct Candidate {
  std::size_t pos;
  int rating;
};

// Scale words at word boundaries, in text order.
std::vector<Candidate> word_candidates(std::string_view text) {
  const std::string lc = lower(text);
  std::vector<Candidate> out;
  for (const auto& lvl : ConditionScale::levels()) {
    const std::string w = lower(lvl.word);
    std::size_t pos = 0;
    while ((pos = lc.find(w, pos)) != std::string::npos) {
      const bool left = pos == 0 || !is_word_char(lc[pos - 1]);
      const bool right = pos + w.size() >= lc.size() || !is_word_char(lc[pos + w.size()]);
      if (left && right) out.push_back({pos, lvl.number});
      pos += w.size();
    }
  }
  std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) { return a.pos < b.pos; });
  return out;
}

// Blanks out scale descriptions ("1-5", "1 to 5", "/5", "out of 5") so their
// digits are not taken as ratings.
std::string mask_scale_mentions(std::string_view text) {
  static const std::regex kRange(R"(\b[1-5]\s*(?:-|–|—|to)\s*[1-5]\b)", std::regex::icase);
  static const std::regex kDenominator(R"((?:/\s*5|out\s+of\s+5)\b)", std::regex::icase);
  std::string s(text);
  for (const auto* re : {&kRange, &kDenominator}) {
    std::string out;
    std::size_t last = 0;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), *re); it != std::sregex_iterator(); ++it) {
      out.append(s, last, static_cast<std::size_t>(it->position()) - last);
      out.append(static_cast<std::size_t>(it->length()), ' ');
      last = static_cast<std::size_t>(it->position() + it->length());
    }
    out.append(s, last, std::string::npos);
    s = std::move(out);
  }
  return s;
}

// Standalone digits 1..5: not adjacent to other digits or part of a decimal.
std::vector<Candidate> number_candidates(std::string_view raw) {
  const std::string text = mask_scale_mentions(raw);
  std::vector<Candidate> out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c < '1' || c > '5') continue;
    const bool digit_left = i > 0 && std::isdigit(static_cast<unsigned char>(text[i - 1]));
    const bool digit_right = i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i + 1]));
    const bool decimal_right = i + 2 < text.size() && text[i + 1] == '.' &&
                               std::isdigit(static_cast<unsigned char>(text[i + 2]));
    const bool decimal_left = i > 1 && text[i - 1] == '.' && std::isdigit(static_cast<unsigned char>(text[i - 2]));
    const bool alpha_adjacent = (i > 0 && std::isalpha(static_cast<unsigned char>(text[i - 1]))) ||
                                (i + 1 < text.size() && std::isalpha(static_cast<unsigned char>(text[i + 1])));
    if (digit_left || digit_right || decimal_right || decimal_left || alpha_adjacent) continue;
    out.push_back({i, c - '0'});
  }
  return out;
}

std::vector<Candidate> candidates(std::string_view text, bool words) {
  return words ? word_candidates(text) : number_candidates(text);
}

// Offset just past the first overall marker in a lowercased line, or npos.
std::size_t marker_end(const std::string& lc) {
  static const std::regex kMarker(R"(\boverall\b|\bfinal\b|\brating\s*:)");
  std::smatch m;
  if (!std::regex_search(lc, m, kMarker)) return std::string::npos;
  return static_cast<std::size_t>(m.position() + m.length());
}

std::set<int> distinct(const std::vector<Candidate>& c) {
  std::set<int> s;
  for (const auto& x : c) s.insert(x.rating);
  return s;
}

std::string describe_values(const std::set<int>& v) {
  std::string out;
  for (int r : v) out += (out.empty() ? "" : ", ") + std::to_string(r);
  return "{" + out + "}";
}

int parse_details_rating(std::string_view text, OutputFormat format) {
  const bool words = uses_word(format);
  const auto lines = split_lines(text);
  for (std::size_t k = lines.size(); k-- > 0;) {
    const std::string line = clean_line(lines[k]);
    const std::string lc = lower(line);
    const auto end = marker_end(lc);
    if (end == std::string::npos) continue;
    auto found = candidates(std::string_view(line).substr(end), words);
    if (found.empty()) {
      for (std::size_t n = k + 1; n < lines.size(); ++n) {
        const std::string next = clean_line(lines[n]);
        if (next.empty()) continue;
        found = candidates(next, words);
        break;
      }
    }
    if (found.empty()) continue;
    const auto values = distinct(found);
    if (values.size() > 1) {
      throw ParseError("parse.ambiguous", "conflicting overall ratings " + describe_values(values), std::string(text));
    }
    return *values.begin();
  }
  const auto all = candidates(text, words);
  const auto values = distinct(all);
  if (values.empty()) throw ParseError("parse.no_rating", "no recognizable rating", std::string(text));
  if (values.size() > 1) {
    throw ParseError("parse.ambiguous",
                     "several candidate ratings " + describe_values(values) + " and no overall marker",
                     std::string(text));
  }
  return *values.begin();
}

AspectNotes extract_aspects(std::string_view text) {
  AspectNotes notes;
  for (const auto& raw : split_lines(text)) {
    const std::string line = clean_line(raw);
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    const std::string key = normalize_token(line.substr(0, colon));
    std::string value = trim(std::string_view(line).substr(colon + 1));
    if (value.empty()) continue;
    if (key == "paint") {
      notes.paint = value;
    } else if (key == "windows" || key == "window") {
      notes.windows = value;
    } else if (key == "structure") {
      notes.structure = value;
    } else if (key == "maintenance") {
      notes.maintenance = value;
    }
  }
  return notes;
}

std::string clean_label(std::string_view raw) {
  std::string s = trim(raw);
  while (!s.empty() && (s.back() == '.' || s.back() == ',' || s.back() == ';')) s.pop_back();
  s = trim(s);
  if (s.size() >= 2 && ((s.front() == '<' && s.back() == '>') || (s.front() == '"' && s.back() == '"') ||
                        (s.front() == '\'' && s.back() == '\'') || (s.front() == '[' && s.back() == ']'))) {
    s = trim(s.substr(1, s.size() - 2));
  }
  return s;
}

std::optional<std::string> drop_trailing_parenthetical(std::string_view s) {
  const std::string t = trim(s);
  if (t.empty() || t.back() != ')') return std::nullopt;
  const auto open = t.rfind('(');
  if (open == std::string::npos || open == 0) return std::nullopt;
  return trim(std::string_view(t).substr(0, open));
}

}  // namespace

std::string clean_line(std::string_view line) {
  std::string s;
  s.reserve(line.size());
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '*' || c == '`') continue;
    if (c == '_' && i + 1 < line.size() && line[i + 1] == '_') {
      ++i;
      continue;
    }
    s.push_back(c);
  }
  s = trim(s);
  // Leading bullets, headings, and "1." / "1)" numbering.
  while (!s.empty()) {
    if (s[0] == '-' || s[0] == '#' || s[0] == '>' || s[0] == '+') {
      s = trim(std::string_view(s).substr(1));
      continue;
    }
    if (s.rfind("\xE2\x80\xA2", 0) == 0) {  // U+2022 bullet
      s = trim(std::string_view(s).substr(3));
      continue;
    }
    std::size_t d = 0;
    while (d < s.size() && std::isdigit(static_cast<unsigned char>(s[d]))) ++d;
    if (d > 0 && d < s.size() && (s[d] == '.' || s[d] == ')') && d + 1 < s.size() && s[d + 1] == ' ') {
      s = trim(std::string_view(s).substr(d + 1));
      continue;
    }
    break;
  }
  return s;
}

ConditionVerdict parse_condition(std::string_view text, OutputFormat format) {
  ConditionVerdict v;
  v.format = format;
  switch (format) {
    case OutputFormat::kSingleWord:
    case OutputFormat::kSingleNumber: {
      const auto found = candidates(text, format == OutputFormat::kSingleWord);
      if (found.empty()) throw ParseError("parse.no_rating", "no recognizable rating", std::string(text));
      v.rating = found.back().rating;
      break;
    }
    case OutputFormat::kDetailsAndNumber:
    case OutputFormat::kDetailsAndWord: {
      v.rating = parse_details_rating(text, format);
      auto notes = extract_aspects(text);
      if (!notes.empty()) v.aspect_notes = std::move(notes);
      break;
    }
  }
  return v;
}

std::optional<int> resolve_label(const AttributeSpec& attribute, std::string_view raw) {
  const std::string label = clean_label(raw);
  if (label.empty()) return std::nullopt;
  if (auto exact = attribute.option_index(label)) return exact;

  auto by_normalized = [&](std::string_view s) -> std::optional<int> {
    const std::string n = normalize_token(s);
    if (n.empty()) return std::nullopt;
    for (std::size_t i = 0; i < attribute.options.size(); ++i) {
      if (normalize_token(attribute.options[i].label) == n) return static_cast<int>(i);
    }
    return std::nullopt;
  };
  if (auto m = by_normalized(label)) return m;
  if (auto stripped = drop_trailing_parenthetical(label)) {
    if (auto m = by_normalized(*stripped)) return m;
  }
  // The answer may omit an option's own parenthetical ("Pre-1950" for "Pre-1950 (Historic)").
  const std::string n = normalize_token(label);
  std::optional<int> unique;
  for (std::size_t i = 0; i < attribute.options.size(); ++i) {
    const auto short_form = drop_trailing_parenthetical(attribute.options[i].label);
    if (short_form && normalize_token(*short_form) == n) {
      if (unique) return std::nullopt;
      unique = static_cast<int>(i);
    }
  }
  return unique;
}

AttributeVerdict parse_attributes(std::string_view text, const AttributeCatalog& catalog) {
  AttributeVerdict verdict;
  std::map<std::string, const AttributeSpec*> by_name;
  for (const auto& a : catalog.attributes()) {
    by_name[normalize_token(a.display_name)] = &a;
    by_name.emplace(normalize_token(a.question_text), &a);
    by_name.emplace(normalize_token(a.id), &a);
  }

  for (const auto& raw : split_lines(text)) {
    const std::string line = clean_line(raw);
    if (line.empty()) continue;
    const auto colon = line.find(':');
    const AttributeSpec* attr = nullptr;
    if (colon != std::string::npos) {
      if (auto it = by_name.find(normalize_token(line.substr(0, colon))); it != by_name.end()) attr = it->second;
    }
    if (!attr) {
      verdict.unmatched_lines.push_back(trim(raw));
      continue;
    }
    const std::string value = line.substr(colon + 1);
    const auto idx = resolve_label(*attr, value);
    if (!idx) {
      throw ParseError("parse.unknown_label",
                       "unknown label '" + trim(value) + "' for attribute '" + attr->display_name + "'",
                       std::string(text), {attr->display_name});
    }
    auto [it, inserted] = verdict.labels.emplace(attr->id, *idx);
    if (!inserted && it->second != *idx) {
      throw ParseError("parse.conflict",
                       "conflicting labels for attribute '" + attr->display_name + "': '" +
                           attr->options[static_cast<std::size_t>(it->second)].label + "' vs '" +
                           attr->options[static_cast<std::size_t>(*idx)].label + "'",
                       std::string(text), {attr->display_name});
    }
  }

  std::vector<std::string> missing;
  for (const auto& a : catalog.attributes()) {
    if (!verdict.labels.count(a.id)) missing.push_back(a.display_name);
  }
  if (!missing.empty()) {
    std::string msg = "missing attributes:";
    for (const auto& m : missing) msg += " '" + m + "'";
    throw ParseError("parse.incomplete", msg, std::string(text), missing);
  }
  return verdict;
}

}  // namespace curb
