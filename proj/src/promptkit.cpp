// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

#include "curb/promptkit.hpp"

#include <algorithm>
#include <iterator>
#include <limits>
#include <random>
#include <set>

#include "curb/assets.hpp"
#include "curb/text_template.hpp"

namespace curb {

namespace {

constexpr std::string_view kConditionTemplate = "templates/condition_v1.txt";
constexpr std::string_view kAttributeTemplate = "templates/attribute_v1.txt";

std::string_view closing_template(OutputFormat f) {
  switch (f) {
    case OutputFormat::kDetailsAndNumber: return "templates/condition_details_number_v1.txt";
    case OutputFormat::kDetailsAndWord: return "templates/condition_details_word_v1.txt";
    case OutputFormat::kSingleNumber: return "templates/condition_single_number_v1.txt";
    case OutputFormat::kSingleWord: return "templates/condition_single_word_v1.txt";
  }
  throw PromptError("unknown output format");
}

std::string scale_words() {
  std::string out;
  const auto& levels = ConditionScale::levels();
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (i > 0) out += (i + 1 == levels.size()) ? ", or " : ", ";
    out += levels[i].word;
  }
  return out;
}

std::string strip_trailing_newlines(std::string s) {
  while (!s.empty() && s.back() == '\n') s.pop_back();
  return s;
}

// Uniform integer in [0, bound) without modulo bias.
std::uint64_t bounded(std::mt19937_64& gen, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t v;
  do {
    v = gen();
  } while (v >= limit);
  return v % bound;
}

}  // namespace

std::string_view to_string(OutputFormat f) {
  switch (f) {
    case OutputFormat::kDetailsAndNumber: return "details-number";
    case OutputFormat::kDetailsAndWord: return "details-word";
    case OutputFormat::kSingleNumber: return "single-number";
    case OutputFormat::kSingleWord: return "single-word";
  }
  return "unknown";
}

OutputFormat parse_output_format(std::string_view s) {
  for (auto f : kAllOutputFormats) {
    if (to_string(f) == s) return f;
  }
  throw PromptError("unknown output format '" + std::string(s) +
                    "' (expected details-number, details-word, single-number, single-word)");
}

bool has_details(OutputFormat f) {
  return f == OutputFormat::kDetailsAndNumber || f == OutputFormat::kDetailsAndWord;
}

bool uses_word(OutputFormat f) {
  return f == OutputFormat::kDetailsAndWord || f == OutputFormat::kSingleWord;
}

PromptText build_condition_prompt(OutputFormat format) {
  std::string criteria;
  for (const auto& l : ConditionScale::levels()) {
    criteria += "- " + std::to_string(l.number) + ": " + std::string(l.word) + " – " +
                std::string(l.criteria) + "\n";
  }
  const std::string closing = render_template(assets::get(closing_template(format)),
                                              {{"words", scale_words()}});
  PromptText p;
  p.kind = PromptKind::kCondition;
  p.format = format;
  p.template_id = std::string(kConditionTemplate) + "+" + std::string(closing_template(format));
  p.text = render_template(assets::get(kConditionTemplate),
                           {{"criteria", strip_trailing_newlines(criteria)},
                            {"format_instructions", strip_trailing_newlines(closing)}});
  return p;
}

std::vector<std::string> shuffle_attributes(const AttributeCatalog& catalog, std::uint64_t seed) {
  if (catalog.size() == 0) throw PromptError("cannot shuffle an empty catalog");
  std::vector<std::string> ids = catalog.ids();
  std::mt19937_64 gen(seed);
  for (std::size_t i = ids.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(bounded(gen, i + 1));
    std::swap(ids[i], ids[j]);
  }
  return ids;
}

PromptText build_attribute_prompt(const AttributeCatalog& catalog,
                                  const std::vector<std::string>& order) {
  std::vector<std::string> want = catalog.ids();
  std::vector<std::string> got = order;
  std::sort(want.begin(), want.end());
  std::sort(got.begin(), got.end());
  if (want != got) {
    std::vector<std::string> missing;
    std::set_difference(want.begin(), want.end(), got.begin(), got.end(), std::back_inserter(missing));
    std::string msg = "attribute order is not a permutation of the catalog ids";
    for (const auto& m : missing) msg += "; missing '" + m + "'";
    if (missing.empty()) msg += "; duplicate or unknown ids present";
    throw PromptError(msg);
  }

  std::string blocks;
  std::string lines;
  for (const auto& id : order) {
    const auto& a = catalog.at(id);
    blocks += "\n" + a.question_text + "\n";
    for (const auto& o : a.options) {
      blocks += "- " + o.label;
      if (!o.definition.empty()) blocks += ": " + o.definition;
      blocks += "\n";
    }
    lines += "- " + a.display_name + ": <label>\n";
  }
  PromptText p;
  p.kind = PromptKind::kAttributeBlock;
  p.attribute_order = order;
  p.template_id = std::string(kAttributeTemplate);
  p.text = render_template(assets::get(kAttributeTemplate),
                           {{"attribute_blocks", blocks}, {"output_lines", strip_trailing_newlines(lines)}});
  return p;
}

}  // namespace curb
