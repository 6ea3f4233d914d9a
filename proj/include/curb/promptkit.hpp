// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "curb/domain.hpp"

namespace curb {

enum class OutputFormat { kDetailsAndNumber, kDetailsAndWord, kSingleNumber, kSingleWord };

inline constexpr OutputFormat kAllOutputFormats[] = {
    OutputFormat::kDetailsAndNumber, OutputFormat::kDetailsAndWord, OutputFormat::kSingleNumber,
    OutputFormat::kSingleWord};

/// CLI spelling: details-number, details-word, single-number, single-word.
std::string_view to_string(OutputFormat f);
OutputFormat parse_output_format(std::string_view s);
bool has_details(OutputFormat f);
bool uses_word(OutputFormat f);

enum class PromptKind { kCondition, kAttributeBlock };

struct PromptText {
  std::string text;
  PromptKind kind = PromptKind::kCondition;
  OutputFormat format = OutputFormat::kSingleWord;  // meaningful for kCondition only
  std::vector<std::string> attribute_order;
  std::optional<std::uint64_t> shuffle_seed;
  std::string template_id;
};

class PromptError : public Error {
 public:
  explicit PromptError(const std::string& m) : Error("prompt", m) {}
};

PromptText build_condition_prompt(OutputFormat format);

/// Fisher-Yates over the catalog ids driven by std::mt19937_64(seed), with
/// rejection sampling for each bounded draw. Pure function of (ids, seed).
std::vector<std::string> shuffle_attributes(const AttributeCatalog& catalog, std::uint64_t seed);

PromptText build_attribute_prompt(const AttributeCatalog& catalog,
                                  const std::vector<std::string>& order);

}  // namespace curb
