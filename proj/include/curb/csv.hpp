// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace curb::csv {

/// Splits one RFC 4180 record (quoted fields, doubled quotes). Embedded
/// newlines inside quotes are not supported.
std::vector<std::string> split_record(std::string_view line);

/// Quotes a field when it contains a comma, quote, or newline.
std::string escape(std::string_view field);

std::string join(const std::vector<std::string>& fields);

}  // namespace curb::csv
