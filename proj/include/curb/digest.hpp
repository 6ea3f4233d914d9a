// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

namespace curb {

/// Lowercase SHA-256 hex digest.
std::string sha256_hex(std::string_view data);

/// Digest over length-prefixed fields, so ("ab","c") and ("a","bc") differ.
std::string sha256_fields(std::initializer_list<std::string_view> fields);

/// First eight digest bytes as a big-endian integer.
std::uint64_t stable_hash64(std::initializer_list<std::string_view> fields);

std::string base64_encode(std::string_view data);

}  // namespace curb
