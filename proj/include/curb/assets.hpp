// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string_view>
#include <vector>

namespace curb::assets {

/// Files under data/ and templates/ compiled into the library, addressed by
/// their repository-relative path (e.g. "templates/condition_v1.txt").
std::string_view get(std::string_view name);
std::vector<std::string_view> names();

}  // namespace curb::assets
