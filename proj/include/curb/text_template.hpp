// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace curb {

/// Substitutes `{{name}}` placeholders. Every placeholder in the template must
/// have a value, otherwise an Error("template") is thrown.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

/// Placeholder names in order of first appearance.
std::vector<std::string> template_placeholders(std::string_view tmpl);

}  // namespace curb
