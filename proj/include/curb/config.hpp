// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "curb/domain.hpp"
#include "curb/judgeclient.hpp"

namespace curb {

/// Operator configuration. JSON document:
///   {"store": path, "image_root": dir, "catalog": path, "backends": [BackendConfig...]}
/// Relative paths resolve against the directory holding the config file.
struct AppConfig {
  std::vector<BackendConfig> backends;
  std::string store_path;
  std::string image_root;
  std::string catalog_path;  // empty -> built-in catalog

  const BackendConfig* find_backend(const std::string& model_id) const;
  const BackendConfig& backend(const std::string& model_id) const;
  AttributeCatalog load_catalog() const;
};

AppConfig parse_config(const std::string& document, const std::string& base_dir = {});
AppConfig load_config(const std::string& path);

}  // namespace curb
