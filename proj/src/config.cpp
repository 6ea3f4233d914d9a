// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

#include "curb/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace curb {

using nlohmann::json;
namespace fs = std::filesystem;

const BackendConfig* AppConfig::find_backend(const std::string& model_id) const {
  for (const auto& b : backends) {
    if (b.model_id == model_id) return &b;
  }
  return nullptr;
}

const BackendConfig& AppConfig::backend(const std::string& model_id) const {
  if (const auto* b = find_backend(model_id)) return *b;
  std::string known;
  for (const auto& b : backends) known += (known.empty() ? "" : ", ") + b.model_id;
  throw Error("config", "no backend configured for model '" + model_id + "' (configured: " +
                            (known.empty() ? "none" : known) + ")");
}

AttributeCatalog AppConfig::load_catalog() const {
  return catalog_path.empty() ? default_catalog() : load_attribute_catalog_file(catalog_path);
}

namespace {

std::string resolve(const std::string& base_dir, const std::string& p) {
  if (p.empty() || base_dir.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base_dir) / p).lexically_normal().string();
}

}  // namespace

AppConfig parse_config(const std::string& document, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ValidationError({std::string("config is not valid JSON: ") + e.what()});
  }
  if (!j.is_object()) throw ValidationError({"config must be a JSON object"});

  std::vector<std::string> v;
  static const std::set<std::string> known = {"store", "image_root", "catalog", "backends"};
  for (const auto& [k, _] : j.items()) {
    if (!known.count(k)) v.push_back("unknown config key '" + k + "'");
  }
  AppConfig c;
  auto str = [&](const char* key) -> std::string {
    if (!j.contains(key)) return {};
    if (!j[key].is_string()) {
      v.push_back(std::string(key) + " must be a string");
      return {};
    }
    return j[key].get<std::string>();
  };
  c.store_path = resolve(base_dir, str("store"));
  c.image_root = resolve(base_dir, str("image_root"));
  c.catalog_path = resolve(base_dir, str("catalog"));

  if (j.contains("backends")) {
    if (!j["backends"].is_array()) {
      v.push_back("backends must be an array");
    } else {
      std::set<std::string> ids;
      for (std::size_t i = 0; i < j["backends"].size(); ++i) {
        try {
          BackendConfig b = BackendConfig::from_json(j["backends"][i]);
          b.cache_dir = resolve(base_dir, b.cache_dir);
          if (!ids.insert(b.model_id).second) v.push_back("duplicate backend model_id '" + b.model_id + "'");
          c.backends.push_back(std::move(b));
        } catch (const ValidationError& e) {
          for (const auto& s : e.violations()) v.push_back("backends[" + std::to_string(i) + "]: " + s);
        } catch (const json::exception& e) {
          v.push_back("backends[" + std::to_string(i) + "]: " + e.what());
        }
      }
    }
  }
  if (!v.empty()) throw ValidationError(std::move(v));
  return c;
}

AppConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("config", "cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), fs::absolute(path).parent_path().string());
}

}  // namespace curb
