// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

// Shared fixtures: scratch directories, header-only image stand-ins, corpus
// manifests, and scripted judge responses.

#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "curb/domain.hpp"
#include "curb/judgeclient.hpp"

namespace curb::testing {

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("curb-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::filesystem::create_directories(std::filesystem::path(path).parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// PNG signature plus an IHDR chunk: enough for dimension probing.
inline std::string png_bytes(std::uint32_t w = 640, std::uint32_t h = 480) {
  std::string b = "\x89PNG\r\n\x1a\n";
  b += std::string("\0\0\0\x0d", 4) + "IHDR";
  for (std::uint32_t v : {w, h}) {
    for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<char>((v >> s) & 0xFF));
  }
  b += std::string("\x08\x02\0\0\0", 5);
  b += std::string(4, '\0');  // CRC is not checked
  return b;
}

inline ImagePayload png_payload(std::uint32_t w = 640, std::uint32_t h = 480) {
  return {png_bytes(w, h), "image/png"};
}

/// Writes `n` images plus a JSONL manifest into `dir`; ids are prop-000, ...
inline std::vector<PropertyRecord> make_corpus(const ScratchDir& dir, int n, const std::string& manifest = "corpus.jsonl",
                                               const std::string& city = "Springfield") {
  std::vector<PropertyRecord> out;
  std::string jsonl;
  for (int i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "prop-%03d", i);
    PropertyRecord p;
    p.image_id = id;
    p.image_source = std::string("images/") + id + ".png";
    p.city = city;
    p.state = "IL";
    p.latitude = 39.78 + 0.001 * i;
    p.longitude = -89.65 - 0.001 * i;
    p.address = std::to_string(100 + i) + " Elm St";
    write_file(dir.file(p.image_source), png_bytes());
    nlohmann::json o = {{"image_id", p.image_id}, {"image_source", p.image_source}, {"city", *p.city},
                        {"state", *p.state},      {"latitude", *p.latitude},         {"longitude", *p.longitude},
                        {"address", *p.address}};
    jsonl += o.dump() + "\n";
    out.push_back(p);
  }
  write_file(dir.file(manifest), jsonl);
  return out;
}

/// Attribute QA answer listing `labels` (attribute id -> option index) in `order`.
inline std::string attribute_response(const AttributeCatalog& catalog, const std::vector<std::string>& order,
                                      const std::map<std::string, int>& labels) {
  std::string out = "Here is my assessment.\n";
  for (const auto& id : order) {
    const AttributeSpec& a = catalog.at(id);
    out += "- " + a.display_name + ": " + a.options[static_cast<std::size_t>(labels.at(id))].label + "\n";
  }
  return out;
}

inline BackendConfig mock_backend(const std::string& model_id = "mock-judge", int concurrency = 1) {
  BackendConfig b;
  b.model_id = model_id;
  b.kind = "mock";
  b.max_concurrency = concurrency;
  b.requests_per_minute = 1000000;
  b.retry.max_attempts = 1;
  b.retry.backoff_base_s = 0.0;
  return b;
}

}  // namespace curb::testing
