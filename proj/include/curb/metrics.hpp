// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "curb/domain.hpp"
#include "curb/store.hpp"

namespace curb {

/// One agreement computation over stored data.
///
/// Rating sources (`pred`, `ref`) are "mos" (human panel mean), or
/// "model:<id>" (mean condition rating of that model across its runs in
/// `run_set`, which defaults to the only condition run set the model has).
struct MetricRequest {
  std::string metric;  // srcc plcc mae-rmse loo-panel stability dispersion alpha icc alignment distribution
  std::string pred;
  std::string ref = "mos";
  std::optional<std::string> run_set;
  std::vector<std::string> models;  // attribute QA metrics; empty -> every non-expert model
  std::optional<std::string> mode;  // pooling (dispersion, alignment) or distance (alpha)
  std::optional<std::string> attribute;
};

struct MetricReport {
  std::string metric;
  nlohmann::json value;
  std::size_t n = 0;
  std::string mode;
  std::string inputs_digest;
  std::string markdown;

  nlohmann::json to_json() const;
};

inline constexpr const char* kMetricNames[] = {"srcc",      "plcc",       "mae-rmse", "loo-panel", "stability",
                                               "dispersion", "alpha",      "icc",      "alignment", "distribution"};

MetricReport compute_metric(const Store& store, const MetricRequest& request, const AttributeCatalog& catalog);

/// Per-image ratings named by a rating source spelling (see MetricRequest).
std::map<std::string, double> rating_source(const Store& store, const std::string& source,
                                            const std::optional<std::string>& run_set = {});

/// Aligned markdown table; columns padded to the widest cell.
std::string markdown_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows);

}  // namespace curb
