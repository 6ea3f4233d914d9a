// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

#include "curb/agreement.hpp"

#include <tuple>

namespace curb::agreement {

MetricSeries::MetricSeries(Eigen::VectorXd xs, Eigen::VectorXd ys) : x(std::move(xs)), y(std::move(ys)) {
  detail::check_pair(x, y, 0, "series");
}

MetricSeries::MetricSeries(const std::vector<double>& xs, const std::vector<double>& ys)
    : MetricSeries(Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size())),
                   Eigen::Map<const Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()))) {}

double mos(std::span<const double> values) {
  if (values.empty()) throw MetricError("mos: no ratings");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double mos(std::span<const HumanRating> ratings) {
  std::vector<double> v;
  v.reserve(ratings.size());
  for (const auto& r : ratings) v.push_back(r.rating);
  return mos(v);
}

double leave_one_out_mos(std::span<const HumanRating> ratings, const std::string& excluded_rater) {
  bool found = false;
  std::vector<double> rest;
  for (const auto& r : ratings) {
    if (r.rater_id == excluded_rater) {
      found = true;
    } else {
      rest.push_back(r.rating);
    }
  }
  if (!found) throw MetricError("leave_one_out_mos: rater '" + excluded_rater + "' has no rating here");
  if (rest.empty()) throw MetricError("leave_one_out_mos: excluding '" + excluded_rater + "' leaves no ratings");
  return mos(rest);
}

std::vector<int> vote_tally(std::span<const int> labels, const AttributeSpec& attribute) {
  std::vector<int> counts(attribute.options.size(), 0);
  for (int l : labels) {
    if (!attribute.valid_index(l)) {
      throw MetricError("vote: option index " + std::to_string(l) + " invalid for '" + attribute.id + "'");
    }
    ++counts[static_cast<std::size_t>(l)];
  }
  return counts;
}

int majority_vote(std::span<const int> labels, const AttributeSpec& attribute, TieBreakRules rules) {
  if (labels.empty()) throw MetricError("majority_vote: no labels");
  const auto counts = vote_tally(labels, attribute);
  const int best = *std::max_element(counts.begin(), counts.end());
  const TieRule rule = attribute.scale_type == ScaleType::kOrdinal ? rules.ordinal : rules.nominal;
  if (rule == TieRule::kConservative) {
    for (std::size_t i = counts.size(); i-- > 0;) {
      if (counts[i] == best) return static_cast<int>(i);
    }
  }
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == best) return static_cast<int>(i);
  }
  return 0;
}

std::string_view to_string(PoolingMode m) {
  return m == PoolingMode::kAllAttributes ? "all-attributes" : "ordinal-only";
}

PoolingMode parse_pooling_mode(std::string_view s) {
  if (s == "all-attributes") return PoolingMode::kAllAttributes;
  if (s == "ordinal-only") return PoolingMode::kOrdinalOnly;
  throw MetricError("unknown pooling mode '" + std::string(s) + "' (all-attributes, ordinal-only)");
}

std::string_view to_string(DistanceMode m) { return m == DistanceMode::kNominal ? "nominal" : "ordinal-index"; }

DistanceMode parse_distance_mode(std::string_view s) {
  if (s == "nominal") return DistanceMode::kNominal;
  if (s == "ordinal-index") return DistanceMode::kOrdinalIndex;
  throw MetricError("unknown distance mode '" + std::string(s) + "' (nominal, ordinal-index)");
}

namespace {

void check_runs(const StabilityInput& input, const char* metric) {
  if (input.empty()) throw MetricError(std::string(metric) + ": no image-attribute pairs");
  const std::size_t r = input.front().runs.size();
  for (const auto& p : input) {
    if (p.runs.size() < 2) {
      throw MetricError(std::string(metric) + ": pair (" + p.image_id + ", " + p.attribute_id + ") has " +
                        std::to_string(p.runs.size()) + " run(s); at least 2 required");
    }
    if (p.runs.size() != r) throw MetricError(std::string(metric) + ": run counts differ across pairs");
  }
}

}  // namespace

double stability_score(const StabilityInput& input) {
  check_runs(input, "stability_score");
  double total = 0.0;
  for (const auto& p : input) {
    std::map<int, long> counts;
    for (int l : p.runs) ++counts[l];
    long agreeing = 0;
    for (const auto& [label, c] : counts) agreeing += c * (c - 1) / 2;
    const auto r = static_cast<long>(p.runs.size());
    total += static_cast<double>(agreeing) / static_cast<double>(r * (r - 1) / 2);
  }
  return total / static_cast<double>(input.size());
}

double mean_run_std(const StabilityInput& input, const AttributeCatalog& catalog, PoolingMode mode) {
  check_runs(input, "mean_run_std");
  double total = 0.0;
  std::size_t used = 0;
  for (const auto& p : input) {
    const auto& attr = catalog.at(p.attribute_id);
    if (mode == PoolingMode::kOrdinalOnly && attr.scale_type == ScaleType::kNominal) continue;
    Eigen::VectorXd v(static_cast<Eigen::Index>(p.runs.size()));
    for (std::size_t i = 0; i < p.runs.size(); ++i) v(static_cast<Eigen::Index>(i)) = p.runs[i];
    total += std::sqrt((v.array() - v.mean()).square().mean());
    ++used;
  }
  if (used == 0) throw MetricError("mean_run_std: no pairs left after pooling");
  return total / static_cast<double>(used);
}

ReliabilityResult reliability(const RatingMatrix& m, DistanceMode mode) {
  ReliabilityResult r;
  r.krippendorff_alpha = krippendorff_alpha(m, mode);
  r.icc_2_1 = icc_2_1(m);
  r.n_units = m.units();
  r.n_raters = m.raters();
  r.missing_count = m.missing_count();
  r.distance_mode = mode;
  return r;
}

AlignmentReport alignment_report(const LabelMap& human, const LabelMap& model, const AttributeCatalog& catalog,
                                 PoolingMode mode) {
  std::vector<std::string> diff;
  for (const auto& [k, v] : human) {
    if (!model.count(k)) diff.push_back("model lacks (" + k.first + ", " + k.second + ")");
  }
  for (const auto& [k, v] : model) {
    if (!human.count(k)) diff.push_back("human lacks (" + k.first + ", " + k.second + ")");
  }
  if (!diff.empty()) {
    std::string msg = "alignment_report: key sets differ";
    for (std::size_t i = 0; i < diff.size() && i < 10; ++i) msg += "; " + diff[i];
    if (diff.size() > 10) msg += "; ... " + std::to_string(diff.size() - 10) + " more";
    throw MetricError(msg);
  }
  std::vector<double> h;
  std::vector<double> m;
  for (const auto& [k, v] : human) {
    const auto& attr = catalog.at(k.second);
    if (mode == PoolingMode::kOrdinalOnly && attr.scale_type == ScaleType::kNominal) continue;
    h.push_back(v);
    m.push_back(model.at(k));
  }
  if (h.size() < 2) throw MetricError("alignment_report: needs at least 2 pooled pairs");
  const MetricSeries s(m, h);
  AlignmentReport r;
  r.pearson_r = plcc(s);
  r.spearman_rho = srcc(s);
  const auto e = mae_rmse(s);
  r.mae = e.mae;
  r.rmse = e.rmse;
  r.n_pairs = h.size();
  r.pooling_mode = mode;
  return r;
}

namespace {

std::map<UnitKey, std::vector<int>> group_votes(const std::vector<Judgment>& judgments) {
  std::map<UnitKey, std::vector<int>> out;
  for (const auto& j : judgments) out[{j.image_id, j.attribute_id}].push_back(j.option_index);
  return out;
}

}  // namespace

LabelMap majority_labels(const std::vector<Judgment>& judgments, const AttributeCatalog& catalog,
                         TieBreakRules rules) {
  LabelMap out;
  for (const auto& [key, votes] : group_votes(judgments)) {
    out[key] = majority_vote(votes, catalog.at(key.second), rules);
  }
  return out;
}

std::vector<LabelHistogram> label_distribution(const std::vector<Judgment>& judgments,
                                               const AttributeCatalog& catalog, TieBreakRules rules) {
  std::vector<LabelHistogram> out;
  std::map<std::string, std::size_t> slot;
  for (const auto& a : catalog.attributes()) {
    slot[a.id] = out.size();
    out.push_back({a.id, std::vector<int>(a.options.size(), 0)});
  }
  for (const auto& [key, label] : majority_labels(judgments, catalog, rules)) {
    ++out[slot.at(key.second)].counts[static_cast<std::size_t>(label)];
  }
  return out;
}

StabilityBuild build_stability_input(const std::vector<Judgment>& judgments) {
  std::map<UnitKey, std::vector<std::pair<std::tuple<std::string, int>, int>>> grouped;
  for (const auto& j : judgments) {
    grouped[{j.image_id, j.attribute_id}].push_back({{j.model_id, j.run_index}, j.option_index});
  }
  std::map<std::size_t, std::size_t> length_freq;
  for (auto& [k, v] : grouped) {
    std::sort(v.begin(), v.end());
    ++length_freq[v.size()];
  }
  StabilityBuild b;
  if (grouped.empty()) return b;
  const auto modal = std::max_element(length_freq.begin(), length_freq.end(),
                                      [](const auto& a, const auto& c) { return a.second < c.second; });
  b.runs = modal->first;
  for (const auto& [k, v] : grouped) {
    if (v.size() != b.runs) {
      ++b.dropped_pairs;
      continue;
    }
    RunLabels rl{k.first, k.second, {}};
    for (const auto& e : v) rl.runs.push_back(e.second);
    b.input.push_back(std::move(rl));
  }
  return b;
}

RatingMatrix build_panel(const std::vector<Judgment>& judgments) {
  std::set<std::string> units;
  std::set<std::pair<std::string, int>> raters;
  for (const auto& j : judgments) {
    units.insert(j.image_id + "|" + j.attribute_id);
    raters.insert({j.model_id, j.run_index});
  }
  std::vector<std::string> unit_ids(units.begin(), units.end());
  std::vector<std::string> rater_ids;
  std::map<std::pair<std::string, int>, Eigen::Index> rater_col;
  for (const auto& r : raters) {
    rater_col[r] = static_cast<Eigen::Index>(rater_ids.size());
    rater_ids.push_back(r.first + "#" + std::to_string(r.second));
  }
  std::map<std::string, Eigen::Index> unit_row;
  for (std::size_t i = 0; i < unit_ids.size(); ++i) unit_row[unit_ids[i]] = static_cast<Eigen::Index>(i);
  RatingMatrix m(unit_ids, rater_ids);
  for (const auto& j : judgments) {
    m.set(unit_row.at(j.image_id + "|" + j.attribute_id), rater_col.at({j.model_id, j.run_index}), j.option_index);
  }
  return m;
}

std::map<std::string, double> mos_by_image(const std::vector<HumanRating>& ratings) {
  std::map<std::string, std::vector<double>> grouped;
  for (const auto& r : ratings) grouped[r.image_id].push_back(r.rating);
  std::map<std::string, double> out;
  for (const auto& [id, v] : grouped) out[id] = mos(v);
  return out;
}

LeaveOneOutPanel leave_one_out_panel(const std::vector<HumanRating>& ratings) {
  std::map<std::string, std::vector<HumanRating>> by_image;
  std::set<std::string> raters;
  for (const auto& r : ratings) {
    by_image[r.image_id].push_back(r);
    raters.insert(r.rater_id);
  }
  if (raters.size() < 2) throw MetricError("leave_one_out_panel: needs at least 2 raters");
  LeaveOneOutPanel panel;
  for (const auto& rater : raters) {
    std::vector<double> own;
    std::vector<double> consensus;
    for (const auto& [image, rs] : by_image) {
      const auto it = std::find_if(rs.begin(), rs.end(), [&](const HumanRating& h) { return h.rater_id == rater; });
      if (it == rs.end() || rs.size() < 2) continue;
      own.push_back(it->rating);
      consensus.push_back(leave_one_out_mos(rs, rater));
    }
    const MetricSeries s(own, consensus);
    panel.raters.push_back({rater, srcc(s), plcc(s), own.size()});
  }
  for (const auto& r : panel.raters) {
    panel.mean_srcc += r.srcc;
    panel.mean_plcc += r.plcc;
  }
  panel.mean_srcc /= static_cast<double>(panel.raters.size());
  panel.mean_plcc /= static_cast<double>(panel.raters.size());
  return panel;
}

}  // namespace curb::agreement
