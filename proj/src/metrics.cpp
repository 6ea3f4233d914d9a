// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

#include "curb/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "curb/agreement.hpp"
#include "curb/digest.hpp"

namespace curb {

using nlohmann::json;
namespace ag = agreement;

json MetricReport::to_json() const {
  return {{"metric", metric}, {"value", value}, {"n", n}, {"mode", mode}, {"inputs_digest", inputs_digest}};
}

namespace {

std::size_t display_width(const std::string& s) {
  std::size_t w = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++w;
  }
  return w;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string digest_of(const json& inputs) { return sha256_hex(inputs.dump()); }

std::string condition_run_set_for(const Store& store, const std::string& model,
                                  const std::optional<std::string>& run_set) {
  if (run_set) return *run_set;
  std::set<std::string> sets;
  for (const char* s : {"condition:details-number", "condition:details-word", "condition:single-number",
                        "condition:single-word"}) {
    JudgmentFilter f;
    f.model_id = model;
    f.run_set = s;
    f.attribute_id = std::string(kHouseConditionId);
    if (!store.query(f).empty()) sets.insert(s);
  }
  if (sets.empty()) throw MetricError("model '" + model + "' has no stored condition ratings");
  if (sets.size() > 1) {
    std::string all;
    for (const auto& s : sets) all += (all.empty() ? "" : ", ") + s;
    throw MetricError("model '" + model + "' has several condition run sets (" + all + "); choose one with --run-set");
  }
  return *sets.begin();
}

std::vector<std::string> qa_models(const Store& store, const MetricRequest& r) {
  if (!r.models.empty()) return r.models;
  std::vector<std::string> out;
  for (auto& m : store.model_ids(std::string(kAttributeQaRunSet))) {
    if (m.rfind(kExpertPrefix, 0) != 0) out.push_back(std::move(m));
  }
  if (out.empty()) throw MetricError("no attribute QA judgments stored");
  return out;
}

std::vector<Judgment> qa_judgments(const Store& store, const std::vector<std::string>& models,
                                   const std::optional<std::string>& attribute) {
  std::vector<Judgment> out;
  for (const auto& m : models) {
    JudgmentFilter f;
    f.model_id = m;
    f.run_set = std::string(kAttributeQaRunSet);
    f.attribute_id = attribute;
    auto js = store.query(f);
    out.insert(out.end(), std::make_move_iterator(js.begin()), std::make_move_iterator(js.end()));
  }
  return out;
}

std::string single_model(const Store& store, const MetricRequest& r) {
  const auto models = qa_models(store, r);
  if (models.size() != 1) {
    throw MetricError(r.metric + " is computed per model; pass exactly one --model (" +
                      std::to_string(models.size()) + " candidates)");
  }
  return models.front();
}

json judgments_digest_input(const std::vector<Judgment>& js) {
  json a = json::array();
  for (const auto& j : js) a.push_back({j.image_id, j.model_id, j.run_index, j.attribute_id, j.option_index});
  return a;
}

MetricReport scalar_report(std::string metric, double value, std::size_t n, std::string mode, const json& inputs) {
  MetricReport r;
  r.metric = std::move(metric);
  r.value = value;
  r.n = n;
  r.mode = std::move(mode);
  r.inputs_digest = digest_of(inputs);
  r.markdown = markdown_table({"Metric", "Value", "N", "Mode"}, {{r.metric, num(value), std::to_string(n), r.mode}});
  return r;
}

MetricReport paired_metric(const Store& store, const MetricRequest& req) {
  if (req.pred.empty()) throw MetricError(req.metric + " needs a prediction source (--pred model:<id> or mos)");
  const auto pred = rating_source(store, req.pred, req.run_set);
  const auto ref = rating_source(store, req.ref, req.run_set);
  std::vector<double> xs, ys;
  json inputs = json::array();
  for (const auto& [id, v] : pred) {
    const auto it = ref.find(id);
    if (it == ref.end()) continue;
    xs.push_back(v);
    ys.push_back(it->second);
    inputs.push_back({id, v, it->second});
  }
  const ag::MetricSeries s(xs, ys);
  const std::string mode = req.pred + " vs " + req.ref;
  if (req.metric == "srcc") return scalar_report("srcc", ag::srcc(s), xs.size(), mode, inputs);
  if (req.metric == "plcc") return scalar_report("plcc", ag::plcc(s), xs.size(), mode, inputs);
  const auto e = ag::mae_rmse(s);
  MetricReport r;
  r.metric = "mae-rmse";
  r.value = {{"mae", e.mae}, {"rmse", e.rmse}};
  r.n = xs.size();
  r.mode = mode;
  r.inputs_digest = digest_of(inputs);
  r.markdown = markdown_table({"Comparison", "MAE", "RMSE", "N"}, {{mode, num(e.mae), num(e.rmse), std::to_string(r.n)}});
  return r;
}

}  // namespace

std::string markdown_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> w(header.size(), 3);
  for (std::size_t c = 0; c < header.size(); ++c) w[c] = std::max(w[c], display_width(header[c]));
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size() && c < w.size(); ++c) w[c] = std::max(w[c], display_width(row[c]));
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out = "|";
    for (std::size_t c = 0; c < w.size(); ++c) {
      const std::string cell = c < cells.size() ? cells[c] : "";
      out += " " + cell + std::string(w[c] - display_width(cell), ' ') + " |";
    }
    return out + "\n";
  };
  std::string out = line(header) + "|";
  for (std::size_t c = 0; c < w.size(); ++c) out += std::string(w[c] + 2, '-') + "|";
  out += "\n";
  for (const auto& row : rows) out += line(row);
  return out;
}

std::map<std::string, double> rating_source(const Store& store, const std::string& source,
                                            const std::optional<std::string>& run_set) {
  if (source == "mos") {
    auto m = ag::mos_by_image(store.human_ratings());
    if (m.empty()) throw MetricError("no human ratings stored for the mos source");
    return m;
  }
  if (source.rfind("model:", 0) != 0) {
    throw MetricError("unknown rating source '" + source + "' (use mos or model:<id>)");
  }
  const std::string model = source.substr(6);
  JudgmentFilter f;
  f.model_id = model;
  f.run_set = condition_run_set_for(store, model, run_set);
  f.attribute_id = std::string(kHouseConditionId);
  std::map<std::string, std::pair<double, int>> acc;
  for (const auto& j : store.query(f)) {
    auto& [sum, count] = acc[j.image_id];
    sum += rating_for_option_index(j.option_index);
    ++count;
  }
  if (acc.empty()) throw MetricError("model '" + model + "' has no ratings in " + *f.run_set);
  std::map<std::string, double> out;
  for (const auto& [id, sc] : acc) out[id] = sc.first / sc.second;
  return out;
}

MetricReport compute_metric(const Store& store, const MetricRequest& req, const AttributeCatalog& catalog) {
  const std::string& m = req.metric;
  if (m == "srcc" || m == "plcc" || m == "mae-rmse") return paired_metric(store, req);

  if (m == "loo-panel") {
    const auto ratings = store.human_ratings();
    const auto panel = ag::leave_one_out_panel(ratings);
    MetricReport r;
    r.metric = m;
    r.mode = "leave-one-out mos";
    json raters = json::array();
    std::vector<std::vector<std::string>> rows;
    for (const auto& a : panel.raters) {
      raters.push_back({{"rater_id", a.rater_id}, {"srcc", a.srcc}, {"plcc", a.plcc}, {"n", a.n}});
      rows.push_back({a.rater_id, num(a.srcc), num(a.plcc), std::to_string(a.n)});
    }
    rows.push_back({"Mean", num(panel.mean_srcc), num(panel.mean_plcc), ""});
    r.value = {{"raters", raters}, {"mean_srcc", panel.mean_srcc}, {"mean_plcc", panel.mean_plcc}};
    r.n = panel.raters.size();
    json inputs = json::array();
    for (const auto& h : ratings) inputs.push_back({h.image_id, h.rater_id, h.rating});
    r.inputs_digest = digest_of(inputs);
    r.markdown = markdown_table({"Rater", "SRCC", "PLCC", "N"}, rows);
    return r;
  }

  if (m == "stability" || m == "dispersion") {
    const std::string model = single_model(store, req);
    const auto js = qa_judgments(store, {model}, req.attribute);
    const auto build = ag::build_stability_input(js);
    const auto mode = req.mode ? ag::parse_pooling_mode(*req.mode) : ag::PoolingMode::kAllAttributes;
    const double v = m == "stability" ? ag::stability_score(build.input) : ag::mean_run_std(build.input, catalog, mode);
    MetricReport r = scalar_report(m, v, build.input.size(),
                                   m == "stability" ? "runs=" + std::to_string(build.runs)
                                                    : std::string(ag::to_string(mode)),
                                   judgments_digest_input(js));
    r.markdown = markdown_table({"Model", m == "stability" ? "Stability" : "Mean run std", "Pairs", "Runs", "Dropped"},
                                {{model, num(v), std::to_string(build.input.size()), std::to_string(build.runs),
                                  std::to_string(build.dropped_pairs)}});
    return r;
  }

  if (m == "alpha" || m == "icc") {
    const auto models = qa_models(store, req);
    const auto js = qa_judgments(store, models, req.attribute);
    const RatingMatrix panel = ag::build_panel(js);
    const auto dist = req.mode ? ag::parse_distance_mode(*req.mode) : ag::DistanceMode::kNominal;
    const double v = m == "alpha" ? ag::krippendorff_alpha(panel, dist) : ag::icc_2_1(panel);
    const std::string mode = m == "alpha" ? std::string(ag::to_string(dist)) : "two-way random, absolute, single";
    MetricReport r = scalar_report(m, v, static_cast<std::size_t>(panel.units()), mode, judgments_digest_input(js));
    r.markdown = markdown_table({"Raters", m == "alpha" ? "Krippendorff alpha" : "ICC(2,1)", "Units", "Missing"},
                                {{std::to_string(panel.raters()), num(v), std::to_string(panel.units()),
                                  std::to_string(panel.missing_count())}});
    return r;
  }

  if (m == "alignment") {
    const std::string model = single_model(store, req);
    JudgmentFilter hf;
    hf.run_set = std::string(kAttributeQaRunSet);
    hf.model_prefix = std::string(kExpertPrefix);
    hf.attribute_id = req.attribute;
    const auto human_js = store.query(hf);
    if (human_js.empty()) throw MetricError("alignment needs ingested expert labels");
    const auto model_js = qa_judgments(store, {model}, req.attribute);
    const auto mode = req.mode ? ag::parse_pooling_mode(*req.mode) : ag::PoolingMode::kAllAttributes;
    const auto a = ag::alignment_report(ag::majority_labels(human_js, catalog), ag::majority_labels(model_js, catalog),
                                        catalog, mode);
    MetricReport r;
    r.metric = m;
    r.mode = std::string(ag::to_string(mode));
    r.value = {{"pearson_r", a.pearson_r}, {"spearman_rho", a.spearman_rho}, {"mae", a.mae}, {"rmse", a.rmse}};
    r.n = a.n_pairs;
    json inputs = {judgments_digest_input(human_js), judgments_digest_input(model_js)};
    r.inputs_digest = digest_of(inputs);
    r.markdown = markdown_table({"Model", "Pearson r", "Spearman rho", "MAE", "RMSE", "N"},
                                {{model, num(a.pearson_r), num(a.spearman_rho), num(a.mae), num(a.rmse),
                                  std::to_string(a.n_pairs)}});
    return r;
  }

  if (m == "distribution") {
    const std::string model = single_model(store, req);
    const auto js = qa_judgments(store, {model}, req.attribute);
    const auto hist = ag::label_distribution(js, catalog);
    MetricReport r;
    r.metric = m;
    r.mode = "majority vote";
    std::set<std::string> images;
    for (const auto& j : js) images.insert(j.image_id);
    r.n = images.size();
    json value = json::array();
    std::vector<std::vector<std::string>> rows;
    for (const auto& h : hist) {
      if (req.attribute && h.attribute_id != *req.attribute) continue;
      const AttributeSpec& attr = catalog.at(h.attribute_id);
      value.push_back({{"attribute_id", h.attribute_id}, {"counts", h.counts}});
      for (std::size_t i = 0; i < h.counts.size(); ++i) {
        rows.push_back({attr.display_name, attr.options[i].label, std::to_string(h.counts[i])});
      }
    }
    r.value = value;
    r.inputs_digest = digest_of(judgments_digest_input(js));
    r.markdown = markdown_table({"Attribute", "Label", "Count"}, rows);
    return r;
  }

  std::string known;
  for (const char* k : kMetricNames) known += (known.empty() ? "" : ", ") + std::string(k);
  throw MetricError("unknown metric '" + m + "' (" + known + ")");
}

}  // namespace curb
