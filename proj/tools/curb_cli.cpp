// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

// Operator command line: ingestion, assessment runs, metrics, distillation
// artifacts, narrative reports, and the dashboard API server.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "curb/config.hpp"
#include "curb/interface.hpp"
#include "curb/metrics.hpp"
#include "curb/runner.hpp"
#include "curb/service.hpp"
#include "curb/store.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitError = 2;
constexpr int kExitPartial = 3;

struct Common {
  std::string config_path;
  std::string store_path;
};

curb::AppConfig load_app_config(const Common& c) {
  return c.config_path.empty() ? curb::AppConfig{} : curb::load_config(c.config_path);
}

std::string store_path(const Common& c, const curb::AppConfig& cfg) {
  if (!c.store_path.empty()) return c.store_path;
  if (!cfg.store_path.empty()) return cfg.store_path;
  throw curb::Error("usage", "no store given: pass --store or set \"store\" in the config");
}

void emit(const json& j, const std::string& out_path) {
  const std::string text = j.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw curb::Error("io", "cannot write " + out_path);
  std::cout << json{{"written", out_path}}.dump() << "\n";
}

json ingest_json(const curb::IngestResult& r) {
  json rejects = json::array();
  for (const auto& x : r.rejects) rejects.push_back({{"line", x.line}, {"image_id", x.image_id}, {"reason", x.reason}});
  return {{"accepted", r.accepted},
          {"unchanged", r.unchanged},
          {"rejected", r.rejects.size()},
          {"rejects", rejects},
          {"source_digest", r.source_digest},
          {"already_ingested", r.already_ingested}};
}

// Ingests the corpus manifest and returns its records in file order.
std::vector<curb::PropertyRecord> corpus_from_manifest(curb::Store& store, const std::string& path,
                                                       json& ingest_out) {
  const auto result = store.ingest_properties(path);
  ingest_out = ingest_json(result);
  std::ifstream in(path);
  std::string line;
  std::vector<curb::PropertyRecord> out;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    json o;
    try {
      o = json::parse(line);
    } catch (const json::parse_error&) {
      continue;
    }
    if (!o.is_object() || !o.contains("image_id") || !o["image_id"].is_string()) continue;
    const std::string id = o["image_id"].get<std::string>();
    if (!seen.insert(id).second) continue;
    if (auto p = store.property(id)) out.push_back(std::move(*p));
  }
  return out;
}

std::vector<std::shared_ptr<curb::JudgeClient>> clients_for(const curb::AppConfig& cfg,
                                                            const std::vector<std::string>& models) {
  std::vector<std::shared_ptr<curb::JudgeClient>> out;
  if (models.empty()) {
    for (const auto& b : cfg.backends) out.push_back(curb::make_client(b));
  } else {
    for (const auto& m : models) out.push_back(curb::make_client(cfg.backend(m)));
  }
  if (out.empty()) throw curb::Error("config", "no backends configured");
  return out;
}

std::string image_root_for(const curb::AppConfig& cfg, const std::string& corpus) {
  if (!cfg.image_root.empty()) return cfg.image_root;
  if (!corpus.empty()) return fs::absolute(corpus).parent_path().string();
  return {};
}

struct RunArgs {
  Common common;
  std::string corpus;
  std::vector<std::string> models;
  std::string format = "single-word";
  std::optional<int> trials;
  std::uint64_t seed = 0;
  std::string out;
  bool no_resume = false;
};

int run_batch(const RunArgs& a, bool attribute_qa) {
  const auto cfg = load_app_config(a.common);
  curb::Store store(store_path(a.common, cfg));
  const auto catalog = cfg.load_catalog();
  curb::RunPlan plan;
  json ingest = nullptr;
  plan.corpus = a.corpus.empty() ? store.properties() : corpus_from_manifest(store, a.corpus, ingest);
  plan.backends = clients_for(cfg, a.models);
  if (attribute_qa) {
    plan.task = curb::AttributeQaTask{};
  } else {
    plan.task = curb::ConditionTask{curb::parse_output_format(a.format)};
  }
  plan.trials = a.trials;
  plan.base_seed = a.seed;
  plan.resume = !a.no_resume;
  plan.image_root = image_root_for(cfg, a.corpus);
  plan.catalog = &catalog;
  const auto report = curb::run_plan(store, plan);
  json body = report.to_json();
  if (!ingest.is_null()) body["ingest"] = ingest;
  emit(body, a.out);
  return report.ok() ? 0 : kExitPartial;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"curb: street-level housing condition assessment with judge models"};
  app.require_subcommand(1);

  auto add_common = [](CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config_path, "JSON config naming judge backends")->check(CLI::ExistingFile);
    sub->add_option("--store", c.store_path, "Store database path");
  };

  // ingest
  Common ingest_common;
  std::string ingest_corpus, ingest_ratings, ingest_expert;
  bool supersede = false;
  auto* ingest = app.add_subcommand("ingest", "Ingest a property manifest, human ratings, or expert labels");
  add_common(ingest, ingest_common);
  ingest->add_option("--corpus", ingest_corpus, "Property manifest (JSONL)")->check(CLI::ExistingFile);
  ingest->add_option("--ratings", ingest_ratings, "Human ratings CSV image_id,rater_id,rating")->check(CLI::ExistingFile);
  ingest->add_option("--expert", ingest_expert, "Expert attribute labels CSV image_id,rater_id,attribute_id,label")
      ->check(CLI::ExistingFile);
  ingest->add_flag("--supersede", supersede, "Allow changed human ratings, recording lineage");

  // rate / qa
  RunArgs rate_args, qa_args;
  auto add_run = [&](CLI::App* sub, RunArgs& a) {
    add_common(sub, a.common);
    sub->add_option("--corpus", a.corpus, "Corpus manifest (JSONL); ingested first")->check(CLI::ExistingFile);
    sub->add_option("--model", a.models, "Backend model id (repeatable; default every configured backend)");
    sub->add_option("--trials", a.trials, "Runs per image")->check(CLI::PositiveNumber);
    sub->add_option("--seed", a.seed, "Base seed for attribute-order shuffles");
    sub->add_option("--out", a.out, "Write the run report here instead of stdout");
    sub->add_flag("--no-resume", a.no_resume, "Fail instead of skipping already completed items");
  };
  auto* rate = app.add_subcommand("rate", "Condition rating runs");
  add_run(rate, rate_args);
  rate->add_option("--format", rate_args.format, "details-number|details-word|single-number|single-word")
      ->check(CLI::IsMember({"details-number", "details-word", "single-number", "single-word"}));
  auto* qa = app.add_subcommand("qa", "Attribute question-answering runs with shuffled attribute order");
  add_run(qa, qa_args);

  // metrics
  Common metrics_common;
  curb::MetricRequest mreq;
  std::string metrics_out, mode, run_set, attribute;
  bool markdown = false;
  auto* metrics = app.add_subcommand("metrics", "Agreement statistics over stored data");
  add_common(metrics, metrics_common);
  metrics->add_option("metric", mreq.metric, "srcc|plcc|mae-rmse|loo-panel|stability|dispersion|alpha|icc|alignment|distribution")
      ->required();
  metrics->add_option("--pred", mreq.pred, "Prediction source: mos or model:<id>");
  metrics->add_option("--ref", mreq.ref, "Reference source: mos or model:<id>");
  metrics->add_option("--run-set", run_set, "Condition run set, e.g. condition:single-word");
  metrics->add_option("--model", mreq.models, "Attribute QA model id (repeatable)");
  metrics->add_option("--mode", mode, "all-attributes|ordinal-only, or nominal|ordinal-index for alpha");
  metrics->add_option("--attribute", attribute, "Restrict to one attribute id");
  metrics->add_flag("--markdown", markdown, "Print a markdown table instead of JSON");
  metrics->add_option("--out", metrics_out, "Write the JSON report here");

  // distill-export
  Common distill_common;
  std::string distill_corpus, distill_model, distill_out, distill_format = "single-word";
  auto* distill = app.add_subcommand("distill-export", "Teacher pseudo-label manifest for student training");
  add_common(distill, distill_common);
  distill->add_option("--corpus", distill_corpus, "Unlabeled corpus manifest (JSONL)")->required()->check(CLI::ExistingFile);
  distill->add_option("--model", distill_model, "Teacher backend model id")->required();
  distill->add_option("--format", distill_format, "Output format for the teacher")
      ->check(CLI::IsMember({"details-number", "details-word", "single-number", "single-word"}));
  distill->add_option("--out", distill_out, "Manifest CSV path")->required();

  // score-predictions
  Common score_common;
  std::string pred_file, score_ref = "mos", score_model = "student", score_out, score_run_set;
  auto* score = app.add_subcommand("score-predictions", "Score exported student predictions");
  add_common(score, score_common);
  score->add_option("--pred", pred_file, "Predictions CSV image_id,prediction")->required()->check(CLI::ExistingFile);
  score->add_option("--ref", score_ref, "Reference: mos or model:<id>");
  score->add_option("--run-set", score_run_set, "Condition run set of a model reference");
  score->add_option("--model", score_model, "Name of the student model");
  score->add_option("--out", score_out, "Write the JSON report here");

  // serve
  Common serve_common;
  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Serve the dashboard JSON API");
  add_common(serve, serve_common);
  serve->add_option("--host", host, "Listen address");
  serve->add_option("--port", port, "Listen port")->check(CLI::Range(0, 65535));

  // report
  Common report_common;
  std::string report_image, report_model, report_out;
  auto* report = app.add_subcommand("report", "Render the narrative report for one property");
  add_common(report, report_common);
  report->add_option("--image", report_image, "Property image id")->required();
  report->add_option("--model", report_model, "Model whose assessment to report");
  report->add_option("--out", report_out, "Markdown output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitError;
  }

  try {
    if (*ingest) {
      const auto cfg = load_app_config(ingest_common);
      curb::Store store(store_path(ingest_common, cfg));
      if (ingest_corpus.empty() && ingest_ratings.empty() && ingest_expert.empty()) {
        throw curb::Error("usage", "ingest needs --corpus, --ratings, or --expert");
      }
      json out = json::object();
      bool rejected = false;
      if (!ingest_corpus.empty()) {
        const auto r = store.ingest_properties(ingest_corpus);
        out["properties"] = ingest_json(r);
        rejected |= !r.rejects.empty();
      }
      if (!ingest_ratings.empty()) {
        const auto r = store.ingest_human_ratings(ingest_ratings, supersede);
        out["human_ratings"] = ingest_json(r);
        rejected |= !r.rejects.empty();
      }
      if (!ingest_expert.empty()) {
        const auto r = store.ingest_expert_labels(ingest_expert, cfg.load_catalog());
        out["expert_labels"] = ingest_json(r);
        rejected |= !r.rejects.empty();
      }
      emit(out, "");
      return rejected ? kExitPartial : 0;
    }
    if (*rate) return run_batch(rate_args, false);
    if (*qa) return run_batch(qa_args, true);
    if (*metrics) {
      const auto cfg = load_app_config(metrics_common);
      curb::Store store(store_path(metrics_common, cfg));
      if (!mode.empty()) mreq.mode = mode;
      if (!run_set.empty()) mreq.run_set = run_set;
      if (!attribute.empty()) mreq.attribute = attribute;
      const auto r = curb::compute_metric(store, mreq, cfg.load_catalog());
      if (markdown && metrics_out.empty()) {
        std::cout << r.markdown;
      } else {
        emit(r.to_json(), metrics_out);
      }
      return 0;
    }
    if (*distill) {
      const auto cfg = load_app_config(distill_common);
      curb::Store store(store_path(distill_common, cfg));
      json ingest_out;
      const auto corpus = corpus_from_manifest(store, distill_corpus, ingest_out);
      const auto manifest =
          curb::export_distill_manifest(store, curb::make_client(cfg.backend(distill_model)), corpus,
                                        curb::parse_output_format(distill_format), image_root_for(cfg, distill_corpus));
      manifest.write(distill_out);
      emit({{"manifest", distill_out},
            {"rows", manifest.rows.size()},
            {"rejects", manifest.rejects.size()},
            {"ingest", ingest_out}},
           "");
      return manifest.rejects.empty() ? 0 : kExitPartial;
    }
    if (*score) {
      const auto cfg = load_app_config(score_common);
      curb::Store store(store_path(score_common, cfg));
      const auto preds = curb::import_predictions(pred_file, score_model);
      const auto ref = curb::rating_source(store, score_ref,
                                           score_run_set.empty() ? std::nullopt : std::optional(score_run_set));
      const auto s = curb::score_predictions(preds, ref);
      json body = s.to_json();
      body["model_id"] = preds.model_id;
      body["reference"] = score_ref;
      emit(body, score_out);
      return 0;
    }
    if (*serve) {
      auto cfg = load_app_config(serve_common);
      curb::Store store(store_path(serve_common, cfg));
      curb::Service service(store, cfg, cfg.load_catalog());
      const int bound = service.bind(host, port);
      std::cerr << json{{"listening", host + ":" + std::to_string(bound)}}.dump() << std::endl;
      service.listen();
      return 0;
    }
    if (*report) {
      const auto cfg = load_app_config(report_common);
      curb::Store store(store_path(report_common, cfg));
      const auto catalog = cfg.load_catalog();
      const auto property = store.property(report_image);
      if (!property) throw curb::Error("not_found", "unknown property " + report_image);
      const auto summary = curb::build_assessment_summary(
          store, report_image, catalog, report_model.empty() ? std::nullopt : std::optional(report_model));
      if (!summary) throw curb::Error("not_found", "no assessment stored for " + report_image);
      const auto r = curb::render_report(*summary, *property, catalog);
      if (report_out.empty()) {
        std::cout << r.text;
      } else {
        std::ofstream out(report_out, std::ios::binary | std::ios::trunc);
        out << r.text;
        if (!out) throw curb::Error("io", "cannot write " + report_out);
      }
      return 0;
    }
  } catch (const curb::ValidationError& e) {
    std::cerr << json{{"error", {{"kind", e.kind()}, {"message", e.what()}, {"violations", e.violations()}}}}.dump()
              << "\n";
    return kExitError;
  } catch (const curb::Error& e) {
    std::cerr << json{{"error", {{"kind", e.kind()}, {"message", e.what()}}}}.dump() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"kind", "internal"}, {"message", e.what()}}}}.dump() << "\n";
    return kExitError;
  }
  return 0;
}
