// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

#include "curb/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "curb/agreement.hpp"
#include "curb/csv.hpp"
#include "curb/digest.hpp"
#include "curb/parse.hpp"

// After Eigen: the resolver header pulled in here defines `_res`.
#include <httplib.h>

namespace curb {

using nlohmann::json;
namespace fs = std::filesystem;

int RunPlan::effective_trials() const {
  if (trials) return *trials;
  return std::holds_alternative<AttributeQaTask>(task) ? kDefaultAttributeTrials : 1;
}

void RunPlan::validate() const {
  std::vector<std::string> v;
  if (effective_trials() < 1) v.push_back("trials must be >= 1, got " + std::to_string(effective_trials()));
  if (backends.empty()) v.push_back("at least one backend is required");
  for (const auto& b : backends) {
    if (!b) v.push_back("null backend client");
  }
  std::set<std::string> ids;
  for (const auto& p : corpus) {
    if (!ids.insert(p.image_id).second) v.push_back("duplicate image_id in corpus: " + p.image_id);
  }
  if (!v.empty()) throw ValidationError(std::move(v));
}

std::string condition_run_set(OutputFormat format) { return "condition:" + std::string(to_string(format)); }

std::uint64_t trial_seed(std::uint64_t base_seed, const std::string& image_id, int trial) {
  const std::string b = std::to_string(base_seed);
  const std::string t = std::to_string(trial);
  return stable_hash64({b, image_id, t});
}

json RunReport::to_json() const {
  json fails = json::array();
  for (const auto& f : failures) {
    fails.push_back({{"image_id", f.image_id},
                     {"model_id", f.model_id},
                     {"run_index", f.run_index},
                     {"error_kind", f.error_kind},
                     {"detail", f.detail},
                     {"raw_response_ref", f.raw_response_ref}});
  }
  return {{"run_id", run_id},
          {"run_set", run_set},
          {"planned", planned},
          {"skipped", skipped},
          {"succeeded", succeeded},
          {"failed", failed},
          {"judgments_written", judgments_written},
          {"backend_calls", backend_calls},
          {"latency_s", {{"mean", latency.mean_s}, {"median", latency.median_s}, {"max", latency.max_s}}},
          {"failures", fails}};
}

ImagePayload load_image_source(const std::string& source, const std::string& image_root) {
  if (source.rfind("http://", 0) == 0 || source.rfind("https://", 0) == 0) {
    const auto scheme_end = source.find("://") + 3;
    const auto path_start = source.find('/', scheme_end);
    const std::string origin = path_start == std::string::npos ? source : source.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : source.substr(path_start);
    httplib::Client cli(origin);
    cli.set_follow_location(true);
    cli.set_connection_timeout(30, 0);
    cli.set_read_timeout(30, 0);
    auto res = cli.Get(path);
    if (!res) throw Error("image", "cannot fetch " + source + ": " + httplib::to_string(res.error()));
    if (res->status != 200) throw Error("image", "cannot fetch " + source + ": HTTP " + std::to_string(res->status));
    ImagePayload img;
    img.bytes = res->body;
    img.media_type = sniff_media_type(img.bytes).value_or("application/octet-stream");
    return img;
  }
  std::string path = source.rfind("file://", 0) == 0 ? source.substr(7) : source;
  if (!image_root.empty() && fs::path(path).is_relative()) path = (fs::path(image_root) / path).string();
  try {
    return load_image_file(path);
  } catch (const Error& e) {
    throw Error("image", "cannot read image " + path);
  }
}

namespace {

struct WorkItem {
  const PropertyRecord* property;
  std::size_t backend;
  int trial;
};

struct Outcome {
  bool ok = false;
  bool skipped = false;
  double latency_s = 0.0;
  std::size_t judgments = 0;
  ItemFailure failure;
};

class Batch {
 public:
  Batch(Store& store, const RunPlan& plan) : store_(store), plan_(plan) {
    plan.validate();
    catalog_ = plan.catalog ? plan.catalog : &default_catalog();
    if (const auto* c = std::get_if<ConditionTask>(&plan.task)) {
      condition_ = true;
      format_ = c->format;
      run_set_ = condition_run_set(c->format);
    } else {
      run_set_ = std::string(kAttributeQaRunSet);
    }
  }

  RunReport run() {
    const int trials = plan_.effective_trials();
    for (const auto& p : plan_.corpus) {
      for (std::size_t b = 0; b < plan_.backends.size(); ++b) {
        for (int t = 0; t < trials; ++t) items_.push_back({&p, b, t});
      }
    }
    if (!plan_.resume) {
      std::size_t done = 0;
      for (const auto& w : items_) {
        const auto existing = store_.run_item(run_set_, w.property->image_id, model(w), w.trial);
        if (existing && existing->status == "ok") ++done;
      }
      if (done > 0) {
        throw Error("plan", std::to_string(done) + " planned items are already complete in " + run_set_ +
                                "; enable resume to continue the existing run");
      }
    }

    std::vector<int> calls_before;
    for (const auto& b : plan_.backends) calls_before.push_back(b->transport_calls());

    outcomes_.resize(items_.size());
    std::size_t workers = 0;
    for (const auto& b : plan_.backends) workers += static_cast<std::size_t>(b->backend().max_concurrency);
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(items_.size(), 1));
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back([this] { work(); });
    for (auto& th : pool) th.join();
    if (abort_) std::rethrow_exception(abort_);

    RunReport r;
    r.run_set = run_set_;
    r.planned = items_.size();
    std::vector<double> lat;
    for (const auto& o : outcomes_) {
      if (o.skipped) {
        ++r.skipped;
      } else if (o.ok) {
        ++r.succeeded;
        r.judgments_written += o.judgments;
        lat.push_back(o.latency_s);
      } else {
        ++r.failed;
        r.failures.push_back(o.failure);
      }
    }
    for (std::size_t b = 0; b < plan_.backends.size(); ++b) {
      r.backend_calls += static_cast<std::size_t>(plan_.backends[b]->transport_calls() - calls_before[b]);
    }
    if (!lat.empty()) {
      std::sort(lat.begin(), lat.end());
      double sum = 0.0;
      for (double v : lat) sum += v;
      r.latency.mean_s = sum / static_cast<double>(lat.size());
      const std::size_t mid = lat.size() / 2;
      r.latency.median_s = lat.size() % 2 ? lat[mid] : 0.5 * (lat[mid - 1] + lat[mid]);
      r.latency.max_s = lat.back();
    }

    const std::string started = utc_timestamp_now();
    const std::string count = std::to_string(r.planned);
    r.run_id = sha256_fields({"run", run_set_, started, count, std::to_string(plan_.base_seed)}).substr(0, 16);
    json meta = r.to_json();
    meta["finished_at"] = started;
    meta["base_seed"] = plan_.base_seed;
    meta["trials"] = trials;
    json backends = json::array();
    for (const auto& b : plan_.backends) {
      json bj = b->backend().to_json();
      bj.erase("mock");
      backends.push_back(bj);
    }
    meta["backends"] = backends;
    meta["catalog_version"] = catalog_->version();
    store_.put_run_meta(r.run_id, meta);
    return r;
  }

 private:
  const std::string& model(const WorkItem& w) const { return plan_.backends[w.backend]->backend().model_id; }

  void work() {
    for (;;) {
      const std::size_t i = next_.fetch_add(1);
      if (i >= items_.size() || abort_flag_.load()) return;
      try {
        outcomes_[i] = process(items_[i]);
      } catch (...) {
        std::lock_guard lock(abort_mu_);
        if (!abort_) abort_ = std::current_exception();
        abort_flag_.store(true);
        return;
      }
    }
  }

  // Storage errors propagate and abort the batch; everything else is recorded.
  Outcome process(const WorkItem& w) {
    const std::string& image_id = w.property->image_id;
    const std::string& model_id = model(w);
    Outcome out;
    if (const auto existing = store_.run_item(run_set_, image_id, model_id, w.trial);
        existing && existing->status == "ok") {
      out.skipped = true;
      return out;
    }

    RunItem item;
    item.run_set = run_set_;
    item.image_id = image_id;
    item.model_id = model_id;
    item.run_index = w.trial;

    auto fail = [&](std::string kind, std::string detail) {
      item.status = "failed";
      item.error_kind = std::move(kind);
      item.error_detail = std::move(detail);
      item.timestamp = utc_timestamp_now();
      store_.commit_failure(item);
      out.failure = {image_id, model_id, w.trial, item.error_kind, item.error_detail, item.raw_response_ref};
      return out;
    };

    ImagePayload image;
    try {
      image = load_image_source(w.property->image_source, plan_.image_root);
      validate_image(image);
    } catch (const Error& e) {
      return fail("image", e.what());
    }

    JudgeRequest req;
    req.image_id = image_id;
    req.image = std::move(image);
    req.run_nonce = w.trial;
    std::vector<std::string> order;
    if (condition_) {
      req.prompt = build_condition_prompt(format_);
    } else {
      item.seed = trial_seed(plan_.base_seed, image_id, w.trial);
      order = shuffle_attributes(*catalog_, item.seed);
      req.prompt = build_attribute_prompt(*catalog_, order);
      req.prompt.shuffle_seed = item.seed;
    }

    JudgeResponse resp;
    try {
      resp = plan_.backends[w.backend]->assess(req);
    } catch (const JudgeError& e) {
      item.attempts = e.provenance().attempts;
      return fail("judge." + e.kind(), e.what());
    } catch (const Error& e) {
      return fail(e.kind(), e.what());
    }
    item.attempts = resp.attempts;
    item.latency_s = resp.latency_s;
    item.from_cache = resp.from_cache;
    item.raw_response_ref = store_.blobs().put(resp.raw_text);

    std::vector<Judgment> judgments;
    const std::string now = utc_timestamp_now();
    try {
      if (condition_) {
        const ConditionVerdict v = parse_condition(resp.raw_text, format_);
        judgments.push_back({image_id, model_id, run_set_, w.trial, std::string(kHouseConditionId),
                             option_index_for_rating(v.rating), item.raw_response_ref, 0, now});
      } else {
        const AttributeVerdict v = parse_attributes(resp.raw_text, *catalog_);
        for (const auto& attr : catalog_->attributes()) {
          judgments.push_back({image_id, model_id, run_set_, w.trial, attr.id, v.labels.at(attr.id),
                               item.raw_response_ref, item.seed, now});
        }
      }
    } catch (const ParseError& e) {
      return fail(e.kind(), e.what());
    }

    item.status = "ok";
    item.timestamp = now;
    store_.commit_success(item, judgments);
    out.ok = true;
    out.latency_s = resp.latency_s;
    out.judgments = judgments.size();
    return out;
  }

  Store& store_;
  const RunPlan& plan_;
  const AttributeCatalog* catalog_ = nullptr;
  bool condition_ = false;
  OutputFormat format_ = OutputFormat::kSingleWord;
  std::string run_set_;
  std::vector<WorkItem> items_;
  std::vector<Outcome> outcomes_;
  std::atomic<std::size_t> next_{0};
  std::atomic<bool> abort_flag_{false};
  std::mutex abort_mu_;
  std::exception_ptr abort_;
};

}  // namespace

RunReport run_condition(Store& store, const RunPlan& plan) {
  if (!std::holds_alternative<ConditionTask>(plan.task)) throw Error("plan", "run_condition needs a condition task");
  return Batch(store, plan).run();
}

RunReport run_attribute_qa(Store& store, const RunPlan& plan) {
  if (!std::holds_alternative<AttributeQaTask>(plan.task)) throw Error("plan", "run_attribute_qa needs a QA task");
  return Batch(store, plan).run();
}

RunReport run_plan(Store& store, const RunPlan& plan) { return Batch(store, plan).run(); }

// ---------------------------------------------------------------------------
// Distillation
// ---------------------------------------------------------------------------

std::string DistillManifest::to_csv() const {
  std::string out = std::string(kDistillHeader) + "\n";
  for (const auto& r : rows) {
    out += csv::join({r.image_id, r.image_source, r.teacher_model_id, r.rating_word, std::to_string(r.rating_number)});
    out += '\n';
  }
  return out;
}

std::string DistillManifest::rejects_jsonl() const {
  std::string out;
  for (const auto& r : rejects) {
    json o = {{"image_id", r.image_id}, {"error_kind", r.error_kind}};
    o["raw_text_ref"] = r.raw_text_ref.empty() ? json(nullptr) : json(r.raw_text_ref);
    out += o.dump() + "\n";
  }
  return out;
}

namespace {

void write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw Error("io", "cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace

void DistillManifest::write(const std::string& path) const {
  write_text(path, to_csv());
  write_text(path + ".rejects.jsonl", rejects_jsonl());
  write_text(path + ".meta.json", meta.dump(2) + "\n");
}

DistillManifest export_distill_manifest(Store& store, std::shared_ptr<JudgeClient> teacher,
                                        const std::vector<PropertyRecord>& corpus, OutputFormat format,
                                        const std::string& image_root) {
  if (corpus.empty()) throw Error("distill", "cannot export a manifest for an empty corpus");
  if (!teacher) throw Error("distill", "teacher backend is not configured");
  RunPlan plan;
  plan.corpus = corpus;
  plan.backends = {teacher};
  plan.task = ConditionTask{format};
  plan.trials = 1;
  plan.image_root = image_root;
  const RunReport report = run_condition(store, plan);

  DistillManifest m;
  const std::string run_set = condition_run_set(format);
  const std::string& model_id = teacher->backend().model_id;
  for (const auto& p : corpus) {
    const auto item = store.run_item(run_set, p.image_id, model_id, 0);
    if (item && item->status == "ok") {
      JudgmentFilter f;
      f.run_set = run_set;
      f.image_id = p.image_id;
      f.model_id = model_id;
      f.run_index = 0;
      const auto js = store.query(f);
      if (js.size() != 1) throw StoreError("expected one condition judgment for " + p.image_id);
      const int rating = rating_for_option_index(js.front().option_index);
      m.rows.push_back({p.image_id, p.image_source, model_id, std::string(word_for_rating(rating)), rating});
    } else {
      m.rejects.push_back({p.image_id, item ? item->error_kind : "missing", item ? item->raw_response_ref : ""});
    }
  }
  json teacher_json = teacher->backend().to_json();
  teacher_json.erase("mock");
  m.meta = {{"teacher", teacher_json},
            {"format", std::string(to_string(format))},
            {"prompt_template", build_condition_prompt(format).template_id},
            {"run_set", run_set},
            {"run_id", report.run_id},
            {"corpus_size", corpus.size()},
            {"rows", m.rows.size()},
            {"rejects", m.rejects.size()},
            {"created_at", utc_timestamp_now()}};
  return m;
}

DistillManifest read_distill_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot read manifest " + path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError({"manifest is empty"});
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kDistillHeader) throw ValidationError({"manifest header must be " + std::string(kDistillHeader)});
  DistillManifest m;
  std::vector<std::string> bad;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = csv::split_record(line);
    if (f.size() != 5) {
      bad.push_back("line " + std::to_string(lineno) + ": expected 5 fields");
      continue;
    }
    DistillRow r{f[0], f[1], f[2], f[3], 0};
    try {
      r.rating_number = std::stoi(f[4]);
      if (rating_for_word(r.rating_word) != r.rating_number) {
        bad.push_back("line " + std::to_string(lineno) + ": rating_word and rating_number disagree");
        continue;
      }
    } catch (const std::exception& e) {
      bad.push_back("line " + std::to_string(lineno) + ": " + e.what());
      continue;
    }
    m.rows.push_back(std::move(r));
  }
  if (!bad.empty()) throw ValidationError(std::move(bad));
  return m;
}

// ---------------------------------------------------------------------------
// Student predictions
// ---------------------------------------------------------------------------

PredictionSet parse_predictions(const std::string& content, std::string model_id) {
  std::istringstream in(content);
  std::string line;
  PredictionSet out;
  out.model_id = std::move(model_id);
  std::vector<std::string> bad;
  if (!std::getline(in, line)) throw ValidationError({"prediction file is empty"});
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (csv::split_record(line) != std::vector<std::string>{"image_id", "prediction"}) {
    throw ValidationError({"prediction header must be image_id,prediction"});
  }
  std::map<std::string, std::size_t> seen;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = csv::split_record(line);
    const std::string where = "line " + std::to_string(lineno);
    if (f.size() != 2 || f[0].empty()) {
      bad.push_back(where + ": expected image_id,prediction");
      continue;
    }
    char* end = nullptr;
    const double v = std::strtod(f[1].c_str(), &end);
    if (f[1].empty() || end != f[1].c_str() + f[1].size()) {
      bad.push_back(where + ": prediction '" + f[1] + "' is not numeric");
      continue;
    }
    if (!std::isfinite(v)) {
      bad.push_back(where + ": prediction is not finite");
      continue;
    }
    if (const auto it = seen.find(f[0]); it != seen.end()) {
      bad.push_back(where + ": duplicate image_id " + f[0] + " (first on line " + std::to_string(it->second) + ")");
      continue;
    }
    seen[f[0]] = lineno;
    out.rows.emplace_back(f[0], v);
  }
  if (!bad.empty()) throw ValidationError(std::move(bad));
  return out;
}

PredictionSet import_predictions(const std::string& path, std::string model_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot read predictions " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_predictions(ss.str(), std::move(model_id));
}

json PredictionScore::to_json() const {
  return {{"srcc", srcc}, {"plcc", plcc}, {"mae", mae}, {"rmse", rmse}, {"n", n}, {"unmatched", unmatched}};
}

PredictionScore score_predictions(const PredictionSet& predictions, const std::map<std::string, double>& reference) {
  std::vector<double> xs, ys;
  PredictionScore s;
  for (const auto& [id, v] : predictions.rows) {
    const auto it = reference.find(id);
    if (it == reference.end()) {
      s.unmatched.push_back(id);
      continue;
    }
    xs.push_back(v);
    ys.push_back(it->second);
  }
  const agreement::MetricSeries series(xs, ys);
  s.n = xs.size();
  s.srcc = agreement::srcc(series);
  s.plcc = agreement::plcc(series);
  const auto e = agreement::mae_rmse(series);
  s.mae = e.mae;
  s.rmse = e.rmse;
  return s;
}

}  // namespace curb
