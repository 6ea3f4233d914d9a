// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

#include "curb/service.hpp"

#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "curb/agreement.hpp"
#include "curb/interface.hpp"
#include "curb/runner.hpp"

// After Eigen: the resolver header pulled in here defines `_res`.
#include <httplib.h>

namespace curb {

using nlohmann::json;

std::optional<BoundingBox> parse_bbox(const std::string& text) {
  double v[4];
  std::size_t pos = 0;
  for (int i = 0; i < 4; ++i) {
    const auto end = i < 3 ? text.find(',', pos) : text.size();
    if (end == std::string::npos) return std::nullopt;
    const std::string part = text.substr(pos, end - pos);
    char* stop = nullptr;
    v[i] = std::strtod(part.c_str(), &stop);
    if (part.empty() || stop != part.c_str() + part.size() || !std::isfinite(v[i])) return std::nullopt;
    pos = end + 1;
  }
  BoundingBox b{v[0], v[1], v[2], v[3]};
  if (b.min_lon < -180 || b.max_lon > 180 || b.min_lat < -90 || b.max_lat > 90) return std::nullopt;
  if (b.min_lon > b.max_lon || b.min_lat > b.max_lat) return std::nullopt;
  return b;
}

namespace {

struct Job {
  std::string id;
  std::string image_id;
  std::string model_id;
  int trials = kDefaultAttributeTrials;
  std::uint64_t seed = 0;
  std::string status = "queued";
  std::string created_at;
  std::string started_at;
  std::string finished_at;
  json report;
  json error;

  json to_json() const {
    json j = {{"id", id},         {"image_id", image_id},     {"model_id", model_id},
              {"trials", trials}, {"seed", seed},             {"status", status},
              {"created_at", created_at}};
    j["started_at"] = started_at.empty() ? json(nullptr) : json(started_at);
    j["finished_at"] = finished_at.empty() ? json(nullptr) : json(finished_at);
    j["report"] = report.is_null() ? json(nullptr) : report;
    j["error"] = error.is_null() ? json(nullptr) : error;
    return j;
  }
};

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

void send_error(httplib::Response& res, int status, const std::string& kind, const std::string& message) {
  send_json(res, status, {{"error", {{"kind", kind}, {"message", message}}}});
}

std::optional<std::string> query_param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  return req.get_param_value(name);
}

}  // namespace

struct Service::Impl {
  Store& store;
  AppConfig config;
  AttributeCatalog catalog;
  ClientFactory factory = [](const BackendConfig& b) { return make_client(b); };
  httplib::Server server;
  std::thread listener;

  mutable std::mutex mu;
  std::condition_variable cv;
  std::condition_variable idle_cv;
  std::map<std::string, Job> jobs;
  std::deque<std::string> queue;
  bool busy = false;
  bool stopping = false;
  std::uint64_t next_job = 1;
  std::map<std::string, std::shared_ptr<JudgeClient>> clients;
  std::thread worker;

  Impl(Store& s, AppConfig c, AttributeCatalog cat) : store(s), config(std::move(c)), catalog(std::move(cat)) {
    routes();
    worker = std::thread([this] { work(); });
  }

  ~Impl() {
    {
      std::lock_guard lock(mu);
      stopping = true;
    }
    cv.notify_all();
    if (worker.joinable()) worker.join();
  }

  std::shared_ptr<JudgeClient> client_for(const BackendConfig& b) {
    std::lock_guard lock(mu);
    auto& c = clients[b.model_id];
    if (!c) c = factory(b);
    return c;
  }

  void work() {
    for (;;) {
      std::string id;
      {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return stopping || !queue.empty(); });
        if (stopping) return;
        id = queue.front();
        queue.pop_front();
        busy = true;
        jobs[id].status = "running";
        jobs[id].started_at = utc_timestamp_now();
      }
      run_job(id);
      {
        std::lock_guard lock(mu);
        busy = false;
      }
      idle_cv.notify_all();
    }
  }

  void run_job(const std::string& id) {
    Job snapshot;
    {
      std::lock_guard lock(mu);
      snapshot = jobs[id];
    }
    json report;
    json error;
    try {
      const auto property = store.property(snapshot.image_id);
      if (!property) throw Error("not_found", "property disappeared: " + snapshot.image_id);
      RunPlan plan;
      plan.corpus = {*property};
      plan.backends = {client_for(config.backend(snapshot.model_id))};
      plan.task = AttributeQaTask{};
      plan.trials = snapshot.trials;
      plan.base_seed = snapshot.seed;
      plan.image_root = config.image_root;
      plan.catalog = &catalog;
      const RunReport r = run_attribute_qa(store, plan);
      report = r.to_json();
      if (!r.ok()) {
        error = {{"kind", "run.partial"},
                 {"message", std::to_string(r.failed) + " of " + std::to_string(r.planned) + " runs failed"}};
      }
    } catch (const Error& e) {
      error = {{"kind", e.kind()}, {"message", e.what()}};
    } catch (const std::exception& e) {
      error = {{"kind", "internal"}, {"message", e.what()}};
    }
    std::lock_guard lock(mu);
    Job& j = jobs[id];
    j.report = report;
    j.error = error;
    j.finished_at = utc_timestamp_now();
    j.status = error.is_null() ? "done" : "failed";
  }

  void routes() {
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const Error& e) {
        send_error(res, 500, e.kind(), e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
      } catch (...) {
        send_error(res, 500, "internal", "unknown failure");
      }
    });

    server.Get("/api/properties", [this](const httplib::Request& req, httplib::Response& res) {
      PropertyFilter f;
      f.city = query_param(req, "city");
      if (const auto bbox = query_param(req, "bbox")) {
        f.bbox = parse_bbox(*bbox);
        if (!f.bbox) {
          return send_error(res, 400, "bad_request",
                            "bbox must be minLon,minLat,maxLon,maxLat with valid, ordered coordinates");
        }
      }
      json list = json::array();
      for (const auto& p : store.properties(f)) list.push_back(property_to_json(p));
      send_json(res, 200, {{"count", list.size()}, {"properties", list}});
    });

    server.Get(R"(/api/properties/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      const auto p = store.property(id);
      if (!p) return send_error(res, 404, "not_found", "unknown property " + id);
      json body = property_to_json(*p);
      const auto ratings = store.human_ratings(id);
      body["human_ratings"] = ratings.size();
      body["mos"] = ratings.empty() ? json(nullptr) : json(agreement::mos(std::span<const HumanRating>(ratings)));
      send_json(res, 200, body);
    });

    server.Get(R"(/api/properties/([^/]+)/assessment)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      if (!store.property(id)) return send_error(res, 404, "not_found", "unknown property " + id);
      const auto s = build_assessment_summary(store, id, catalog, query_param(req, "model"));
      if (!s) return send_error(res, 404, "not_found", "no assessment stored for " + id);
      send_json(res, 200, s->to_json());
    });

    server.Get(R"(/api/properties/([^/]+)/report)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      const auto p = store.property(id);
      if (!p) return send_error(res, 404, "not_found", "unknown property " + id);
      const auto s = build_assessment_summary(store, id, catalog, query_param(req, "model"));
      if (!s) return send_error(res, 404, "not_found", "no assessment stored for " + id);
      try {
        const NarrativeReport r = render_report(*s, *p, catalog);
        res.status = 200;
        res.set_header("Content-Disposition", "attachment; filename=\"" + r.filename() + "\"");
        res.set_content(r.text, "text/markdown; charset=utf-8");
      } catch (const Error& e) {
        send_error(res, 409, e.kind(), e.what());
      }
    });

    server.Get(R"(/api/cities/([^/]+)/summary)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string city = req.matches[1];
      const CitySummary s = build_city_summary(store, city, catalog, query_param(req, "model"));
      if (s.property_count == 0) return send_error(res, 404, "not_found", "no properties in city " + city);
      send_json(res, 200, s.to_json(catalog));
    });

    server.Post(R"(/api/properties/([^/]+)/assess)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      if (!store.property(id)) return send_error(res, 404, "not_found", "unknown property " + id);
      json body;
      try {
        body = req.body.empty() ? json::object() : json::parse(req.body);
      } catch (const json::parse_error&) {
        return send_error(res, 400, "bad_request", "request body must be JSON");
      }
      if (!body.is_object() || !body.contains("model_id") || !body["model_id"].is_string()) {
        return send_error(res, 400, "bad_request", "body needs a string model_id");
      }
      Job job;
      job.image_id = id;
      job.model_id = body["model_id"].get<std::string>();
      if (body.contains("trials")) {
        if (!body["trials"].is_number_integer() || body["trials"].get<int>() < 1) {
          return send_error(res, 400, "bad_request", "trials must be an integer >= 1");
        }
        job.trials = body["trials"].get<int>();
      }
      if (body.contains("seed")) {
        if (!body["seed"].is_number_unsigned()) return send_error(res, 400, "bad_request", "seed must be >= 0");
        job.seed = body["seed"].get<std::uint64_t>();
      }
      if (!config.find_backend(job.model_id)) {
        return send_error(res, 409, "backend_unconfigured", "no backend configured for model " + job.model_id);
      }
      {
        std::lock_guard lock(mu);
        char buf[32];
        std::snprintf(buf, sizeof buf, "job-%06llu", static_cast<unsigned long long>(next_job++));
        job.id = buf;
        job.created_at = utc_timestamp_now();
        jobs[job.id] = job;
        queue.push_back(job.id);
      }
      cv.notify_all();
      send_json(res, 202, {{"job_id", job.id}, {"status", "queued"}});
    });

    server.Get(R"(/api/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      std::lock_guard lock(mu);
      const auto it = jobs.find(id);
      if (it == jobs.end()) return send_error(res, 404, "not_found", "unknown job " + id);
      send_json(res, 200, it->second.to_json());
    });

    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.status == 404 && res.body.empty()) send_error(res, 404, "not_found", "no such endpoint");
    });
  }
};

Service::Service(Store& store, AppConfig config, AttributeCatalog catalog)
    : impl_(std::make_unique<Impl>(store, std::move(config), std::move(catalog))) {}

Service::~Service() { stop(); }

void Service::set_client_factory(ClientFactory factory) {
  std::lock_guard lock(impl_->mu);
  impl_->factory = std::move(factory);
  impl_->clients.clear();
}

int Service::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error("service", "cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void Service::listen() { impl_->server.listen_after_bind(); }

int Service::start(const std::string& host, int port) {
  const int bound = bind(host, port);
  impl_->listener = std::thread([this] { listen(); });
  impl_->server.wait_until_ready();
  return bound;
}

void Service::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->listener.joinable()) impl_->listener.join();
}

void Service::wait_for_jobs() {
  std::unique_lock lock(impl_->mu);
  impl_->idle_cv.wait(lock, [&] { return impl_->queue.empty() && !impl_->busy; });
}

std::optional<json> Service::job(const std::string& id) const {
  std::lock_guard lock(impl_->mu);
  const auto it = impl_->jobs.find(id);
  if (it == impl_->jobs.end()) return std::nullopt;
  return it->second.to_json();
}

}  // namespace curb
