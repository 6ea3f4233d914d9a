// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <thread>

#include "curb/service.hpp"
#include "support.hpp"

#include <httplib.h>

using namespace curb;
using curb::testing::ScratchDir;
using nlohmann::json;

namespace {

std::string qa_answer() {
  std::map<std::string, int> labels;
  for (const auto& a : default_catalog().attributes()) labels[a.id] = 1;
  return testing::attribute_response(default_catalog(), default_catalog().ids(), labels);
}

struct Fixture {
  ScratchDir dir{"svc"};
  Store store{dir.file("s.db")};
  std::unique_ptr<Service> service;
  std::unique_ptr<httplib::Client> http;

  Fixture() {
    testing::make_corpus(dir, 3);
    store.ingest_properties(dir.file("corpus.jsonl"));
    testing::write_file(dir.file("r.csv"), "image_id,rater_id,rating\nprop-000,a,4\nprop-000,b,3\n");
    store.ingest_human_ratings(dir.file("r.csv"));
    AppConfig cfg;
    auto b = testing::mock_backend("mock-judge");
    b.mock = {{"fallback", qa_answer()}};
    cfg.backends.push_back(b);
    cfg.image_root = dir.path().string();
    service = std::make_unique<Service>(store, cfg, default_catalog());
    const int port = service->start();
    http = std::make_unique<httplib::Client>("127.0.0.1", port);
  }
  ~Fixture() { service->stop(); }

  json get(const std::string& path, int expect = 200) {
    auto res = http->Get(path);
    REQUIRE(res);
    CHECK(res->status == expect);
    return json::parse(res->body);
  }

  std::string assess(const std::string& id, int trials) {
    auto res = http->Post("/api/properties/" + id + "/assess",
                          json({{"model_id", "mock-judge"}, {"trials", trials}, {"seed", 3}}).dump(), "application/json");
    REQUIRE(res);
    REQUIRE(res->status == 202);
    const auto body = json::parse(res->body);
    CHECK(body["status"] == "queued");
    return body["job_id"];
  }
};

}  // namespace

TEST_SUITE("service") {

TEST_CASE("bbox parsing") {
  CHECK(parse_bbox("-90,39,-89,40").has_value());
  CHECK_FALSE(parse_bbox("-90,39,-89").has_value());
  CHECK_FALSE(parse_bbox("-89,39,-90,40").has_value());
  CHECK_FALSE(parse_bbox("a,b,c,d").has_value());
  CHECK_FALSE(parse_bbox("-190,39,-89,40").has_value());
}

TEST_CASE("property listing and detail") {
  Fixture f;
  CHECK(f.get("/api/properties")["count"] == 3);
  CHECK(f.get("/api/properties?city=Springfield")["count"] == 3);
  CHECK(f.get("/api/properties?city=Elsewhere")["count"] == 0);
  CHECK(f.get("/api/properties?bbox=-89.6505,39.7795,-89.6495,39.7805")["count"] == 1);
  CHECK(f.get("/api/properties?bbox=1,2,3", 400)["error"]["kind"] == "bad_request");
  const auto p = f.get("/api/properties/prop-000");
  CHECK(p["image_id"] == "prop-000");
  CHECK(p["human_ratings"] == 2);
  CHECK(p["mos"] == 3.5);
  CHECK(f.get("/api/properties/ghost", 404)["error"]["kind"] == "not_found");
  CHECK(f.get("/api/nothing/here", 404)["error"]["kind"] == "not_found");
}

TEST_CASE("assessment job round trip") {
  Fixture f;
  CHECK(f.get("/api/properties/prop-001/assessment", 404)["error"]["kind"] == "not_found");
  const auto job = f.assess("prop-001", 5);
  f.service->wait_for_jobs();
  const auto status = f.get("/api/jobs/" + job);
  CHECK(status["status"] == "done");
  CHECK(status["report"]["succeeded"] == 5);

  const auto a = f.get("/api/properties/prop-001/assessment");
  CHECK(a["trials"] == 5);
  REQUIRE(a["attributes"].size() == 12);
  for (const auto& attr : a["attributes"]) {
    int sum = 0;
    for (const auto& v : attr["vote_tally"]) sum += v.get<int>();
    CHECK(sum == 5);
  }
  CHECK(a["condition"]["number"] == 4);

  auto res = f.http->Get("/api/properties/prop-001/report");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->get_header_value("Content-Type").rfind("text/markdown", 0) == 0);
  CHECK(res->get_header_value("Content-Disposition") == "attachment; filename=\"report-prop-001.md\"");
  CHECK(res->body.find("Structurally sound with good maintenance") != std::string::npos);
  auto again = f.http->Get("/api/properties/prop-001/report");
  CHECK(again->body == res->body);

  const auto city = f.get("/api/cities/Springfield/summary");
  CHECK(city["property_count"] == 3);
  CHECK(city["unassessed"] == 2);
  CHECK(city["condition_histogram"][3]["count"] == 1);
  CHECK(f.get("/api/cities/Atlantis/summary", 404)["error"]["kind"] == "not_found");
}

TEST_CASE("assess request validation") {
  Fixture f;
  auto post = [&](const std::string& id, const std::string& body) {
    auto res = f.http->Post("/api/properties/" + id + "/assess", body, "application/json");
    REQUIRE(res);
    return std::make_pair(res->status, json::parse(res->body));
  };
  CHECK(post("prop-000", "{oops").first == 400);
  CHECK(post("prop-000", R"({"trials":5})").first == 400);
  CHECK(post("prop-000", R"({"model_id":"mock-judge","trials":0})").first == 400);
  CHECK(post("prop-000", R"({"model_id":"mock-judge","seed":-1})").first == 400);
  const auto [status, body] = post("prop-000", R"({"model_id":"unknown-vlm"})");
  CHECK(status == 409);
  CHECK(body["error"]["kind"] == "backend_unconfigured");
  CHECK(post("ghost", R"({"model_id":"mock-judge"})").first == 404);
  CHECK(f.get("/api/jobs/job-999999", 404)["error"]["kind"] == "not_found");
}

TEST_CASE("report conflicts on an incomplete assessment") {
  Fixture f;
  const auto ref = f.store.blobs().put("partial");
  RunItem it{std::string(kAttributeQaRunSet), "prop-002", "mock-judge", 0, "ok", "", "", ref, 0, 0, 1, false, "t"};
  f.store.commit_success(it, {{"prop-002", "mock-judge", std::string(kAttributeQaRunSet), 0, "safety", 0, ref, 0, "t"}});
  CHECK(f.get("/api/properties/prop-002/report", 409)["error"]["kind"] == "report.incomplete");
}

TEST_CASE("failed trials mark the job failed") {
  Fixture f;
  f.service->set_client_factory([](const BackendConfig& b) {
    return std::make_shared<JudgeClient>(b, MockJudge::function([](const JudgeRequest& r) {
      return MockReply{r.run_nonce == 2 ? std::string("no idea") : qa_answer()};
    }));
  });
  const auto job = f.assess("prop-000", 4);
  f.service->wait_for_jobs();
  const auto status = f.get("/api/jobs/" + job);
  CHECK(status["status"] == "failed");
  CHECK(status["error"]["kind"] == "run.partial");
  CHECK(status["report"]["failed"] == 1);
  CHECK(f.get("/api/properties/prop-000/assessment")["trials"] == 3);
}

}  // TEST_SUITE
