// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "curb/assets.hpp"
#include "curb/interface.hpp"
#include "curb/runner.hpp"
#include "curb/text_template.hpp"
#include "support.hpp"

using namespace curb;
using curb::testing::ScratchDir;

namespace {

Judgment vote(const std::string& image, const std::string& model, int run, const std::string& attr, int option,
              const std::string& ts = "2026-03-01T00:00:00Z") {
  return {image, model, std::string(kAttributeQaRunSet), run, attr, option, "ref", 0, ts};
}

// Five trials where attribute k's vote in trial t is (t < 3 ? 1 : k % 2): a 3-2 split for odd k.
std::vector<Judgment> five_trials(const std::string& image, const std::string& model) {
  std::vector<Judgment> out;
  const auto& c = default_catalog();
  for (int t = 0; t < 5; ++t) {
    for (std::size_t k = 0; k < c.size(); ++k) {
      out.push_back(vote(image, model, t, c.attributes()[k].id, t < 3 ? 1 : static_cast<int>(k % 2)));
    }
  }
  return out;
}

PropertyRecord property(const std::string& id) {
  return {id, "images/" + id + ".png", std::string("12 Oak Ave"), 40.0, -75.0, std::string("Trenton"),
          std::string("NJ")};
}

}  // namespace

TEST_SUITE("interface") {

TEST_CASE("summary majority votes and tallies") {
  const auto s = summarize_judgments(five_trials("p", "m"), default_catalog());
  CHECK(s.trials == 5);
  CHECK(s.attributes.size() == 12);
  CHECK(s.missing(default_catalog()).empty());
  for (std::size_t k = 0; k < s.attributes.size(); ++k) {
    const auto& a = s.attributes[k];
    CHECK(a.option_index == 1);
    CHECK(a.votes == 5);
    int sum = 0;
    for (int v : a.vote_tally) sum += v;
    CHECK(sum == 5);
    CHECK(a.modal_count == (k % 2 ? 5 : 3));
    CHECK(a.agreement == doctest::Approx(a.modal_count / 5.0));
  }
  CHECK(s.condition_rating == 4);
  CHECK(s.to_json()["condition"]["word"] == "Good");

  auto mixed = five_trials("p", "m");
  mixed.push_back(vote("q", "m", 0, "safety", 0));
  CHECK_THROWS_AS(summarize_judgments(mixed, default_catalog()), Error);
}

TEST_CASE("store-backed summary picks the latest model and skips experts") {
  ScratchDir dir("sum");
  Store store(dir.file("s.db"));
  testing::make_corpus(dir, 1);
  store.ingest_properties(dir.file("corpus.jsonl"));
  const auto ref = store.blobs().put("x");
  auto commit = [&](const std::string& model, int option, const std::string& ts) {
    RunItem it{std::string(kAttributeQaRunSet), "prop-000", model, 0, "ok", "", "", ref, 0, 0, 1, false, ts};
    std::vector<Judgment> js;
    for (const auto& a : default_catalog().attributes()) {
      auto j = vote("prop-000", model, 0, a.id, option, ts);
      j.raw_response_ref = ref;
      js.push_back(j);
    }
    store.commit_success(it, js);
  };
  commit("old-model", 0, "2026-01-01T00:00:00Z");
  commit("new-model", 2, "2026-02-01T00:00:00Z");
  commit("expert:ann", 2, "2026-03-01T00:00:00Z");
  const auto s = build_assessment_summary(store, "prop-000", default_catalog());
  REQUIRE(s);
  CHECK(s->model_id == "new-model");
  CHECK(build_assessment_summary(store, "prop-000", default_catalog(), std::string("old-model"))->model_id ==
        "old-model");
  CHECK(build_assessment_summary(store, "prop-000", default_catalog(), std::string("expert:ann"))->attributes.size() ==
        12);
  CHECK_FALSE(build_assessment_summary(store, "nope", default_catalog()).has_value());
}

TEST_CASE("report is deterministic, complete, and uses the scale criteria") {
  const auto s = summarize_judgments(five_trials("p", "m"), default_catalog());
  const auto a = render_report(s, property("p"), default_catalog());
  const auto b = render_report(s, property("p"), default_catalog());
  CHECK(a.text == b.text);
  CHECK(a.filename() == "report-p.md");
  CHECK(a.text.find("Structurally sound with good maintenance") != std::string::npos);
  CHECK(a.text.find("Rated 4 (Good)") != std::string::npos);
  CHECK(a.text.find("3 of 5 runs") != std::string::npos);
  CHECK(a.text.find("12 Oak Ave") != std::string::npos);
  CHECK(a.text.find("{{") == std::string::npos);
  for (const auto& attr : default_catalog().attributes()) {
    CHECK(a.text.find("**" + attr.display_name + "**: " + attr.options[1].label) != std::string::npos);
  }
  auto bare = property("p");
  bare.address.reset();
  bare.latitude.reset();
  CHECK(render_report(s, bare, default_catalog()).text.find("not recorded") != std::string::npos);
}

TEST_CASE("report refuses incomplete summaries") {
  auto js = five_trials("p", "m");
  js.erase(std::remove_if(js.begin(), js.end(), [](const Judgment& j) { return j.attribute_id == "safety"; }),
           js.end());
  const auto s = summarize_judgments(js, default_catalog());
  CHECK(s.missing(default_catalog()) == std::vector<std::string>{"safety"});
  try {
    render_report(s, property("p"), default_catalog());
    FAIL("expected incomplete report");
  } catch (const Error& e) {
    CHECK(e.kind() == "report.incomplete");
  }
}

TEST_CASE("report fields cover every template placeholder") {
  const auto s = summarize_judgments(five_trials("p", "m"), default_catalog());
  const auto f = report_fields(s, property("p"), default_catalog());
  for (const auto& name : template_placeholders(assets::get(kReportTemplate))) {
    CHECK_MESSAGE((f.document.count(name) || name == "attribute_lines"), name);
  }
  REQUIRE(f.attribute_lines.size() == 12);
  for (const auto& name : template_placeholders(assets::get(kReportAttributeTemplate))) {
    CHECK_MESSAGE(f.attribute_lines[0].count(name), name);
  }
}

TEST_CASE("city summary conserves property counts") {
  ScratchDir dir("city");
  Store store(dir.file("s.db"));
  testing::make_corpus(dir, 7, "a.jsonl", "Springfield");
  store.ingest_properties(dir.file("a.jsonl"));
  const auto ref = store.blobs().put("x");
  // prop-00i gets house condition option i % 5 (rating 5 - i % 5); prop-005 and prop-006 stay unassessed.
  for (int i = 0; i < 5; ++i) {
    const std::string id = "prop-00" + std::to_string(i);
    RunItem it{std::string(kAttributeQaRunSet), id, "m", 0, "ok", "", "", ref, 0, 0, 1, false, "t"};
    std::vector<Judgment> js;
    for (const auto& a : default_catalog().attributes()) {
      auto j = vote(id, "m", 0, a.id, a.id == "house_condition" ? i : 0);
      j.raw_response_ref = ref;
      js.push_back(j);
    }
    store.commit_success(it, js);
  }
  const auto s = build_city_summary(store, "Springfield", default_catalog());
  CHECK(s.property_count == 7);
  CHECK(s.unassessed == 2);
  CHECK(s.condition_histogram == std::vector<std::size_t>{1, 1, 1, 1, 1});
  std::size_t total = s.unassessed;
  for (auto c : s.condition_histogram) total += c;
  CHECK(total == s.property_count);
  REQUIRE(s.attribute_distributions.size() == 12);
  for (const auto& h : s.attribute_distributions) {
    std::size_t n = 0;
    for (auto c : h.counts) n += c;
    CHECK(n == 5);
  }
  const auto j = s.to_json(default_catalog());
  CHECK(j["condition_histogram"][3]["word"] == "Good");
  CHECK(build_city_summary(store, "Nowhere", default_catalog()).property_count == 0);
}

}  // TEST_SUITE
