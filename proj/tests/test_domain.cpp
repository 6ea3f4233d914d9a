// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <set>

#include "curb/assets.hpp"
#include "curb/csv.hpp"
#include "curb/digest.hpp"
#include "curb/domain.hpp"
#include "curb/promptkit.hpp"
#include "curb/rating_matrix.hpp"
#include "curb/text_template.hpp"

using namespace curb;

TEST_SUITE("domain") {

TEST_CASE("condition scale words and numbers") {
  CHECK(word_for_rating(5) == "Excellent");
  CHECK(word_for_rating(4) == "Good");
  CHECK(word_for_rating(1) == "Uninhabitable");
  CHECK(rating_for_word("  good ") == 4);
  CHECK(rating_for_word("ADEQUATE") == 3);
  CHECK_THROWS_AS(rating_for_word("fine"), DomainError);
  CHECK_THROWS_AS(word_for_rating(0), DomainError);
  CHECK(ConditionScale::level(4).criteria.find("Structurally sound with good maintenance") != std::string_view::npos);
  for (int n = 1; n <= 5; ++n) {
    CHECK(rating_for_option_index(option_index_for_rating(n)) == n);
    CHECK(default_catalog().at("house_condition").options[option_index_for_rating(n)].label == word_for_rating(n));
  }
}

TEST_CASE("default catalog shape") {
  const auto& c = default_catalog();
  CHECK(c.size() == 12);
  std::size_t options = 0;
  for (const auto& a : c.attributes()) {
    options += a.options.size();
    CHECK(a.options.size() >= 2);
    CHECK_FALSE(a.question_text.empty());
  }
  CHECK(options == 52);
  CHECK(c.at("geographic_region").scale_type == ScaleType::kNominal);
  CHECK(c.at("architectural_era").scale_type == ScaleType::kOrdinal);
  CHECK(c.at("safety").options.size() == 3);
  CHECK(c.at("house_condition").options[1].definition.find("Structurally sound with good maintenance") !=
        std::string::npos);
  CHECK(load_attribute_catalog(c.to_json()).ids() == c.ids());
}

TEST_CASE("catalog validation collects every violation") {
  const std::string doc = R"({"version":"x","attributes":[
    {"id":"a","display_name":"A","question_text":"A","scale_type":"ordinal",
     "options":[{"label":"One","definition":""},{"label":"one","definition":""}]},
    {"id":"a","display_name":"A2","question_text":"A2","scale_type":"ranked",
     "options":[{"label":"Solo","definition":""}]}]})";
  try {
    load_attribute_catalog(doc);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(e.violations().size() >= 4);
  }
  CHECK_THROWS_AS(load_attribute_catalog("{not json"), ValidationError);
}

TEST_CASE("property record ranges") {
  PropertyRecord p{"id", "img.png", std::nullopt, 123.0, 0.0, std::nullopt, std::nullopt};
  CHECK(p.violations().size() == 1);
  p.latitude = 45.0;
  p.longitude = -181.0;
  CHECK(p.violations().size() == 1);
  p.longitude = 10.0;
  CHECK(p.violations().empty());
  p.image_id.clear();
  CHECK_FALSE(p.violations().empty());
}

TEST_CASE("rating matrix missing cells") {
  RatingMatrix m({"u0", "u1"}, {"r0", "r1", "r2"});
  CHECK(m.missing_count() == 6);
  m.set(0, 0, 1);
  m.set(0, 1, 2);
  m.set(0, 2, 3);
  m.set(1, 1, 4);
  CHECK(m.complete_rows().rows() == 1);
  CHECK_THROWS_AS(m.set(1, 1, std::nan("")), DomainError);
}

TEST_CASE("templates render and report missing values") {
  CHECK(render_template("a {{x}} b {{y}}", {{"x", "1"}, {"y", "2"}}) == "a 1 b 2");
  CHECK_THROWS_AS(render_template("a {{x}}", {}), Error);
  CHECK_THROWS_AS(render_template("a {{x", {{"x", "1"}}), Error);
  CHECK(template_placeholders("{{a}} {{b}} {{a}}") == std::vector<std::string>{"a", "b"});
}

TEST_CASE("digests") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_fields({"ab", "c"}) != sha256_fields({"a", "bc"}));
  CHECK(stable_hash64({"x", "y"}) == stable_hash64({"x", "y"}));
  CHECK(base64_encode("hello") == "aGVsbG8=");
}

TEST_CASE("csv records") {
  CHECK(csv::split_record("a,\"b,c\",\"d\"\"e\"") == std::vector<std::string>{"a", "b,c", "d\"e"});
  CHECK(csv::escape("x,y") == "\"x,y\"");
  CHECK(csv::join({"a", "b\"c"}) == "a,\"b\"\"c\"");
  CHECK(csv::split_record(csv::join({"1950–1980", "q\"", ""})) == std::vector<std::string>{"1950–1980", "q\"", ""});
}

TEST_CASE("embedded assets") {
  const auto names = assets::names();
  CHECK(std::find(names.begin(), names.end(), "templates/report_v1.md") != names.end());
  CHECK_THROWS_AS(assets::get("nope"), Error);
}

}  // TEST_SUITE

TEST_SUITE("promptkit") {

TEST_CASE("output format spellings round-trip") {
  for (auto f : kAllOutputFormats) CHECK(parse_output_format(to_string(f)) == f);
  CHECK_THROWS_AS(parse_output_format("details"), PromptError);
}

TEST_CASE("condition prompt carries the holistic instruction and all criteria") {
  for (auto f : kAllOutputFormats) {
    const auto p = build_condition_prompt(f);
    CHECK(p.text.find("Evaluate the entire building holistically") != std::string::npos);
    for (const auto& l : ConditionScale::levels()) CHECK(p.text.find(std::string(l.criteria)) != std::string::npos);
    CHECK(p.text.find("{{") == std::string::npos);
    CHECK((p.text.find("Paint:") != std::string::npos) == has_details(f));
  }
  CHECK(build_condition_prompt(OutputFormat::kSingleNumber).text.find("single number") != std::string::npos);
}

TEST_CASE("attribute prompt definitions and output lines follow the order") {
  const auto& c = default_catalog();
  const auto order = shuffle_attributes(c, 42);
  const auto p = build_attribute_prompt(c, order);
  std::size_t lines = 0;
  for (const auto& a : c.attributes()) {
    for (const auto& o : a.options) {
      const std::string line = "- " + o.label + (o.definition.empty() ? "" : ": " + o.definition) + "\n";
      CHECK(p.text.find(line) != std::string::npos);
      ++lines;
    }
  }
  CHECK(lines == 52);
  std::size_t last = 0;
  const std::size_t block_start = p.text.find("Required output format.");
  for (const auto& id : order) {
    const auto pos = p.text.find("- " + c.at(id).display_name + ": <label>", block_start);
    REQUIRE(pos != std::string::npos);
    CHECK(pos > last);
    last = pos;
  }
  CHECK(p.text.find("most conservative plausible label") != std::string::npos);
  CHECK(p.text.find("Use the attribute definitions exactly as provided.") != std::string::npos);
  auto bad = order;
  bad.pop_back();
  CHECK_THROWS_AS(build_attribute_prompt(c, bad), PromptError);
}

TEST_CASE("shuffle is a seeded permutation") {
  const auto& c = default_catalog();
  const auto a = shuffle_attributes(c, 7);
  CHECK(a == shuffle_attributes(c, 7));
  CHECK(std::set<std::string>(a.begin(), a.end()).size() == 12);
  CHECK(a != shuffle_attributes(c, 8));
  // Frozen outputs of the mt19937_64 Fisher-Yates shuffle.
  const std::vector<std::string> seed7{"geographic_region", "house_condition",   "safety",
                                       "accessibility",     "health_risks",      "energy_efficiency",
                                       "architectural_era", "structural_exterior_condition",
                                       "retrofit_costs",    "social_environment", "environmental_setting",
                                       "walkability"};
  const std::vector<std::string> seed8{"environmental_setting", "house_condition",   "accessibility",
                                       "health_risks",          "social_environment", "safety",
                                       "retrofit_costs",        "structural_exterior_condition",
                                       "energy_efficiency",     "geographic_region", "walkability",
                                       "architectural_era"};
  CHECK(a == seed7);
  CHECK(shuffle_attributes(c, 8) == seed8);
}

}  // TEST_SUITE
