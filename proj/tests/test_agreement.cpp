// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "curb/agreement.hpp"
#include "oracles.hpp"

using namespace curb;
using namespace curb::agreement;

namespace {

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

oracle::Grid grid_of(const RatingMatrix& m) {
  oracle::Grid g(static_cast<std::size_t>(m.units()), std::vector<std::optional<double>>(m.raters()));
  for (Eigen::Index u = 0; u < m.units(); ++u) {
    for (Eigen::Index r = 0; r < m.raters(); ++r) {
      if (m.present(u, r)) g[u][r] = m.cells()(u, r);
    }
  }
  return g;
}

AttributeSpec spec(int options, ScaleType t = ScaleType::kOrdinal) {
  AttributeSpec a;
  a.id = "a";
  a.display_name = "A";
  a.scale_type = t;
  for (int i = 0; i < options; ++i) a.options.push_back({"opt" + std::to_string(i), ""});
  return a;
}

}  // namespace

TEST_SUITE("agreement") {

TEST_CASE("average ranks match brute force, including ties") {
  Eigen::VectorXd v(7);
  v << 3, 1, 4, 1, 5, 9, 4;
  CHECK(to_vec(average_ranks(v)) == oracle::ranks(to_vec(v)));
  const auto r = average_ranks(v);
  CHECK(r(1) == doctest::Approx(1.5));
  CHECK(r(6) == doctest::Approx(4.5));
}

TEST_CASE("srcc and plcc known values") {
  Eigen::VectorXd x(5), y(5);
  x << 1, 2, 3, 4, 5;
  y << 2, 4, 6, 8, 11;
  CHECK(srcc(x, x) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(srcc(x, Eigen::VectorXd(-x)) == doctest::Approx(-1.0).epsilon(1e-12));
  const Eigen::VectorXd affine = (3.0 * y.array() + 7.0).matrix();
  CHECK(std::abs(plcc(x, y) - plcc(x, affine)) < 1e-12);
}

TEST_CASE("correlation preconditions") {
  Eigen::VectorXd one(1), c(3), x(3), y(2);
  one << 1;
  c << 2, 2, 2;
  x << 1, 2, 3;
  y << 1, 2;
  CHECK_THROWS_AS(plcc(one, one), MetricError);
  CHECK_THROWS_AS(plcc(c, x), MetricError);
  CHECK_THROWS_AS(srcc(x, y), MetricError);
}

TEST_CASE("mae and rmse") {
  const MetricSeries s(std::vector<double>{1, 2, 3, 4}, std::vector<double>{2, 2, 5, 4});
  const auto e = mae_rmse(s);
  CHECK(e.mae == doctest::Approx(0.75));
  CHECK(e.rmse == doctest::Approx(std::sqrt(5.0 / 4.0)));
}

TEST_CASE("random paired metrics agree with brute force") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 49);
    std::vector<double> x(n), y(n);
    std::uniform_int_distribution<int> d(1, 5);
    std::normal_distribution<double> noise(0, 1);
    for (int i = 0; i < n; ++i) {
      x[i] = trial % 2 ? d(rng) : noise(rng);
      y[i] = trial % 3 ? x[i] + noise(rng) : d(rng);
    }
    const MetricSeries s(x, y);
    bool constant_y = std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
    bool constant_x = std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; });
    if (constant_x || constant_y) {
      CHECK_THROWS_AS(plcc(s), MetricError);
      continue;
    }
    CHECK(std::abs(plcc(s) - oracle::pearson(x, y)) < 1e-9);
    CHECK(std::abs(srcc(s) - oracle::spearman(x, y)) < 1e-9);
    CHECK(std::abs(mae_rmse(s).mae - oracle::mae(x, y)) < 1e-9);
    CHECK(std::abs(mae_rmse(s).rmse - oracle::rmse(x, y)) < 1e-9);
  }
}

TEST_CASE("krippendorff alpha known values") {
  Eigen::MatrixXd perfect(3, 2);
  perfect << 1, 1, 2, 2, 3, 3;
  CHECK(krippendorff_alpha(RatingMatrix(perfect)) == doctest::Approx(1.0).epsilon(1e-12));
  Eigen::MatrixXd disagree(2, 2);
  disagree << 1, 2, 2, 1;
  CHECK(std::abs(krippendorff_alpha(RatingMatrix(disagree)) - (-0.5)) < 1e-12);
}

TEST_CASE("krippendorff alpha preconditions") {
  Eigen::MatrixXd one_rater(3, 1);
  one_rater << 1, 2, 3;
  CHECK_THROWS_AS(krippendorff_alpha(RatingMatrix(one_rater)), MetricError);
  Eigen::MatrixXd same(3, 2);
  same << 2, 2, 2, 2, 2, 2;
  CHECK_THROWS_AS(krippendorff_alpha(RatingMatrix(same)), MetricError);
  RatingMatrix sparse({"u0", "u1", "u2"}, {"r0", "r1"});
  sparse.set(0, 0, 1);
  sparse.set(0, 1, 2);
  sparse.set(1, 0, 1);
  CHECK_THROWS_AS(krippendorff_alpha(sparse), MetricError);
}

TEST_CASE("units with a single rating do not change alpha") {
  Eigen::MatrixXd base(3, 2);
  base << 1, 1, 2, 3, 3, 3;
  RatingMatrix a(base);
  RatingMatrix b({"u0", "u1", "u2", "u3"}, {"r0", "r1"});
  for (int u = 0; u < 3; ++u) {
    for (int r = 0; r < 2; ++r) b.set(u, r, base(u, r));
  }
  b.set(3, 0, 5);
  CHECK(krippendorff_alpha(a) == doctest::Approx(krippendorff_alpha(b)).epsilon(1e-12));
}

TEST_CASE("icc(2,1) known value and degenerate input") {
  Eigen::MatrixXd m(3, 2);
  m << 1, 2, 3, 4, 5, 6;
  CHECK(std::abs(icc_2_1(RatingMatrix(m)) - 8.0 / 9.0) < 1e-12);
  Eigen::MatrixXd flat(3, 2);
  flat << 1, 2, 1, 2, 1, 2;
  CHECK_THROWS_AS(icc_2_1(RatingMatrix(flat)), MetricError);
}

TEST_CASE("icc uses listwise deletion") {
  RatingMatrix m({"u0", "u1", "u2", "u3"}, {"r0", "r1"});
  const double v[4][2] = {{1, 2}, {3, 4}, {5, 6}, {2, 0}};
  for (int u = 0; u < 4; ++u) {
    for (int r = 0; r < 2; ++r) m.set(u, r, v[u][r]);
  }
  m.clear(3, 1);
  CHECK(icc_2_1(m) == doctest::Approx(8.0 / 9.0).epsilon(1e-12));
}

TEST_CASE("reliability statistics agree with brute force on random panels") {
  std::mt19937_64 rng(5);
  int checked = 0, icc_checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 49);
    const int k = 2 + static_cast<int>(rng() % 5);
    RatingMatrix m(Eigen::MatrixXd::Zero(n, k));
    std::uniform_int_distribution<int> d(1, 5);
    std::bernoulli_distribution drop(trial % 4 == 0 ? 0.2 : 0.0);
    for (int u = 0; u < n; ++u) {
      for (int r = 0; r < k; ++r) {
        if (drop(rng)) m.clear(u, r);
        else m.set(u, r, d(rng));
      }
    }
    const auto g = grid_of(m);
    try {
      const double a = krippendorff_alpha(m);
      CHECK(std::abs(a - oracle::alpha(g, true)) < 1e-9);
      const double ai = krippendorff_alpha(m, DistanceMode::kOrdinalIndex);
      CHECK(std::abs(ai - oracle::alpha(g, false)) < 1e-9);
      ++checked;
    } catch (const MetricError&) {
    }
    const auto complete = m.complete_rows();
    bool degenerate = complete.rows() < 2;
    if (!degenerate) {
      const Eigen::VectorXd row_means = complete.rowwise().mean();
      degenerate = (row_means.array() == row_means(0)).all();
    }
    if (degenerate) {
      CHECK_THROWS_AS(icc_2_1(m), MetricError);
    } else {
      CHECK(std::abs(icc_2_1(m) - oracle::icc21(g)) < 1e-9);
      ++icc_checked;
    }
  }
  CHECK(checked > 250);
  CHECK(icc_checked > 250);
}

TEST_CASE("majority vote tie rules") {
  const auto ordinal = spec(5);
  const auto nominal = spec(6, ScaleType::kNominal);
  CHECK(majority_vote(std::vector<int>{1, 1, 2}, ordinal) == 1);
  CHECK(majority_vote(std::vector<int>{1, 1, 3, 3}, ordinal) == 3);
  CHECK(majority_vote(std::vector<int>{1, 1, 3, 3}, ordinal, {TieRule::kSmallestIndex, TieRule::kSmallestIndex}) == 1);
  CHECK(majority_vote(std::vector<int>{4, 4, 2, 2}, nominal) == 2);
  CHECK_THROWS_AS(majority_vote(std::vector<int>{}, ordinal), MetricError);
  CHECK(vote_tally(std::vector<int>{0, 0, 4}, ordinal) == std::vector<int>{2, 0, 0, 0, 1});
}

TEST_CASE("stability score") {
  StabilityInput in{{"img", "a", {0, 0, 0, 1, 1}}};
  CHECK(std::abs(stability_score(in) - 0.4) < 1e-12);
  StabilityInput same{{"img", "a", {2, 2, 2, 2, 2}}, {"img", "b", {0, 1, 2, 3, 4}}};
  CHECK(stability_score(same) == doctest::Approx(0.5));
  StabilityInput single{{"img", "a", {1}}};
  CHECK_THROWS_AS(stability_score(single), MetricError);
}

TEST_CASE("random stability and dispersion agree with pair enumeration") {
  std::mt19937_64 rng(3);
  AttributeCatalog catalog("t", {spec(5)});
  for (int trial = 0; trial < 100; ++trial) {
    StabilityInput in;
    std::vector<std::vector<int>> items;
    const int n = 1 + static_cast<int>(rng() % 50);
    const int runs = 2 + static_cast<int>(rng() % 5);
    for (int i = 0; i < n; ++i) {
      std::vector<int> v;
      for (int r = 0; r < runs; ++r) v.push_back(static_cast<int>(rng() % 3));
      in.push_back({"img" + std::to_string(i), "a", v});
      items.push_back(v);
    }
    CHECK(std::abs(stability_score(in) - oracle::stability(items)) < 1e-9);
    double sd = 0;
    for (const auto& v : items) sd += oracle::population_std(v);
    CHECK(std::abs(mean_run_std(in, catalog) - sd / n) < 1e-9);
  }
}

TEST_CASE("leave-one-out mos excludes the rater") {
  std::vector<HumanRating> rs{{"i", "a", 5}, {"i", "b", 3}, {"i", "c", 4}};
  CHECK(mos(rs) == doctest::Approx(4.0));
  CHECK(leave_one_out_mos(rs, "a") == doctest::Approx(3.5));
  CHECK_THROWS_AS(mos(std::vector<double>{}), MetricError);
}

TEST_CASE("alignment pooling modes") {
  AttributeSpec ord = spec(4);
  ord.id = "ord";
  AttributeSpec nom = spec(4, ScaleType::kNominal);
  nom.id = "nom";
  AttributeCatalog catalog("t", {ord, nom});
  LabelMap human{{{"i1", "ord"}, 0}, {{"i2", "ord"}, 1}, {{"i3", "ord"}, 3}, {{"i1", "nom"}, 2}, {{"i2", "nom"}, 0}};
  LabelMap model{{{"i1", "ord"}, 0}, {{"i2", "ord"}, 2}, {{"i3", "ord"}, 3}, {{"i1", "nom"}, 1}, {{"i2", "nom"}, 0}};
  const auto all = alignment_report(human, model, catalog, PoolingMode::kAllAttributes);
  CHECK(all.n_pairs == 5);
  const auto ord_only = alignment_report(human, model, catalog, PoolingMode::kOrdinalOnly);
  CHECK(ord_only.n_pairs == 3);
  CHECK(ord_only.mae == doctest::Approx(1.0 / 3.0));
  CHECK(all.pearson_r == doctest::Approx(oracle::pearson({0, 1, 3, 2, 0}, {0, 2, 3, 1, 0})));
}

TEST_CASE("label distribution reports empty bins") {
  AttributeCatalog catalog("t", {spec(4)});
  std::vector<Judgment> js;
  for (int r = 0; r < 3; ++r) js.push_back({"img1", "m", "attribute_qa", r, "a", r == 2 ? 3 : 1, "ref", 0, ""});
  for (int r = 0; r < 3; ++r) js.push_back({"img2", "m", "attribute_qa", r, "a", 1, "ref", 0, ""});
  const auto h = label_distribution(js, catalog);
  REQUIRE(h.size() == 1);
  CHECK(h[0].counts == std::vector<int>{0, 2, 0, 0});
}

TEST_CASE("panel builder layout") {
  std::vector<Judgment> js{{"i1", "m1", "attribute_qa", 0, "a", 1, "r", 0, ""},
                           {"i1", "m1", "attribute_qa", 1, "a", 2, "r", 0, ""},
                           {"i2", "m2", "attribute_qa", 0, "a", 0, "r", 0, ""}};
  const auto m = build_panel(js);
  CHECK(m.units() == 2);
  CHECK(m.raters() == 3);
  CHECK(m.rater_ids() == std::vector<std::string>{"m1#0", "m1#1", "m2#0"});
  CHECK(m.missing_count() == 3);
}

TEST_CASE("stability builder drops pairs with missing runs") {
  std::vector<Judgment> js;
  for (int r = 0; r < 5; ++r) js.push_back({"i1", "m", "attribute_qa", r, "a", 0, "r", 0, ""});
  for (int r = 0; r < 5; ++r) js.push_back({"i2", "m", "attribute_qa", r, "a", r % 2, "r", 0, ""});
  for (int r = 0; r < 4; ++r) js.push_back({"i3", "m", "attribute_qa", r, "a", 0, "r", 0, ""});
  const auto b = build_stability_input(js);
  CHECK(b.runs == 5);
  CHECK(b.dropped_pairs == 1);
  CHECK(b.input.size() == 2);
}

TEST_CASE("leave-one-out panel against brute force") {
  std::mt19937_64 rng(21);
  std::vector<HumanRating> ratings;
  const int raters = 7, images = 30;
  for (int i = 0; i < images; ++i) {
    const int truth = 1 + static_cast<int>(rng() % 5);
    for (int r = 0; r < raters; ++r) {
      const int noise = static_cast<int>(rng() % 3) - 1;
      ratings.push_back({"img" + std::to_string(i), "r" + std::to_string(r), std::clamp(truth + noise, 1, 5)});
    }
  }
  const auto panel = leave_one_out_panel(ratings);
  REQUIRE(panel.raters.size() == 7);
  double sum_s = 0;
  for (int r = 0; r < raters; ++r) {
    std::vector<double> own, rest;
    for (int i = 0; i < images; ++i) {
      double s = 0;
      for (int q = 0; q < raters; ++q) {
        const int v = ratings[static_cast<std::size_t>(i * raters + q)].rating;
        if (q == r) own.push_back(v);
        else s += v;
      }
      rest.push_back(s / (raters - 1));
    }
    CHECK(std::abs(panel.raters[r].srcc - oracle::spearman(own, rest)) < 1e-9);
    CHECK(std::abs(panel.raters[r].plcc - oracle::pearson(own, rest)) < 1e-9);
    sum_s += oracle::spearman(own, rest);
  }
  CHECK(std::abs(panel.mean_srcc - sum_s / raters) < 1e-9);
}

}  // TEST_SUITE
