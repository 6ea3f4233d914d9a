// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Aggregation and agreement statistics. Series metrics are templates over
// Eigen expressions; panel statistics operate on BasicRatingMatrix<Scalar>.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "curb/domain.hpp"
#include "curb/errors.hpp"
#include "curb/rating_matrix.hpp"

namespace curb::agreement {

// ---------------------------------------------------------------------------
// Paired series
// ---------------------------------------------------------------------------

/// Predictions `x` paired by index with references `y`.
struct MetricSeries {
  Eigen::VectorXd x;
  Eigen::VectorXd y;

  MetricSeries() = default;
  MetricSeries(Eigen::VectorXd xs, Eigen::VectorXd ys);
  MetricSeries(const std::vector<double>& xs, const std::vector<double>& ys);

  Eigen::Index size() const { return x.size(); }
};

namespace detail {

template <typename DX, typename DY>
void check_pair(const Eigen::DenseBase<DX>& x, const Eigen::DenseBase<DY>& y, Eigen::Index min_n,
                const char* metric) {
  if (x.size() != y.size()) {
    throw MetricError(std::string(metric) + ": series lengths differ (" + std::to_string(x.size()) + " vs " +
                      std::to_string(y.size()) + ")");
  }
  if (x.size() < min_n) {
    throw MetricError(std::string(metric) + ": needs at least " + std::to_string(min_n) + " pairs, got " +
                      std::to_string(x.size()));
  }
  if (!x.derived().array().isFinite().all() || !y.derived().array().isFinite().all()) {
    throw MetricError(std::string(metric) + ": series values must be finite");
  }
}

template <typename D>
bool is_constant(const Eigen::DenseBase<D>& v) {
  return v.size() == 0 || (v.derived().array() == v.derived().coeff(0)).all();
}

}  // namespace detail

/// 1-based ranks with ties assigned the mean of the positions they span.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> average_ranks(const Eigen::DenseBase<Derived>& values) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = values.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return values.derived().coeff(a) < values.derived().coeff(b); });
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> ranks(n);
  Eigen::Index i = 0;
  while (i < n) {
    Eigen::Index j = i;
    const Scalar v = values.derived().coeff(order[static_cast<std::size_t>(i)]);
    while (j + 1 < n && values.derived().coeff(order[static_cast<std::size_t>(j + 1)]) == v) ++j;
    const Scalar rank = static_cast<Scalar>(i + j + 2) / Scalar(2);
    for (Eigen::Index k = i; k <= j; ++k) ranks(order[static_cast<std::size_t>(k)]) = rank;
    i = j + 1;
  }
  return ranks;
}

/// Pearson linear correlation.
template <typename DX, typename DY>
typename DX::Scalar plcc(const Eigen::MatrixBase<DX>& x, const Eigen::MatrixBase<DY>& y) {
  using Scalar = typename DX::Scalar;
  detail::check_pair(x, y, 2, "plcc");
  if (detail::is_constant(x) || detail::is_constant(y)) throw MetricError("plcc: undefined for a constant series");
  const auto xc = (x.array() - x.mean()).matrix().eval();
  const auto yc = (y.array() - y.mean()).matrix().eval();
  const Scalar r = xc.dot(yc) / (std::sqrt(xc.squaredNorm()) * std::sqrt(yc.squaredNorm()));
  return std::clamp(r, Scalar(-1), Scalar(1));
}

/// Spearman rank correlation: Pearson over average ranks. Equals
/// 1 - 6*sum(d^2)/(N(N^2-1)) when neither series has ties.
template <typename DX, typename DY>
typename DX::Scalar srcc(const Eigen::MatrixBase<DX>& x, const Eigen::MatrixBase<DY>& y) {
  detail::check_pair(x, y, 2, "srcc");
  if (detail::is_constant(x) || detail::is_constant(y)) throw MetricError("srcc: undefined for a constant series");
  return plcc(average_ranks(x), average_ranks(y));
}

template <typename Scalar>
struct ErrorSummary {
  Scalar mae;
  Scalar rmse;
};

template <typename DX, typename DY>
ErrorSummary<typename DX::Scalar> mae_rmse(const Eigen::MatrixBase<DX>& x, const Eigen::MatrixBase<DY>& y) {
  detail::check_pair(x, y, 1, "mae_rmse");
  const auto d = (x - y).array().eval();
  return {d.abs().mean(), std::sqrt(d.square().mean())};
}

inline double plcc(const MetricSeries& s) { return plcc(s.x, s.y); }
inline double srcc(const MetricSeries& s) { return srcc(s.x, s.y); }
inline ErrorSummary<double> mae_rmse(const MetricSeries& s) { return mae_rmse(s.x, s.y); }

// ---------------------------------------------------------------------------
// MOS and voting
// ---------------------------------------------------------------------------

double mos(std::span<const HumanRating> ratings);
double mos(std::span<const double> values);

/// Mean over the ratings of one image by every rater except `excluded_rater`.
double leave_one_out_mos(std::span<const HumanRating> ratings, const std::string& excluded_rater);

enum class TieRule { kConservative, kSmallestIndex };

/// Ordinal ties go to the worse (higher-index) label by default; nominal ties
/// to the smallest index.
struct TieBreakRules {
  TieRule ordinal = TieRule::kConservative;
  TieRule nominal = TieRule::kSmallestIndex;
};

int majority_vote(std::span<const int> labels, const AttributeSpec& attribute, TieBreakRules rules = {});

/// Per-option counts for `labels` (length = option count).
std::vector<int> vote_tally(std::span<const int> labels, const AttributeSpec& attribute);

// ---------------------------------------------------------------------------
// Repeated-run stability
// ---------------------------------------------------------------------------

struct RunLabels {
  std::string image_id;
  std::string attribute_id;
  std::vector<int> runs;  // option index per trial
};

using StabilityInput = std::vector<RunLabels>;

enum class PoolingMode { kAllAttributes, kOrdinalOnly };
std::string_view to_string(PoolingMode m);
PoolingMode parse_pooling_mode(std::string_view s);

/// Mean over (image, attribute) pairs of agreeing run pairs / C(r, 2).
double stability_score(const StabilityInput& input);

/// Mean over pairs of the population standard deviation of option indices.
/// kOrdinalOnly drops nominal attributes.
double mean_run_std(const StabilityInput& input, const AttributeCatalog& catalog,
                    PoolingMode mode = PoolingMode::kAllAttributes);

// ---------------------------------------------------------------------------
// Inter-rater reliability
// ---------------------------------------------------------------------------

enum class DistanceMode { kNominal, kOrdinalIndex };
std::string_view to_string(DistanceMode m);
DistanceMode parse_distance_mode(std::string_view s);

/// Krippendorff's alpha from the coincidence matrix of pairable values.
/// Units with fewer than two ratings contribute nothing.
template <typename Scalar>
Scalar krippendorff_alpha(const BasicRatingMatrix<Scalar>& m, DistanceMode mode = DistanceMode::kNominal) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (m.raters() < 2) throw MetricError("krippendorff_alpha: needs at least 2 raters");

  std::vector<std::vector<Scalar>> units;
  std::set<Scalar> categories;
  for (Eigen::Index u = 0; u < m.units(); ++u) {
    std::vector<Scalar> vals;
    for (Eigen::Index r = 0; r < m.raters(); ++r) {
      if (m.present(u, r)) vals.push_back(m.cells()(u, r));
    }
    if (vals.size() < 2) continue;
    categories.insert(vals.begin(), vals.end());
    units.push_back(std::move(vals));
  }
  if (units.size() < 2) throw MetricError("krippendorff_alpha: fewer than 2 units rated by at least 2 raters");
  if (categories.size() < 2) throw MetricError("krippendorff_alpha: undefined, no variation in categories (D_e = 0)");

  const std::vector<Scalar> cats(categories.begin(), categories.end());
  const auto index_of = [&](Scalar v) {
    return static_cast<Eigen::Index>(std::lower_bound(cats.begin(), cats.end(), v) - cats.begin());
  };
  const auto c = static_cast<Eigen::Index>(cats.size());

  Matrix coincidence = Matrix::Zero(c, c);
  for (const auto& vals : units) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> counts = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(c);
    for (Scalar v : vals) counts(index_of(v)) += Scalar(1);
    Matrix pairs = counts * counts.transpose();
    pairs.diagonal() -= counts;
    coincidence += pairs / static_cast<Scalar>(vals.size() - 1);
  }

  Matrix delta(c, c);
  for (Eigen::Index a = 0; a < c; ++a) {
    for (Eigen::Index b = 0; b < c; ++b) {
      const Scalar d = cats[static_cast<std::size_t>(a)] - cats[static_cast<std::size_t>(b)];
      delta(a, b) = mode == DistanceMode::kNominal ? Scalar(a != b ? 1 : 0) : d * d;
    }
  }

  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> marginals = coincidence.rowwise().sum();
  const Scalar n = marginals.sum();
  const Scalar observed = (coincidence.array() * delta.array()).sum() / n;
  const Scalar expected = (marginals.transpose() * delta * marginals).value() / (n * (n - Scalar(1)));
  if (expected == Scalar(0)) throw MetricError("krippendorff_alpha: undefined, expected disagreement is zero");
  return Scalar(1) - observed / expected;
}

/// ICC(2,1): two-way random effects, absolute agreement, single rater, over
/// the complete rows of `m`.
template <typename Scalar>
Scalar icc_2_1(const BasicRatingMatrix<Scalar>& m) {
  const auto x = m.complete_rows();
  const Eigen::Index n = x.rows();
  const Eigen::Index k = x.cols();
  if (n < 2 || k < 2) {
    throw MetricError("icc_2_1: needs at least 2 complete units and 2 raters, got " + std::to_string(n) + "x" +
                      std::to_string(k));
  }
  const Scalar grand = x.mean();
  const auto row_means = x.rowwise().mean().eval();
  const auto col_means = x.colwise().mean().eval();
  const Scalar ss_rows = static_cast<Scalar>(k) * (row_means.array() - grand).square().sum();
  const Scalar ss_cols = static_cast<Scalar>(n) * (col_means.array() - grand).square().sum();
  const auto residual = ((x.colwise() - row_means).rowwise() - col_means).array() + grand;
  const Scalar ss_error = residual.square().sum();
  if (ss_rows == Scalar(0)) throw MetricError("icc_2_1: undefined, zero between-unit variance");

  const Scalar ms_rows = ss_rows / static_cast<Scalar>(n - 1);
  const Scalar ms_cols = ss_cols / static_cast<Scalar>(k - 1);
  const Scalar ms_error = ss_error / static_cast<Scalar>((n - 1) * (k - 1));
  const Scalar denom = ms_rows + static_cast<Scalar>(k - 1) * ms_error +
                       static_cast<Scalar>(k) / static_cast<Scalar>(n) * (ms_cols - ms_error);
  if (denom == Scalar(0)) throw MetricError("icc_2_1: undefined, zero denominator");
  return (ms_rows - ms_error) / denom;
}

struct ReliabilityResult {
  double krippendorff_alpha = 0.0;
  double icc_2_1 = 0.0;
  Eigen::Index n_units = 0;
  Eigen::Index n_raters = 0;
  Eigen::Index missing_count = 0;
  DistanceMode distance_mode = DistanceMode::kNominal;
};

ReliabilityResult reliability(const RatingMatrix& m, DistanceMode mode = DistanceMode::kNominal);

// ---------------------------------------------------------------------------
// Human-model alignment and distributions
// ---------------------------------------------------------------------------

using UnitKey = std::pair<std::string, std::string>;  // (image_id, attribute_id)
using LabelMap = std::map<UnitKey, int>;

struct AlignmentReport {
  double pearson_r = 0.0;
  double spearman_rho = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
  std::size_t n_pairs = 0;
  PoolingMode pooling_mode = PoolingMode::kAllAttributes;
};

AlignmentReport alignment_report(const LabelMap& human, const LabelMap& model, const AttributeCatalog& catalog,
                                 PoolingMode mode = PoolingMode::kAllAttributes);

struct LabelHistogram {
  std::string attribute_id;
  std::vector<int> counts;  // one bin per option, in catalog order
};

/// Majority-voted label per (image, attribute), then dense per-attribute counts.
std::vector<LabelHistogram> label_distribution(const std::vector<Judgment>& judgments,
                                               const AttributeCatalog& catalog, TieBreakRules rules = {});

/// Majority label per (image, attribute) across every judgment supplied.
LabelMap majority_labels(const std::vector<Judgment>& judgments, const AttributeCatalog& catalog,
                         TieBreakRules rules = {});

struct StabilityBuild {
  StabilityInput input;
  std::size_t dropped_pairs = 0;  // pairs with fewer runs than the modal run count
  std::size_t runs = 0;
};

/// Groups judgments by (image, attribute) in run order. Pairs whose run count
/// differs from the most common count are dropped and counted.
StabilityBuild build_stability_input(const std::vector<Judgment>& judgments);

/// Units = "image_id|attribute_id", raters = "model_id#run_index"; cells hold
/// option indices.
RatingMatrix build_panel(const std::vector<Judgment>& judgments);

// ---------------------------------------------------------------------------
// Leave-one-out rater analysis
// ---------------------------------------------------------------------------

struct RaterAgreement {
  std::string rater_id;
  double srcc = 0.0;
  double plcc = 0.0;
  std::size_t n = 0;
};

struct LeaveOneOutPanel {
  std::vector<RaterAgreement> raters;
  double mean_srcc = 0.0;
  double mean_plcc = 0.0;
};

/// Each rater's ratings against the MOS of the remaining raters, image by image.
LeaveOneOutPanel leave_one_out_panel(const std::vector<HumanRating>& ratings);

/// Per-image MOS over the supplied ratings, keyed by image id.
std::map<std::string, double> mos_by_image(const std::vector<HumanRating>& ratings);

}  // namespace curb::agreement
