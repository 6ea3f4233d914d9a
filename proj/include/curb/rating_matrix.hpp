// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "curb/errors.hpp"

namespace curb {

/// Units x raters panel of numeric codes. Missing cells hold quiet NaN; every
/// present cell is finite.
template <typename Scalar>
class BasicRatingMatrix {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  static constexpr Scalar missing() { return std::numeric_limits<Scalar>::quiet_NaN(); }
  static bool is_missing(Scalar v) { return std::isnan(v); }

  BasicRatingMatrix() = default;

  BasicRatingMatrix(std::vector<std::string> unit_ids, std::vector<std::string> rater_ids)
      : unit_ids_(std::move(unit_ids)),
        rater_ids_(std::move(rater_ids)),
        cells_(Matrix::Constant(static_cast<Eigen::Index>(unit_ids_.size()),
                                static_cast<Eigen::Index>(rater_ids_.size()), missing())) {}

  /// Takes ownership of `cells`; ids are generated as "u<i>" / "r<j>".
  explicit BasicRatingMatrix(Matrix cells) : cells_(std::move(cells)) {
    for (Eigen::Index i = 0; i < cells_.rows(); ++i) unit_ids_.push_back("u" + std::to_string(i));
    for (Eigen::Index j = 0; j < cells_.cols(); ++j) rater_ids_.push_back("r" + std::to_string(j));
    validate();
  }

  Eigen::Index units() const { return cells_.rows(); }
  Eigen::Index raters() const { return cells_.cols(); }
  const std::vector<std::string>& unit_ids() const { return unit_ids_; }
  const std::vector<std::string>& rater_ids() const { return rater_ids_; }
  const Matrix& cells() const { return cells_; }

  void set(Eigen::Index unit, Eigen::Index rater, Scalar code) {
    if (!std::isfinite(code)) throw DomainError("rating matrix codes must be finite");
    cells_(unit, rater) = code;
  }
  void clear(Eigen::Index unit, Eigen::Index rater) { cells_(unit, rater) = missing(); }
  bool present(Eigen::Index unit, Eigen::Index rater) const {
    return !is_missing(cells_(unit, rater));
  }

  Eigen::Index missing_count() const {
    Eigen::Index n = 0;
    for (Eigen::Index i = 0; i < cells_.size(); ++i) n += is_missing(cells_.data()[i]) ? 1 : 0;
    return n;
  }

  /// Rows with every rater present (listwise deletion).
  Matrix complete_rows() const {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < units(); ++i) {
      if (!cells_.row(i).array().isNaN().any()) keep.push_back(i);
    }
    Matrix out(static_cast<Eigen::Index>(keep.size()), raters());
    for (std::size_t r = 0; r < keep.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = cells_.row(keep[r]);
    return out;
  }

 private:
  void validate() const {
    for (Eigen::Index i = 0; i < cells_.size(); ++i) {
      const Scalar v = cells_.data()[i];
      if (!is_missing(v) && !std::isfinite(v)) throw DomainError("rating matrix codes must be finite");
    }
  }

  std::vector<std::string> unit_ids_;
  std::vector<std::string> rater_ids_;
  Matrix cells_;
};

using RatingMatrix = BasicRatingMatrix<double>;

}  // namespace curb
