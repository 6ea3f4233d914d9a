// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

// Reference implementations written straight from the textbook definitions,
// with plain loops and no shared code with the library.

#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <vector>

namespace curb::oracle {

inline double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = mean(x), my = mean(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

/// Rank = 1 + (number strictly below) + (ties - 1) / 2.
inline std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double below = 0, equal = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (x[j] < x[i]) below += 1;
      if (x[j] == x[i]) equal += 1;
    }
    r[i] = 1 + below + (equal - 1) / 2;
  }
  return r;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(ranks(x), ranks(y));
}

inline double mae(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::fabs(x[i] - y[i]);
  return s / static_cast<double>(x.size());
}

inline double rmse(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(s / static_cast<double>(x.size()));
}

/// Fraction of run pairs (i < j) that agree, averaged over items.
inline double stability(const std::vector<std::vector<int>>& items) {
  double total = 0;
  for (const auto& runs : items) {
    double agree = 0, pairs = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      for (std::size_t j = i + 1; j < runs.size(); ++j) {
        pairs += 1;
        if (runs[i] == runs[j]) agree += 1;
      }
    }
    total += agree / pairs;
  }
  return total / static_cast<double>(items.size());
}

inline double population_std(const std::vector<int>& v) {
  double m = 0;
  for (int x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0;
  for (int x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

using Grid = std::vector<std::vector<std::optional<double>>>;  // [unit][rater]

/// Krippendorff's alpha by enumerating ordered value pairs: within units for
/// the observed disagreement, across all pairable values for the expected one.
inline double alpha(const Grid& g, bool nominal) {
  auto delta = [&](double a, double b) { return nominal ? (a == b ? 0.0 : 1.0) : (a - b) * (a - b); };
  std::vector<std::vector<double>> units;
  for (const auto& row : g) {
    std::vector<double> vals;
    for (const auto& c : row) {
      if (c) vals.push_back(*c);
    }
    if (vals.size() >= 2) units.push_back(vals);
  }
  std::vector<double> all;
  double n = 0, observed = 0;
  for (const auto& u : units) {
    const double m = static_cast<double>(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
      all.push_back(u[i]);
      for (std::size_t j = 0; j < u.size(); ++j) {
        if (i != j) observed += delta(u[i], u[j]) / (m - 1);
      }
    }
    n += m;
  }
  observed /= n;
  double expected = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    for (std::size_t j = 0; j < all.size(); ++j) {
      if (i != j) expected += delta(all[i], all[j]);
    }
  }
  expected /= n * (n - 1);
  return 1 - observed / expected;
}

/// ICC(2,1) from a two-way ANOVA table over complete rows; the error sum of
/// squares is taken as the remainder SST - SSR - SSC.
inline double icc21(const Grid& g) {
  std::vector<std::vector<double>> x;
  for (const auto& row : g) {
    bool complete = true;
    std::vector<double> r;
    for (const auto& c : row) {
      if (!c) complete = false;
      else r.push_back(*c);
    }
    if (complete) x.push_back(r);
  }
  const double n = static_cast<double>(x.size());
  const double k = static_cast<double>(x[0].size());
  double grand = 0;
  for (const auto& r : x) {
    for (double v : r) grand += v;
  }
  grand /= n * k;
  double sst = 0, ssr = 0, ssc = 0;
  for (const auto& r : x) {
    for (double v : r) sst += (v - grand) * (v - grand);
    double rm = 0;
    for (double v : r) rm += v;
    rm /= k;
    ssr += k * (rm - grand) * (rm - grand);
  }
  for (std::size_t c = 0; c < x[0].size(); ++c) {
    double cm = 0;
    for (const auto& r : x) cm += r[c];
    cm /= n;
    ssc += n * (cm - grand) * (cm - grand);
  }
  const double sse = sst - ssr - ssc;
  const double msr = ssr / (n - 1);
  const double msc = ssc / (k - 1);
  const double mse = sse / ((n - 1) * (k - 1));
  return (msr - mse) / (msr + (k - 1) * mse + k / n * (msc - mse));
}

}  // namespace curb::oracle
