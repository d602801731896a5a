#pragma once

// Shared helpers and independent reference oracles for the test suites. The
// oracles are deliberately naive (scans, grids, from-scratch recomputations)
// and never call the implementation paths they check.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "asyncbyz/vec.hpp"
#include "asyncbyz/weighted_set.hpp"

namespace testutil {

using asyncbyz::Vec;
using asyncbyz::WeightedVectorSet;

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline double runif(std::mt19937_64& g, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(g);
}

inline double rnorm(std::mt19937_64& g, double mean = 0.0, double sd = 1.0) {
  return std::normal_distribution<double>(mean, sd)(g);
}

inline WeightedVectorSet random_set(std::mt19937_64& g, int m, int d, double value_range = 10.0,
                                    double w_lo = 0.1, double w_hi = 5.0) {
  WeightedVectorSet set;
  for (int i = 0; i < m; ++i) {
    Vec v(d);
    for (double& x : v) x = runif(g, -value_range, value_range);
    set.push_back(std::move(v), runif(g, w_lo, w_hi));
  }
  return set;
}

// sum_i s_i |y - x_i| for 1-d sets
inline double abs_objective(const WeightedVectorSet& set, double y) {
  double obj = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i)
    obj += set.weights[i] * std::abs(y - set.vectors[i][0]);
  return obj;
}

// Brute-force minimizer of the weighted absolute-distance objective on a
// refined grid. Three refinement passes bring the resolution to ~1e-10 of
// the data range.
inline double grid_minimizer_1d(const WeightedVectorSet& set) {
  double lo = set.vectors[0][0], hi = lo;
  for (const Vec& v : set.vectors) {
    lo = std::min(lo, v[0]);
    hi = std::max(hi, v[0]);
  }
  if (lo == hi) return lo;
  const int n = 2000;
  for (int pass = 0; pass < 3; ++pass) {
    double best_y = lo, best_obj = abs_objective(set, lo);
    const double step = (hi - lo) / n;
    for (int i = 1; i <= n; ++i) {
      const double y = lo + step * i;
      const double obj = abs_objective(set, y);
      if (obj < best_obj) {
        best_obj = obj;
        best_y = y;
      }
    }
    lo = best_y - step;
    hi = best_y + step;
  }
  return 0.5 * (lo + hi);
}

// Weighted median of scalars by direct definition scan: stable-sort the
// values, find the first index whose cumulative weight strictly exceeds half
// the total, averaging with the next value on an exact half split.
inline double scan_weighted_median(std::vector<double> values, std::vector<double> weights) {
  const std::size_t m = values.size();
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  double total = 0.0;
  for (double w : weights) total += w;
  const double half = 0.5 * total;
  double cum = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    cum += weights[idx[j]];
    if (cum == half) return 0.5 * (values[idx[j]] + values[idx[j + 1]]);
    if (cum > half) return values[idx[j]];
  }
  return values[idx[m - 1]];
}

// From-scratch weighted average of a full iterate history.
inline Vec reference_weighted_average(const std::vector<Vec>& ws, const std::vector<double>& alphas) {
  Vec out(ws[0].size(), 0.0);
  long double total = 0.0L;
  for (std::size_t t = 0; t < ws.size(); ++t) total += alphas[t];
  for (std::size_t k = 0; k < out.size(); ++k) {
    long double acc = 0.0L;
    for (std::size_t t = 0; t < ws.size(); ++t)
      acc += static_cast<long double>(alphas[t]) * ws[t][k];
    out[k] = static_cast<double>(acc / total);
  }
  return out;
}

// Least-squares slope of y against x.
inline double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace testutil
