#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "asyncbyz/vec.hpp"

namespace asyncbyz {

/// A set of same-dimension vectors with nonnegative weights. Weights carry
/// the update counts of the senders, so aggregation can favour frequent
/// contributors. Total weight must be positive.
struct WeightedVectorSet {
  std::vector<Vec> vectors;
  std::vector<double> weights;

  std::size_t size() const { return vectors.size(); }
  std::size_t dimension() const { return vectors.empty() ? 0 : vectors.front().size(); }

  void push_back(Vec v, double w) {
    vectors.push_back(std::move(v));
    weights.push_back(w);
  }

  // Weight sum in a permutation-invariant order (ascending), so downstream
  // threshold comparisons do not depend on input order.
  double total_weight() const {
    std::vector<double> sorted = weights;
    std::sort(sorted.begin(), sorted.end());
    double total = 0.0;
    for (double w : sorted) total += w;
    return total;
  }

  void validate() const {
    if (vectors.empty()) throw std::invalid_argument("weighted set: empty");
    if (vectors.size() != weights.size())
      throw std::invalid_argument("weighted set: vectors/weights length mismatch");
    const std::size_t d = vectors.front().size();
    if (d == 0) throw std::invalid_argument("weighted set: zero-dimensional vectors");
    for (const Vec& v : vectors) {
      if (v.size() != d) throw std::invalid_argument("weighted set: mixed dimensions");
      if (!all_finite(v)) throw std::invalid_argument("weighted set: non-finite entry");
    }
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw std::invalid_argument("weighted set: negative or NaN weight");
      total += w;
    }
    if (!(total > 0.0)) throw std::invalid_argument("weighted set: total weight must be > 0");
  }
};

// Indices ordered lexicographically by (vector, weight). Sum-based aggregators
// iterate in this order, which makes them permutation-invariant bit for bit.
inline std::vector<std::size_t> canonical_order(const WeightedVectorSet& set) {
  std::vector<std::size_t> idx(set.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (set.vectors[a] != set.vectors[b]) return set.vectors[a] < set.vectors[b];
    return set.weights[a] < set.weights[b];
  });
  return idx;
}

}  // namespace asyncbyz
