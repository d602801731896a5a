#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "asyncbyz/vec.hpp"
#include "asyncbyz/weighted_set.hpp"

namespace asyncbyz {

enum class BaseAggregator { WeightedMean, WeightedGm, WeightedCwmed };

inline std::string to_string(BaseAggregator b) {
  switch (b) {
    case BaseAggregator::WeightedMean: return "weighted-mean";
    case BaseAggregator::WeightedGm: return "weighted-gm";
    case BaseAggregator::WeightedCwmed: return "weighted-cwmed";
  }
  return "?";
}

inline BaseAggregator parse_base_aggregator(const std::string& s) {
  if (s == "weighted-mean") return BaseAggregator::WeightedMean;
  if (s == "weighted-gm") return BaseAggregator::WeightedGm;
  if (s == "weighted-cwmed") return BaseAggregator::WeightedCwmed;
  throw std::invalid_argument("unknown aggregator '" + s +
                              "' (expected weighted-mean, weighted-gm or weighted-cwmed)");
}

struct AggregatorSpec {
  BaseAggregator base = BaseAggregator::WeightedMean;
  bool ctma = false;
  double lambda = 0.0;         // adversarial weight fraction, must stay < 1/2
  double gm_tolerance = 1e-9;  // Weiszfeld stop criterion on iterate displacement
  int gm_max_iters = 1000;

  void validate() const {
    if (!(lambda >= 0.0 && lambda < 0.5))
      throw std::invalid_argument("aggregator.lambda must be in [0, 0.5), i.e. < 0.5");
    if (!(gm_tolerance > 0.0))
      throw std::invalid_argument("aggregator.gm-tolerance must be > 0");
    if (gm_max_iters < 1)
      throw std::invalid_argument("aggregator.gm-max-iters must be >= 1");
  }

  std::string name() const {
    return to_string(base) + (ctma ? "+ctma" : "");
  }
};

/// Deviation coefficient of the configured rule: the factor multiplying the
/// honest weighted spread in the aggregator's error bound. The plain weighted
/// mean admits no such bound, reported as +infinity.
struct RobustnessCertificate {
  double c_lambda = std::numeric_limits<double>::infinity();
  bool bounded() const { return std::isfinite(c_lambda); }
};

inline RobustnessCertificate certificate(const AggregatorSpec& spec) {
  spec.validate();
  if (spec.ctma && spec.lambda == 0.0) return {0.0};
  if (spec.base == BaseAggregator::WeightedMean)
    return {std::numeric_limits<double>::infinity()};
  const double r = 1.0 + spec.lambda / (1.0 - 2.0 * spec.lambda);
  double c = r * r;
  if (spec.ctma) c *= spec.lambda;
  return {c};
}

inline Vec weighted_mean(const WeightedVectorSet& set) {
  set.validate();
  const auto order = canonical_order(set);
  Vec out(set.dimension(), 0.0);
  double total = 0.0;
  for (std::size_t i : order) {
    axpy(set.weights[i], set.vectors[i], out);
    total += set.weights[i];
  }
  scale(out, 1.0 / total);
  return out;
}

struct GmResult {
  Vec point;
  int iterations = 0;
  bool converged = true;  // false: stopped at gm_max_iters, point = best seen
};

/// Weighted geometric median via Weiszfeld iteration, started from the
/// weighted mean. Minimises sum_i s_i * |y - x_i|. When an iterate lands on
/// an input point the distance is floored at 1e-12 to keep the weights
/// finite. Returns the iterate with the best objective seen.
inline GmResult weighted_geometric_median(const WeightedVectorSet& set,
                                          double tolerance = 1e-9,
                                          int max_iters = 1000) {
  set.validate();
  if (!(tolerance > 0.0)) throw std::invalid_argument("gm tolerance must be > 0");
  if (max_iters < 1) throw std::invalid_argument("gm max iters must be >= 1");

  GmResult res;
  res.point = weighted_mean(set);
  if (set.size() == 1) {
    res.point = set.vectors.front();
    return res;
  }

  const auto order = canonical_order(set);
  const std::size_t d = set.dimension();

  auto objective = [&](const Vec& y) {
    double obj = 0.0;
    for (std::size_t i : order) obj += set.weights[i] * dist(y, set.vectors[i]);
    return obj;
  };

  Vec best = res.point;
  double best_obj = objective(best);
  Vec next(d);
  double prev_step = -1.0;

  for (int it = 1; it <= max_iters; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    double den = 0.0;
    for (std::size_t i : order) {
      double di = dist(res.point, set.vectors[i]);
      if (di < 1e-12) di = 1e-12;
      const double wi = set.weights[i] / di;
      axpy(wi, set.vectors[i], next);
      den += wi;
    }
    scale(next, 1.0 / den);

    const double step = dist(next, res.point);
    res.point.swap(next);
    res.iterations = it;

    const double obj = objective(res.point);
    if (obj < best_obj) {
      best_obj = obj;
      best = res.point;
    }

    // The iteration contracts linearly near the optimum, so the distance
    // still to go is about step * r / (1 - r) with r the step ratio. Stop
    // once that estimate is inside the tolerance.
    bool done = step == 0.0;
    if (!done && prev_step > step)
      done = step * step / (prev_step - step) <= tolerance;
    prev_step = step;
    if (done) break;
    if (it == max_iters) res.converged = false;
  }
  // The iteration is monotone, so the last iterate is normally the best;
  // fall back to the best seen if a guarded step bumped the objective.
  if (objective(res.point) > best_obj * (1.0 + 1e-12) + 1e-300) res.point = best;
  return res;
}

/// Weighted coordinate-wise median. Per coordinate: sort values ascending
/// (ties by original index), take the first value whose cumulative weight
/// strictly exceeds half the total; when a prefix hits exactly half, the
/// median is the midpoint of that value and the next.
inline Vec weighted_cwmed(const WeightedVectorSet& set) {
  set.validate();
  const std::size_t m = set.size();
  const std::size_t d = set.dimension();
  const double half = 0.5 * set.total_weight();

  Vec out(d, 0.0);
  std::vector<std::size_t> idx(m);
  for (std::size_t k = 0; k < d; ++k) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      const double va = set.vectors[a][k];
      const double vb = set.vectors[b][k];
      return va != vb ? va < vb : a < b;
    });
    double cum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      cum += set.weights[idx[j]];
      if (cum == half) {
        out[k] = 0.5 * (set.vectors[idx[j]][k] + set.vectors[idx[j + 1]][k]);
        break;
      }
      if (cum > half) {
        out[k] = set.vectors[idx[j]][k];
        break;
      }
    }
  }
  return out;
}

struct CtmaResult {
  Vec point;
  double retained_weight = 0.0;  // always (1 - lambda) * total weight
};

/// Centered trimmed meta-aggregation: keep the (1 - lambda) weight fraction
/// of inputs closest to the anchor (ties by original index) and return their
/// weighted average. The entry straddling the threshold is split so the
/// retained weight is exactly (1 - lambda) times the total.
inline CtmaResult ctma(const WeightedVectorSet& set, double lambda, const Vec& anchor) {
  set.validate();
  if (!(lambda >= 0.0 && lambda < 0.5))
    throw std::invalid_argument("ctma lambda must be in [0, 0.5), i.e. < 0.5");
  if (anchor.size() != set.dimension())
    throw std::invalid_argument("ctma anchor dimension mismatch");

  const std::size_t m = set.size();
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::vector<double> d2(m);
  for (std::size_t i = 0; i < m; ++i) d2[i] = dist_sq(set.vectors[i], anchor);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return d2[a] != d2[b] ? d2[a] < d2[b] : a < b;
  });

  const double target = (1.0 - lambda) * set.total_weight();

  std::size_t cut = m - 1;  // index (in sorted order) of the split entry
  double prefix = 0.0;      // weight strictly before the split entry
  double cum = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    cum += set.weights[idx[j]];
    if (cum >= target) {
      cut = j;
      prefix = cum - set.weights[idx[j]];
      break;
    }
    if (j + 1 == m) {  // float-rounding fallback: keep everything
      cut = j;
      prefix = cum - set.weights[idx[j]];
    }
  }

  double split = target - prefix;
  split = std::clamp(split, 0.0, set.weights[idx[cut]]);

  CtmaResult res;
  res.point.assign(set.dimension(), 0.0);
  for (std::size_t j = 0; j < cut; ++j)
    axpy(set.weights[idx[j]], set.vectors[idx[j]], res.point);
  axpy(split, set.vectors[idx[cut]], res.point);
  res.retained_weight = prefix + split;
  scale(res.point, 1.0 / res.retained_weight);
  return res;
}

/// Full aggregation pipeline: drop zero-weight entries, apply the base rule,
/// then optionally re-centre with the trimmed meta step anchored at the base
/// output. Pure function of its inputs.
inline Vec aggregate(const WeightedVectorSet& set, const AggregatorSpec& spec) {
  spec.validate();
  if (set.vectors.size() != set.weights.size())
    throw std::invalid_argument("weighted set: vectors/weights length mismatch");
  WeightedVectorSet live;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (set.weights[i] == 0.0) continue;
    live.push_back(set.vectors[i], set.weights[i]);
  }
  if (live.size() == 0)
    throw std::invalid_argument("weighted set: all weights are zero");
  live.validate();

  Vec base;
  switch (spec.base) {
    case BaseAggregator::WeightedMean:
      base = weighted_mean(live);
      break;
    case BaseAggregator::WeightedGm:
      base = weighted_geometric_median(live, spec.gm_tolerance, spec.gm_max_iters).point;
      break;
    case BaseAggregator::WeightedCwmed:
      base = weighted_cwmed(live);
      break;
  }
  if (!spec.ctma) return base;
  return ctma(live, spec.lambda, base).point;
}

}  // namespace asyncbyz
