#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "asyncbyz/aggregate.hpp"
#include "asyncbyz/vec.hpp"
#include "asyncbyz/weighted_set.hpp"

namespace asyncbyz {

enum class AlphaRule { Linear, MomentumForm };
enum class BetaRule { OneOverS, Constant };

inline std::string to_string(AlphaRule r) {
  return r == AlphaRule::Linear ? "linear" : "momentum-form";
}
inline std::string to_string(BetaRule r) {
  return r == BetaRule::OneOverS ? "one-over-s" : "constant";
}

struct OptimizerConfig {
  double eta = 0.0;  // learning rate; engine resolves 1/(4*L*T) when <= 0
  AlphaRule alpha_rule = AlphaRule::Linear;
  double gamma = 0.1;  // momentum-form averaging weight
  BetaRule beta_rule = BetaRule::OneOverS;
  double beta_const = 0.25;
  double domain_radius = 10.0;
  long horizon = 10000;

  void validate() const {
    if (!(eta > 0.0)) throw std::invalid_argument("optimizer.eta must be > 0");
    if (!(gamma > 0.0 && gamma <= 1.0))
      throw std::invalid_argument("optimizer.gamma must be in (0, 1]");
    if (!(beta_const > 0.0 && beta_const <= 1.0))
      throw std::invalid_argument("optimizer.beta-const must be in (0, 1]");
    if (!(domain_radius > 0.0))
      throw std::invalid_argument("optimizer.domain-radius must be > 0");
    if (horizon < 1) throw std::invalid_argument("optimizer.horizon must be >= 1");
  }
};

/// Euclidean projection onto the L2 ball of the given radius.
inline Vec project(Vec v, double radius) {
  const double n = norm(v);
  if (n > radius) scale(v, radius / n);
  return v;
}

/// Momentum correction weight for a worker computing its s-th update.
inline double beta_for(long s, const OptimizerConfig& cfg) {
  if (s < 1) throw std::logic_error("beta_for: update count must be >= 1");
  return cfg.beta_rule == BetaRule::OneOverS ? 1.0 / static_cast<double>(s)
                                             : cfg.beta_const;
}

/// Importance-weight schedule for the descent step. Linear is the t-weighted
/// schedule; ConstantOne pairs with exponential averaging; Geometric grows
/// each weight proportionally to the running sum (alpha_t = C * alpha_{1:t-1}),
/// which is the schedule the exponential form re-expresses.
class AlphaSchedule {
 public:
  enum class Kind { Linear, ConstantOne, Geometric };

  static AlphaSchedule linear() { return AlphaSchedule(Kind::Linear, 0.0); }
  static AlphaSchedule constant_one() { return AlphaSchedule(Kind::ConstantOne, 0.0); }
  static AlphaSchedule geometric(double c) { return AlphaSchedule(Kind::Geometric, c); }

  // alpha_t for the upcoming step (t = steps taken + 1)
  double current() const { return alpha_current_; }
  // alpha_{1:t} including the current weight
  double sum() const { return alpha_sum_; }

  // Advance to the next weight and return it.
  double advance() {
    ++t_;
    switch (kind_) {
      case Kind::Linear: alpha_current_ = static_cast<double>(t_); break;
      case Kind::ConstantOne: alpha_current_ = 1.0; break;
      case Kind::Geometric: alpha_current_ = c_ * alpha_sum_; break;
    }
    add_to_sum(alpha_current_);
    return alpha_current_;
  }

 private:
  AlphaSchedule(Kind kind, double c) : kind_(kind), c_(c) {
    alpha_current_ = 1.0;  // alpha_1 = 1 in every schedule
    add_to_sum(alpha_current_);
  }

  void add_to_sum(double v) {  // Kahan-compensated running sum
    const double y = v - comp_;
    const double t = alpha_sum_ + y;
    comp_ = (t - alpha_sum_) - y;
    alpha_sum_ = t;
  }

  Kind kind_;
  double c_;
  long t_ = 1;
  double alpha_current_ = 1.0;
  double alpha_sum_ = 0.0;
  double comp_ = 0.0;
};

/// Running anytime average of the iterate stream: either the exact
/// alpha-weighted average maintained incrementally, or the algebraically
/// equivalent exponential form x <- gamma*w + (1-gamma)*x.
class AnytimeAverage {
 public:
  enum class Mode { Weighted, Exponential };

  AnytimeAverage(Mode mode, double gamma, Vec x1)
      : mode_(mode), gamma_(gamma), x_(std::move(x1)) {}

  const Vec& value() const { return x_; }

  // Fold in the next iterate with its weight (alpha_next) and the previous
  // cumulative weight (alpha_sum_prev, i.e. alpha_{1:t}).
  void absorb(const Vec& w, double alpha_next, double alpha_sum_prev) {
    if (mode_ == Mode::Exponential) {
      for (std::size_t i = 0; i < x_.size(); ++i)
        x_[i] = gamma_ * w[i] + (1.0 - gamma_) * x_[i];
      return;
    }
    const double denom = alpha_sum_prev + alpha_next;
    for (std::size_t i = 0; i < x_.size(); ++i)
      x_[i] = (alpha_sum_prev * x_[i] + alpha_next * w[i]) / denom;
  }

 private:
  Mode mode_;
  double gamma_;
  Vec x_;
};

/// Worker-side state: the last corrected momentum, the query point its fresh
/// gradient was taken at, and the worker's own update count.
struct HonestWorkerState {
  Vec d;
  Vec x_last;
  long s = 0;
};

/// Corrected-momentum update: d <- g_new + (1 - beta)(d - g_stale), where
/// g_new and g_stale come from the same sample evaluated at the new and the
/// previous query point. The first update (s: 0 -> 1) must be driven with
/// beta = 1 so that d initializes to the plain gradient.
inline void worker_update(HonestWorkerState& state, const Vec& g_new, const Vec& g_stale,
                          double beta, const Vec& query_point) {
  if (!all_finite(g_new) || !all_finite(g_stale))
    throw std::runtime_error("worker update: non-finite gradient");
  if (!(beta > 0.0 && beta <= 1.0))
    throw std::invalid_argument("worker update: beta must be in (0, 1]");
  if (state.s == 0) state.d.assign(g_new.size(), 0.0);
  for (std::size_t i = 0; i < state.d.size(); ++i)
    state.d[i] = g_new[i] + (1.0 - beta) * (state.d[i] - g_stale[i]);
  state.s += 1;
  state.x_last = query_point;
}

/// Server-side state: the projected iterate w, the anytime average x handed
/// to workers as the query point, and the latest momentum + update count per
/// worker. Single-owner; mutated only through server_step.
class ServerState {
 public:
  ServerState(int n_workers, const OptimizerConfig& cfg)
      : cfg_(cfg),
        alpha_(cfg.alpha_rule == AlphaRule::Linear ? AlphaSchedule::linear()
                                                   : AlphaSchedule::constant_one()),
        average_(cfg.alpha_rule == AlphaRule::Linear ? AnytimeAverage::Mode::Weighted
                                                     : AnytimeAverage::Mode::Exponential,
                 cfg.gamma, Vec{}),
        worker_d_(n_workers),
        worker_s_(n_workers, 0) {}

  void start(const Vec& x1) {
    start(x1,
          cfg_.alpha_rule == AlphaRule::Linear ? AnytimeAverage::Mode::Weighted
                                               : AnytimeAverage::Mode::Exponential,
          cfg_.gamma);
  }

  // Custom schedule/averaging start, used to cross-check the two anytime
  // formulations against each other over one shared iterate stream.
  void start(const Vec& x1, AnytimeAverage::Mode mode, double gamma,
             std::optional<AlphaSchedule> schedule = std::nullopt) {
    cfg_.validate();
    if (schedule) alpha_ = *schedule;
    w_ = project(x1, cfg_.domain_radius);
    average_ = AnytimeAverage(mode, gamma, w_);
    started_ = true;
  }

  long iteration() const { return t_; }
  const Vec& iterate() const { return w_; }
  const Vec& query_point() const { return average_.value(); }
  int n_workers() const { return static_cast<int>(worker_s_.size()); }
  const Vec& worker_momentum(int i) const { return worker_d_[i]; }
  long worker_count(int i) const { return worker_s_[i]; }
  const OptimizerConfig& config() const { return cfg_; }

  // All stored momentums of workers that have arrived at least once,
  // weighted by their update counts.
  WeightedVectorSet momentum_set() const {
    WeightedVectorSet set;
    for (std::size_t i = 0; i < worker_d_.size(); ++i)
      if (worker_s_[i] > 0) set.push_back(worker_d_[i], static_cast<double>(worker_s_[i]));
    return set;
  }

  struct StepResult {
    Vec query_point;  // the average the arriving worker queried (pre-update)
    Vec aggregated;   // robust aggregate used for the descent step
    double alpha_t = 0.0;
  };

  /// One server iteration: store the received momentum, bump the sender's
  /// count, aggregate all live workers, take the projected descent step and
  /// fold the new iterate into the anytime average.
  StepResult step(int worker, const Vec& d_received, const AggregatorSpec& agg) {
    if (!started_) throw std::logic_error("server: start() not called");
    if (worker < 0 || worker >= n_workers())
      throw std::invalid_argument("server: worker index out of range");
    if (!all_finite(d_received))
      throw std::runtime_error("server: non-finite momentum received");

    StepResult res;
    res.query_point = average_.value();

    worker_d_[worker] = d_received;
    worker_s_[worker] += 1;

    res.aggregated = aggregate(momentum_set(), agg);
    res.alpha_t = alpha_.current();

    axpy(-cfg_.eta * res.alpha_t, res.aggregated, w_);
    w_ = project(std::move(w_), cfg_.domain_radius);

    const double alpha_sum_prev = alpha_.sum();
    const double alpha_next = alpha_.advance();
    average_.absorb(w_, alpha_next, alpha_sum_prev);

    t_ += 1;
    return res;
  }

 private:
  OptimizerConfig cfg_;
  bool started_ = false;
  long t_ = 0;
  Vec w_;
  AlphaSchedule alpha_;
  AnytimeAverage average_;
  std::vector<Vec> worker_d_;
  std::vector<long> worker_s_;
};

}  // namespace asyncbyz
