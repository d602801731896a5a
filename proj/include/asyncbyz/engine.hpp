#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "asyncbyz/aggregate.hpp"
#include "asyncbyz/attack.hpp"
#include "asyncbyz/optimizer.hpp"
#include "asyncbyz/problem.hpp"
#include "asyncbyz/rng.hpp"
#include "asyncbyz/scheduler.hpp"
#include "asyncbyz/vec.hpp"

namespace asyncbyz {

enum class AssertionLevel { Off, Debug };

inline std::string to_string(AssertionLevel l) {
  return l == AssertionLevel::Off ? "off" : "debug";
}

inline AssertionLevel parse_assertion_level(const std::string& s) {
  if (s == "off") return AssertionLevel::Off;
  if (s == "debug") return AssertionLevel::Debug;
  throw std::invalid_argument("unknown assertion level '" + s + "' (expected off or debug)");
}

struct SimulationConfig {
  ProblemParams problem;
  ScheduleSpec schedule;
  std::optional<AttackSpec> attack;
  AggregatorSpec aggregator;
  OptimizerConfig optimizer;
  long trials = 1;
  long metric_stride = 1;
  AssertionLevel assertion_level = AssertionLevel::Off;
  std::uint64_t seed = 42;

  void validate() const {
    problem.validate();
    schedule.validate();
    if (attack) attack->validate();
    aggregator.validate();
    optimizer.validate();
    if (trials < 1) throw std::invalid_argument("run.trials must be >= 1");
    if (metric_stride < 1) throw std::invalid_argument("run.metric-stride must be >= 1");
    if (schedule.m_byzantine > 0 && schedule.lambda > 0.0 && !attack)
      throw std::invalid_argument("attack.kind required when adversarial workers are scheduled");
  }
};

// Resolves the run-dependent defaults against the constructed problem: the
// schedule horizon and, when eta was not given (<= 0), the 1/(4*L*T) rate
// used for the theory-facing runs.
inline SimulationConfig resolve(SimulationConfig cfg, const Problem& problem) {
  cfg.schedule.horizon = cfg.optimizer.horizon;
  if (cfg.optimizer.eta <= 0.0)
    cfg.optimizer.eta =
        1.0 / (4.0 * problem.l_smooth() * static_cast<double>(cfg.optimizer.horizon));
  cfg.validate();
  return cfg;
}

struct TraceRow {
  long trial = 0;
  long t = 0;
  double excess_loss = 0.0;
  double grad_error_sq = 0.0;  // ||aggregate - grad f(x_t)||^2 at the queried point
  long tau_max = 0;
  double honest_frac = 1.0;
  std::int64_t wallclock_ns = 0;  // in-memory diagnostic, never serialized
};

struct EpsSample {
  long t = 0;
  long s = 0;          // sender's update count
  double eps_sq = 0.0;  // ||d - grad f(query)||^2 for the transmitted momentum
};

struct TrialDiagnostics {
  long trial = 0;
  long iterations = 0;
  long byzantine_arrivals = 0;
  long drift_violations = 0;  // query-point drift bound breaches (debug mode)
  double final_excess = 0.0;
  std::vector<EpsSample> eps_log;            // honest transmissions, when collected
  std::vector<ArrivalEvent> events;          // when collected
  std::vector<Vec> last_transmission;        // per worker, when collected
  std::vector<Vec> stored_momentum;          // server table at the end, when collected
  std::vector<long> stored_count;
  std::optional<std::string> fault;
};

struct RunResult {
  std::vector<TraceRow> rows;
  std::vector<TrialDiagnostics> trials;
};

struct RunOptions {
  int threads = 1;
  bool collect_eps_log = false;
  bool collect_events = false;
  bool collect_transmissions = false;
};

namespace detail {

struct TrialOutput {
  std::vector<TraceRow> rows;
  TrialDiagnostics diag;
};

inline TrialOutput run_trial(const SimulationConfig& cfg, const Problem& problem,
                             long trial, const RunOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  TrialOutput out;
  out.diag.trial = trial;

  const std::uint64_t trial_seed = cfg.seed ^ static_cast<std::uint64_t>(trial);
  Scheduler scheduler(cfg.schedule, mix_seed(trial_seed, 0x5C0D));
  RngStream data_stream(mix_seed(trial_seed, 0xDA7A));

  const int m = cfg.schedule.total_workers();
  const int d = problem.dimension();
  const double diameter = 2.0 * problem.radius();
  const Vec x1(d, 0.0);

  ServerState server(m, cfg.optimizer);
  server.start(x1);

  // One state per worker; adversarial flip attacks keep an honest shadow here
  // too (label flippers update it against the corrupted oracle).
  std::vector<HonestWorkerState> workers(m);
  for (auto& w : workers) w.x_last = x1;

  if (opt.collect_transmissions) out.diag.last_transmission.assign(m, Vec{});
  const bool drift_checks =
      cfg.assertion_level == AssertionLevel::Debug &&
      cfg.optimizer.alpha_rule == AlphaRule::Linear;

  std::vector<long> latest_gap(m, 0);
  std::vector<long> last_query_iter(m, 0);  // iteration whose average is x_last (0 = x_1)

  try {
    for (long t = 1; t <= cfg.optimizer.horizon; ++t) {
      const ArrivalEvent ev = scheduler.next_arrival();
      HonestWorkerState& state = workers[ev.worker];
      const bool label_flip =
          ev.is_byzantine && cfg.attack && cfg.attack->kind == AttackKind::LabelFlip;
      const bool keeps_shadow =
          !ev.is_byzantine ||
          (cfg.attack && (cfg.attack->kind == AttackKind::SignFlip || label_flip));

      Vec emitted;
      if (keeps_shadow) {
        // First contact initializes the momentum at the start point x_1 with
        // beta = 1; afterwards the fresh sample is evaluated at the current
        // query point and the previous one.
        const Vec& query = state.s == 0 ? x1 : server.query_point();
        if (drift_checks && !ev.is_byzantine && state.s > 0) {
          const long tau_q = t - last_query_iter[ev.worker];
          const double bound =
              4.0 * diameter * static_cast<double>(tau_q) / static_cast<double>(t);
          if (dist(server.query_point(), state.x_last) > bound + 1e-9)
            out.diag.drift_violations += 1;
        }
        const SampleToken token = problem.draw_sample(data_stream);
        const Vec g_new = label_flip
                              ? problem.stochastic_gradient_label_flipped(query, token)
                              : problem.stochastic_gradient(query, token);
        const Vec g_stale =
            label_flip ? problem.stochastic_gradient_label_flipped(state.x_last, token)
                       : problem.stochastic_gradient(state.x_last, token);
        const double beta = state.s == 0 ? 1.0 : beta_for(state.s + 1, cfg.optimizer);
        const bool first_contact = state.s == 0;
        worker_update(state, g_new, g_stale, beta, query);
        if (!first_contact) last_query_iter[ev.worker] = t;

        if (!ev.is_byzantine) {
          if (opt.collect_eps_log) {
            const double eps_sq = dist_sq(state.d, problem.true_gradient(query));
            out.diag.eps_log.push_back({t, state.s, eps_sq});
          }
          emitted = state.d;
        } else {
          ByzantineContext ctx;
          ctx.own_honest_d = &state.d;
          ctx.total_updates = t;
          ctx.byz_updates = scheduler.byzantine_arrivals();
          emitted = byzantine_update(*cfg.attack, ctx);
        }
      } else {
        // Collusion attacks read the honest momentums currently on the server.
        WeightedVectorSet honest_view;
        for (int i = 0; i < cfg.schedule.m_honest; ++i)
          if (server.worker_count(i) > 0)
            honest_view.push_back(server.worker_momentum(i),
                                  static_cast<double>(server.worker_count(i)));
        ByzantineContext ctx;
        ctx.honest_view = &honest_view;
        ctx.total_updates = t;
        ctx.byz_updates = scheduler.byzantine_arrivals();
        emitted = byzantine_update(*cfg.attack, ctx);
      }

      if (opt.collect_transmissions) out.diag.last_transmission[ev.worker] = emitted;
      const auto step = server.step(ev.worker, emitted, cfg.aggregator);

      latest_gap[ev.worker] = ev.tau;
      if (opt.collect_events) out.diag.events.push_back(ev);

      if (t % cfg.metric_stride == 0) {
        TraceRow row;
        row.trial = trial;
        row.t = t;
        row.excess_loss = problem.excess_loss(server.query_point());
        row.grad_error_sq =
            dist_sq(step.aggregated, problem.true_gradient(step.query_point));
        for (long g : latest_gap) row.tau_max = std::max(row.tau_max, g);
        row.honest_frac = static_cast<double>(t - scheduler.byzantine_arrivals()) /
                          static_cast<double>(t);
        row.wallclock_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                               std::chrono::steady_clock::now() - t0)
                               .count();
        out.rows.push_back(row);
      }
      out.diag.iterations = t;
    }
  } catch (const std::exception& e) {
    out.diag.fault = e.what();
    TraceRow row;
    row.trial = trial;
    row.t = out.diag.iterations + 1;
    row.excess_loss = std::nan("");
    row.grad_error_sq = std::nan("");
    row.honest_frac = std::nan("");
    out.rows.push_back(row);
  }

  out.diag.byzantine_arrivals = scheduler.byzantine_arrivals();
  if (!out.diag.fault) out.diag.final_excess = problem.excess_loss(server.query_point());
  if (opt.collect_transmissions) {
    out.diag.stored_momentum.resize(m);
    out.diag.stored_count.resize(m);
    for (int i = 0; i < m; ++i) {
      out.diag.stored_momentum[i] = server.worker_count(i) > 0 ? server.worker_momentum(i) : Vec{};
      out.diag.stored_count[i] = server.worker_count(i);
    }
  }
  return out;
}

}  // namespace detail

/// Runs the configured experiment. Trials are independent given their derived
/// seeds and are merged in trial order, so threaded and serial execution
/// produce identical results.
inline RunResult run(const SimulationConfig& config, const RunOptions& options = {}) {
  const Problem problem = Problem::make(config.problem, mix_seed(config.seed, 0x9B0B));
  const SimulationConfig cfg = resolve(config, problem);

  std::vector<detail::TrialOutput> outputs(cfg.trials);
  if (options.threads > 1 && cfg.trials > 1) {
    std::atomic<long> next{0};
    auto drain = [&] {
      for (long trial = next.fetch_add(1); trial < cfg.trials; trial = next.fetch_add(1))
        outputs[trial] = detail::run_trial(cfg, problem, trial, options);
    };
    const int n_threads = static_cast<int>(std::min<long>(options.threads, cfg.trials));
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(drain);
    for (auto& th : pool) th.join();
  } else {
    for (long trial = 0; trial < cfg.trials; ++trial)
      outputs[trial] = detail::run_trial(cfg, problem, trial, options);
  }

  RunResult result;
  for (auto& out : outputs) {
    result.rows.insert(result.rows.end(), out.rows.begin(), out.rows.end());
    result.trials.push_back(std::move(out.diag));
  }
  return result;
}

struct SweepPoint {
  std::string value;
  long trials = 0;
  double mean_final_excess = 0.0;
  double stderr_final_excess = 0.0;
  bool faulted = false;
};

/// Mean and standard error over a sample. The error uses the population
/// variance, so pooling k replicated samples scales it by exactly 1/sqrt(k).
struct MeanStderr {
  double mean = 0.0;
  double se = 0.0;
  long n = 0;
};

inline MeanStderr mean_stderr(const std::vector<double>& values) {
  MeanStderr out;
  out.n = static_cast<long>(values.size());
  if (out.n == 0) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(out.n);
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.se = std::sqrt(ss / static_cast<double>(out.n)) / std::sqrt(static_cast<double>(out.n));
  return out;
}

// Final-excess summary of the non-faulted trials of a run.
inline MeanStderr summarize_final_excess(const RunResult& res) {
  std::vector<double> finals;
  for (const auto& trial : res.trials)
    if (!trial.fault) finals.push_back(trial.final_excess);
  return mean_stderr(finals);
}

inline SimulationConfig apply_axis(SimulationConfig cfg, const std::string& axis,
                                   const std::string& value) {
  auto as_double = [&](const char* what) {
    try {
      return std::stod(value);
    } catch (...) {
      throw std::invalid_argument(std::string("sweep: bad ") + what + " value '" + value + "'");
    }
  };
  if (axis == "T" || axis == "horizon") {
    const long v = static_cast<long>(as_double("horizon"));
    if (v < 1) throw std::invalid_argument("sweep: horizon must be >= 1");
    cfg.optimizer.horizon = v;
    cfg.optimizer.eta = 0.0;  // re-resolve the default rate for the new horizon
  } else if (axis == "lambda") {
    const double v = as_double("lambda");
    cfg.schedule.lambda = v;
    cfg.aggregator.lambda = v;
  } else if (axis == "eta") {
    cfg.optimizer.eta = as_double("eta");
  } else if (axis == "aggregator") {
    std::string base = value;
    cfg.aggregator.ctma = false;
    if (const auto pos = base.find("+ctma"); pos != std::string::npos) {
      cfg.aggregator.ctma = true;
      base = base.substr(0, pos);
    }
    cfg.aggregator.base = parse_base_aggregator(base);
  } else if (axis == "attack") {
    if (value == "none")
      cfg.attack.reset();
    else
      cfg.attack = AttackSpec{parse_attack_kind(value),
                              cfg.attack ? cfg.attack->epsilon : 0.1};
  } else {
    throw std::invalid_argument("sweep: unknown axis '" + axis +
                                "' (expected T, lambda, aggregator, attack or eta)");
  }
  return cfg;
}

/// Re-runs the base configuration once per axis value and summarizes the
/// final excess loss across trials (mean and standard error).
inline std::vector<SweepPoint> sweep(const SimulationConfig& base, const std::string& axis,
                                     const std::vector<std::string>& values,
                                     const RunOptions& options = {}) {
  if (values.empty()) throw std::invalid_argument("sweep: no values given");
  std::vector<SweepPoint> points;
  for (const std::string& value : values) {
    const SimulationConfig cfg = apply_axis(base, axis, value);
    const RunResult res = run(cfg, options);
    SweepPoint p;
    p.value = value;
    for (const auto& trial : res.trials)
      if (trial.fault) p.faulted = true;
    const MeanStderr stats = summarize_final_excess(res);
    p.trials = stats.n;
    p.mean_final_excess = stats.mean;
    p.stderr_final_excess = stats.se;
    points.push_back(std::move(p));
  }
  return points;
}

}  // namespace asyncbyz
