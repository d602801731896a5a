#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "asyncbyz/rng.hpp"

namespace asyncbyz {

enum class ScheduleKind { IidCategorical, SquaredId, RoundRobin, TraceFile, BurstThenLambda };

inline std::string to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::IidCategorical: return "iid-categorical";
    case ScheduleKind::SquaredId: return "squared-id";
    case ScheduleKind::RoundRobin: return "round-robin";
    case ScheduleKind::TraceFile: return "trace-file";
    case ScheduleKind::BurstThenLambda: return "burst-then-lambda";
  }
  return "?";
}

inline ScheduleKind parse_schedule_kind(const std::string& s) {
  if (s == "iid-categorical") return ScheduleKind::IidCategorical;
  if (s == "squared-id") return ScheduleKind::SquaredId;
  if (s == "round-robin") return ScheduleKind::RoundRobin;
  if (s == "trace-file") return ScheduleKind::TraceFile;
  if (s == "burst-then-lambda") return ScheduleKind::BurstThenLambda;
  throw std::invalid_argument("unknown schedule kind '" + s + "'");
}

/// Arrival model. Workers are indexed 0..m-1 with the honest ones first.
/// Categorical kinds draw each arrival independently: honest worker i gets
/// mass (1 - lambda) * p_h(i) and adversarial worker j gets lambda * p_b(j),
/// with p proportional to the in-group id (or its square). Explicit
/// probability overrides are accepted and validated to sum to one.
struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::IidCategorical;
  int m_honest = 1;
  int m_byzantine = 0;
  double lambda = 0.0;  // adversarial update fraction, < 1/2
  std::vector<double> probs_honest;     // optional; in-group arrival probabilities
  std::vector<double> probs_byzantine;  // optional
  std::string trace_path;
  long horizon = 0;  // needed by burst-then-lambda to place the onset

  int total_workers() const { return m_honest + m_byzantine; }

  void validate() const {
    if (m_honest < 1) throw std::invalid_argument("schedule.m-honest must be >= 1");
    if (m_byzantine < 0) throw std::invalid_argument("schedule.m-byzantine must be >= 0");
    if (!(lambda >= 0.0 && lambda < 0.5))
      throw std::invalid_argument("schedule.lambda must be in [0, 0.5), i.e. < 0.5");
    if (kind == ScheduleKind::TraceFile && trace_path.empty())
      throw std::invalid_argument("schedule.trace-path required for trace-file schedules");
    if (kind == ScheduleKind::BurstThenLambda && horizon < 1)
      throw std::invalid_argument("schedule.horizon must be set for burst-then-lambda");
    if (kind == ScheduleKind::RoundRobin && m_byzantine > 0 &&
        lambda + 1e-12 < static_cast<double>(m_byzantine) / total_workers())
      throw std::invalid_argument(
          "schedule.lambda must cover m-byzantine/m for round-robin schedules");
    auto check_probs = [](const std::vector<double>& p, int m, const char* name) {
      if (p.empty()) return;
      if (static_cast<int>(p.size()) != m)
        throw std::invalid_argument(std::string(name) + " length must match worker count");
      double total = 0.0;
      for (double v : p) {
        if (!(v >= 0.0)) throw std::invalid_argument(std::string(name) + " must be >= 0");
        total += v;
      }
      if (std::abs(total - 1.0) > 1e-12)
        throw std::invalid_argument(std::string(name) + " must sum to 1 within 1e-12");
    };
    check_probs(probs_honest, m_honest, "schedule.probs-honest");
    check_probs(probs_byzantine, m_byzantine, "schedule.probs-byzantine");
  }
};

struct ArrivalEvent {
  long t = 0;       // 1-based server iteration
  int worker = 0;   // 0-based, honest workers first
  bool is_byzantine = false;
  long tau = 0;     // iterations since this worker's previous arrival (first: t)
};

struct EndOfTrace : std::runtime_error {
  EndOfTrace() : std::runtime_error("schedule trace exhausted") {}
};

class Scheduler {
 public:
  Scheduler(const ScheduleSpec& spec, std::uint64_t seed) : spec_(spec), rng_(seed) {
    spec_.validate();
    last_arrival_.assign(spec_.total_workers(), 0);
    if (spec_.kind == ScheduleKind::TraceFile) {
      load_trace(spec_.trace_path);
    } else if (spec_.kind != ScheduleKind::RoundRobin) {
      build_categorical();
    }
    if (spec_.kind == ScheduleKind::BurstThenLambda)
      burst_onset_ = static_cast<long>(
          std::ceil((1.0 - spec_.lambda) * static_cast<double>(spec_.horizon)));
  }

  const ScheduleSpec& spec() const { return spec_; }
  long byzantine_arrivals() const { return t_byz_; }

  ArrivalEvent next_arrival() {
    ++t_;
    ArrivalEvent ev;
    ev.t = t_;
    switch (spec_.kind) {
      case ScheduleKind::RoundRobin:
        ev.worker = static_cast<int>((t_ - 1) % spec_.total_workers());
        break;
      case ScheduleKind::TraceFile: {
        if (trace_pos_ >= trace_.size()) throw EndOfTrace{};
        ev.worker = trace_[trace_pos_++];
        break;
      }
      case ScheduleKind::BurstThenLambda:
      case ScheduleKind::IidCategorical:
      case ScheduleKind::SquaredId:
        ev.worker = draw_budgeted();
        break;
    }
    ev.is_byzantine = ev.worker >= spec_.m_honest;
    ev.tau = t_ - last_arrival_[ev.worker];
    last_arrival_[ev.worker] = t_;
    if (ev.is_byzantine) ++t_byz_;
    return ev;
  }

 private:
  bool budget_allows_byzantine() const {
    return spec_.m_byzantine > 0 && spec_.lambda > 0.0 &&
           static_cast<double>(t_byz_ + 1) <=
               spec_.lambda * static_cast<double>(t_) + 1e-12;
  }

  // iid kinds: adversarial draws are re-drawn while accepting one would break
  // the per-prefix budget t_B + 1 <= lambda * t. This keeps honest marginals
  // intact and, as a side effect, guarantees the first arrivals are honest.
  // The burst kind holds adversaries back until the onset, then lets them
  // spend the accumulated budget as fast as it allows (a concentrated block).
  int draw_budgeted() {
    if (spec_.kind == ScheduleKind::BurstThenLambda) {
      if (t_ >= burst_onset_ && budget_allows_byzantine())
        return spec_.m_honest + draw_group(cum_byz_);
      return draw_group(cum_honest_);
    }
    for (;;) {
      const bool byz = rng_.uniform01() < byz_mass_;
      if (!byz) return draw_group(cum_honest_);
      if (budget_allows_byzantine()) return spec_.m_honest + draw_group(cum_byz_);
    }
  }

  int draw_group(const std::vector<double>& cum) {
    const double u = rng_.uniform01();
    const auto it = std::upper_bound(cum.begin(), cum.end(), u);
    const std::size_t i = std::min<std::size_t>(it - cum.begin(), cum.size() - 1);
    return static_cast<int>(i);
  }

  void build_categorical() {
    byz_mass_ = spec_.m_byzantine > 0 ? spec_.lambda : 0.0;
    auto group_cum = [&](int count, const std::vector<double>& expl) {
      std::vector<double> cum(count, 1.0);
      if (count == 0) return cum;
      double c = 0.0;
      double denom = 0.0;
      for (int i = 1; i <= count; ++i)
        denom += spec_.kind == ScheduleKind::SquaredId ? double(i) * i : double(i);
      for (int i = 1; i <= count; ++i) {
        const double p =
            !expl.empty()
                ? expl[i - 1]
                : (spec_.kind == ScheduleKind::SquaredId ? double(i) * i : double(i)) / denom;
        c += p;
        cum[i - 1] = c;
      }
      cum.back() = 1.0;
      return cum;
    };
    cum_honest_ = group_cum(spec_.m_honest, spec_.probs_honest);
    cum_byz_ = group_cum(spec_.m_byzantine, spec_.probs_byzantine);
  }

  void load_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open trace file '" + path + "'");
    std::string line;
    long expect_t = 1;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ss(line);
      long t = 0;
      int worker = 0, is_byz = 0;
      char c1 = 0, c2 = 0;
      if (!(ss >> t >> c1 >> worker >> c2 >> is_byz) || c1 != ',' || c2 != ',')
        throw std::invalid_argument("trace file: malformed line '" + line + "'");
      if (t != expect_t)
        throw std::invalid_argument("trace file: iterations must be consecutive from 1");
      ++expect_t;
      const int w0 = worker - 1;  // file uses 1-based worker ids
      if (w0 < 0 || w0 >= spec_.total_workers())
        throw std::invalid_argument("trace file: worker id out of range");
      if ((w0 >= spec_.m_honest) != (is_byz != 0))
        throw std::invalid_argument("trace file: is_byz flag inconsistent with worker id");
      trace_.push_back(w0);
    }
    if (trace_.empty()) throw std::invalid_argument("trace file: no events");
  }

  ScheduleSpec spec_;
  RngStream rng_;
  double byz_mass_ = 0.0;
  std::vector<double> cum_honest_;
  std::vector<double> cum_byz_;
  std::vector<int> trace_;
  std::size_t trace_pos_ = 0;
  std::vector<long> last_arrival_;
  long t_ = 0;
  long t_byz_ = 0;
  long burst_onset_ = 0;
};

inline void write_trace_file(const std::string& path, std::span<const ArrivalEvent> events) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace file '" + path + "'");
  for (const ArrivalEvent& ev : events)
    out << ev.t << ',' << ev.worker + 1 << ',' << (ev.is_byzantine ? 1 : 0) << '\n';
}

struct DelayStats {
  std::vector<long> tau_max_per_t;  // max over workers of the latest inter-arrival gap
  double mu_max = 0.0;              // time average of tau_max_per_t
  double k_estimate = 1.0;          // max over workers of max(gap)/min(gap), steady gaps only
};

inline DelayStats delay_stats(std::span<const ArrivalEvent> events) {
  DelayStats stats;
  if (events.empty()) return stats;

  int n_workers = 0;
  for (const ArrivalEvent& ev : events) n_workers = std::max(n_workers, ev.worker + 1);

  std::vector<long> gap(n_workers, 0);          // latest gap, first arrival included
  std::vector<long> arrivals(n_workers, 0);
  std::vector<long> gap_min(n_workers, 0), gap_max(n_workers, 0);

  stats.tau_max_per_t.reserve(events.size());
  double mu_sum = 0.0;
  for (const ArrivalEvent& ev : events) {
    gap[ev.worker] = ev.tau;
    arrivals[ev.worker] += 1;
    if (arrivals[ev.worker] >= 2) {  // steady-state gaps: second arrival onward
      if (gap_min[ev.worker] == 0 || ev.tau < gap_min[ev.worker]) gap_min[ev.worker] = ev.tau;
      gap_max[ev.worker] = std::max(gap_max[ev.worker], ev.tau);
    }
    long tau_max = 0;
    for (long g : gap) tau_max = std::max(tau_max, g);
    stats.tau_max_per_t.push_back(tau_max);
    mu_sum += static_cast<double>(tau_max);
  }
  stats.mu_max = mu_sum / static_cast<double>(events.size());

  for (int w = 0; w < n_workers; ++w)
    if (gap_min[w] > 0)
      stats.k_estimate = std::max(
          stats.k_estimate, static_cast<double>(gap_max[w]) / static_cast<double>(gap_min[w]));
  return stats;
}

}  // namespace asyncbyz
