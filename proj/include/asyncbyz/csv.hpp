#pragma once

#include <cstdio>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "asyncbyz/engine.hpp"

namespace asyncbyz {

inline constexpr const char* kTraceHeader = "trial,t,excess_loss,grad_error_sq,tau_max,honest_frac";

inline std::string trace_csv_text(std::span<const TraceRow> rows) {
  std::string out = kTraceHeader;
  out += '\n';
  char buf[160];
  for (const TraceRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%ld,%ld,%.17g,%.17g,%ld,%.17g\n", r.trial, r.t,
                  r.excess_loss, r.grad_error_sq, r.tau_max, r.honest_frac);
    out += buf;
  }
  return out;
}

inline void write_trace_csv(const std::string& path, std::span<const TraceRow> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << trace_csv_text(rows);
}

inline std::vector<TraceRow> read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open trace '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader)
    throw std::invalid_argument(path + ": unexpected trace schema (header mismatch)");
  std::vector<TraceRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    TraceRow r;
    std::istringstream ss(line);
    char c = 0;
    if (!(ss >> r.trial >> c >> r.t >> c >> r.excess_loss >> c >> r.grad_error_sq >> c >>
          r.tau_max >> c >> r.honest_frac))
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": malformed row");
    rows.push_back(r);
  }
  return rows;
}

struct AggregateFileInput {
  WeightedVectorSet set;
  AggregatorSpec spec;
};

/// One-shot aggregation input: header `d m lambda base ctma`, then m rows of
/// `weight v1 .. vd`.
inline AggregateFileInput read_aggregate_input(std::istream& in, const std::string& name) {
  int d = 0, m = 0;
  double lambda = 0.0;
  std::string base, ctma_tok;
  if (!(in >> d >> m >> lambda >> base >> ctma_tok))
    throw std::invalid_argument(name + ": header must be 'd m lambda base ctma'");
  if (d < 1 || m < 1) throw std::invalid_argument(name + ": d and m must be >= 1");

  AggregateFileInput input;
  input.spec.base = parse_base_aggregator(base);
  input.spec.lambda = lambda;
  if (ctma_tok == "1" || ctma_tok == "true" || ctma_tok == "on")
    input.spec.ctma = true;
  else if (ctma_tok == "0" || ctma_tok == "false" || ctma_tok == "off")
    input.spec.ctma = false;
  else
    throw std::invalid_argument(name + ": ctma flag must be 0/1/true/false");
  input.spec.validate();

  for (int i = 0; i < m; ++i) {
    double w = 0.0;
    if (!(in >> w))
      throw std::invalid_argument(name + ": expected weight for row " + std::to_string(i + 1));
    Vec v(d);
    for (int k = 0; k < d; ++k)
      if (!(in >> v[k]))
        throw std::invalid_argument(name + ": row " + std::to_string(i + 1) +
                                    " has fewer than d=" + std::to_string(d) + " coordinates");
    input.set.push_back(std::move(v), w);
  }
  double extra;
  if (in >> extra)
    throw std::invalid_argument(name + ": trailing data (dimension mismatch?)");
  return input;
}

inline void write_summary_csv(const std::string& path, const std::string& axis,
                              std::span<const SweepPoint> points) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "axis,value,trials,mean_final_excess,stderr_final_excess\n";
  char buf[160];
  for (const SweepPoint& p : points) {
    std::snprintf(buf, sizeof buf, ",%ld,%.17g,%.17g\n", p.trials, p.mean_final_excess,
                  p.stderr_final_excess);
    out << axis << ',' << p.value << buf;
  }
}

}  // namespace asyncbyz
