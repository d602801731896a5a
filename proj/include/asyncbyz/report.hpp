#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "asyncbyz/csv.hpp"
#include "asyncbyz/engine.hpp"

namespace asyncbyz {

/// Mean and standard error of the excess loss at each recorded iteration,
/// across the trials of one trace.
struct CurveSummary {
  std::string label;
  long trials = 0;
  std::vector<long> ts;
  std::vector<double> mean;
  std::vector<double> stderr_;
  double final_mean = 0.0;
  double final_stderr = 0.0;
};

inline CurveSummary summarize_trace(std::span<const TraceRow> rows, const std::string& label) {
  if (rows.empty()) throw std::invalid_argument("summarize: empty trace");
  std::map<long, std::vector<double>> by_t;
  long max_trial = 0;
  for (const TraceRow& r : rows) {
    if (std::isnan(r.excess_loss)) continue;  // diagnostic rows from faulted trials
    by_t[r.t].push_back(r.excess_loss);
    max_trial = std::max(max_trial, r.trial);
  }
  if (by_t.empty()) throw std::invalid_argument("summarize: no usable rows in trace");

  CurveSummary cs;
  cs.label = label;
  cs.trials = max_trial + 1;
  for (const auto& [t, vals] : by_t) {
    const MeanStderr stats = mean_stderr(vals);
    cs.ts.push_back(t);
    cs.mean.push_back(stats.mean);
    cs.stderr_.push_back(stats.se);
  }
  cs.final_mean = cs.mean.back();
  cs.final_stderr = cs.stderr_.back();
  return cs;
}

// Pools several same-schema traces as replicates of one configuration.
// Requires matching iteration grids.
inline CurveSummary pool_traces(const std::vector<std::vector<TraceRow>>& traces,
                                const std::string& label) {
  std::vector<TraceRow> all;
  long trial_offset = 0;
  for (const auto& rows : traces) {
    long max_trial = 0;
    for (TraceRow r : rows) {
      max_trial = std::max(max_trial, r.trial);
      r.trial += trial_offset;
      all.push_back(r);
    }
    trial_offset += max_trial + 1;
  }
  return summarize_trace(all, label);
}

inline bool same_grid(const CurveSummary& a, const CurveSummary& b) { return a.ts == b.ts; }

inline void print_report_table(std::ostream& os, std::span<const CurveSummary> curves) {
  os << "label,trials,final_mean_excess,final_stderr\n";
  char buf[160];
  for (const CurveSummary& c : curves) {
    std::snprintf(buf, sizeof buf, ",%ld,%.17g,%.17g\n", c.trials, c.final_mean,
                  c.final_stderr);
    os << c.label << buf;
  }
}

/// Minimal self-contained SVG line chart: excess loss (log scale) against
/// iteration, one polyline per curve.
inline void write_svg_chart(const std::string& path, std::span<const CurveSummary> curves,
                            const std::string& title = "excess loss") {
  if (curves.empty()) throw std::invalid_argument("svg: no curves");
  const double width = 960, height = 600;
  const double ml = 80, mr = 220, mt = 50, mb = 60;
  const double pw = width - ml - mr, ph = height - mt - mb;

  double tmin = 1e300, tmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& c : curves)
    for (std::size_t i = 0; i < c.ts.size(); ++i) {
      tmin = std::min(tmin, static_cast<double>(c.ts[i]));
      tmax = std::max(tmax, static_cast<double>(c.ts[i]));
      const double y = std::max(c.mean[i], 1e-300);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (tmax <= tmin) tmax = tmin + 1;
  double ly0 = std::floor(std::log10(ymin));
  double ly1 = std::ceil(std::log10(ymax));
  if (ly1 <= ly0) ly1 = ly0 + 1;

  auto px = [&](double t) { return ml + pw * (t - tmin) / (tmax - tmin); };
  auto py = [&](double y) {
    const double ly = std::log10(std::max(y, 1e-300));
    return mt + ph * (1.0 - (ly - ly0) / (ly1 - ly0));
  };

  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  char buf[512];
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf,
                "<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" font-size=\"16\">%s</text>\n",
                ml, mt - 20, title.c_str());
  out << buf;

  // axes and ticks
  std::snprintf(buf, sizeof buf,
                "<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" fill=\"none\" "
                "stroke=\"black\"/>\n",
                ml, mt, pw, ph);
  out << buf;
  for (double e = ly0; e <= ly1 + 1e-9; e += 1.0) {
    const double y = py(std::pow(10.0, e));
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"#dddddd\"/>"
                  "<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" font-size=\"11\" "
                  "text-anchor=\"end\">1e%g</text>\n",
                  ml, y, ml + pw, y, ml - 6, y + 4, e);
    out << buf;
  }
  for (int i = 0; i <= 5; ++i) {
    const double t = tmin + (tmax - tmin) * i / 5.0;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" font-size=\"11\" "
                  "text-anchor=\"middle\">%g</text>\n",
                  px(t), mt + ph + 18, t);
    out << buf;
  }

  for (std::size_t ci = 0; ci < curves.size(); ++ci) {
    const auto& c = curves[ci];
    const char* color = palette[ci % 8];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < c.ts.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(static_cast<double>(c.ts[i])),
                    py(c.mean[i]));
      out << buf;
    }
    out << "\"/>\n";
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"%s\" "
                  "stroke-width=\"3\"/><text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" "
                  "font-size=\"12\">%s</text>\n",
                  ml + pw + 10, mt + 16.0 * ci + 8, ml + pw + 34, mt + 16.0 * ci + 8, color,
                  ml + pw + 40, mt + 16.0 * ci + 12, c.label.c_str());
    out << buf;
  }
  out << "</svg>\n";
}

}  // namespace asyncbyz
