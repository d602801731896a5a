// byzsim: simulator for robust aggregation under asynchronous, partially
// adversarial updates. Subcommands: run, aggregate, sweep, report.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "asyncbyz/config.hpp"
#include "asyncbyz/csv.hpp"
#include "asyncbyz/engine.hpp"
#include "asyncbyz/report.hpp"
#include "asyncbyz/version.hpp"

namespace fs = std::filesystem;
using namespace asyncbyz;

namespace {

std::string iso_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
  return buf;
}

struct CommonOpts {
  std::string config_path;
  std::string out_dir = ".";
  long trials = -1;
  long long seed = -1;
  int threads = 1;
  std::string assert_level;
};

SimulationConfig load_with_overrides(const CommonOpts& opts) {
  const ConfigFile file = ConfigFile::parse_file(opts.config_path);
  SimulationConfig sim = load_simulation_config(file);
  if (opts.trials > 0) sim.trials = opts.trials;
  if (opts.seed >= 0) sim.seed = static_cast<std::uint64_t>(opts.seed);
  if (!opts.assert_level.empty()) sim.assertion_level = parse_assertion_level(opts.assert_level);
  return sim;
}

void write_manifest(const fs::path& path, const SimulationConfig& sim,
                    const std::string& started, const std::string& finished,
                    const std::vector<std::string>& outputs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest '" + path.string() + "'");
  out << "config-hash = " << config_hash(sim) << "\n";
  out << "seed = " << sim.seed << "\n";
  out << "started = " << started << "\n";
  out << "finished = " << finished << "\n";
  out << "version.asyncbyz = " << kVersion << "\n";
  out << "version.trace-format = 1\n";
  for (const auto& o : outputs) out << "output = " << o << "\n";
}

int cmd_run(const CommonOpts& opts) {
  const SimulationConfig sim = load_with_overrides(opts);
  const std::string started = iso_now();

  RunOptions ropt;
  ropt.threads = opts.threads;
  const RunResult res = run(sim, ropt);

  fs::create_directories(opts.out_dir);
  const fs::path trace_path = fs::path(opts.out_dir) / "trace.csv";
  const fs::path summary_path = fs::path(opts.out_dir) / "summary.csv";
  const fs::path manifest_path = fs::path(opts.out_dir) / "manifest.txt";

  write_trace_csv(trace_path.string(), res.rows);

  bool faulted = false;
  for (const auto& trial : res.trials)
    if (trial.fault) {
      faulted = true;
      std::cerr << "trial " << trial.trial << " fault: " << *trial.fault << "\n";
    }
  const MeanStderr stats = summarize_final_excess(res);
  SweepPoint p;
  p.value = "run";
  p.trials = stats.n;
  p.mean_final_excess = stats.mean;
  p.stderr_final_excess = stats.se;
  std::vector<SweepPoint> points{p};
  write_summary_csv(summary_path.string(), "run", points);
  write_manifest(manifest_path, sim, started, iso_now(),
                 {trace_path.string(), summary_path.string()});

  std::cout << "config-hash " << config_hash(sim) << "\n";
  std::cout << "trials " << p.trials << " mean-final-excess " << fmt17(p.mean_final_excess)
            << " stderr " << fmt17(p.stderr_final_excess) << "\n";
  std::cout << "wrote " << trace_path.string() << "\n";
  return faulted ? 1 : 0;
}

int cmd_sweep(const CommonOpts& opts, const std::string& axis, const std::string& values_csv) {
  const SimulationConfig sim = load_with_overrides(opts);
  std::vector<std::string> values;
  std::istringstream ss(values_csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) values.push_back(tok);
  if (values.empty()) throw std::invalid_argument("sweep: --values must be a non-empty list");

  const std::string started = iso_now();
  fs::create_directories(opts.out_dir);

  RunOptions ropt;
  ropt.threads = opts.threads;

  // Per-value traces alongside the summary so `report` can compare them.
  std::vector<SweepPoint> points;
  std::vector<std::string> outputs;
  for (const std::string& value : values) {
    const SimulationConfig cfg = apply_axis(sim, axis, value);
    const RunResult res = run(cfg, ropt);
    std::string tag = value;
    for (char& c : tag)
      if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
    const fs::path trace_path = fs::path(opts.out_dir) / ("trace_" + axis + "_" + tag + ".csv");
    write_trace_csv(trace_path.string(), res.rows);
    outputs.push_back(trace_path.string());

    SweepPoint p;
    p.value = value;
    for (const auto& trial : res.trials)
      if (trial.fault) p.faulted = true;
    const MeanStderr stats = summarize_final_excess(res);
    p.trials = stats.n;
    p.mean_final_excess = stats.mean;
    p.stderr_final_excess = stats.se;
    std::cout << axis << "=" << value << " mean-final-excess " << fmt17(p.mean_final_excess)
              << " stderr " << fmt17(p.stderr_final_excess) << "\n";
    points.push_back(std::move(p));
  }

  const fs::path summary_path = fs::path(opts.out_dir) / "summary.csv";
  write_summary_csv(summary_path.string(), axis, points);
  outputs.push_back(summary_path.string());
  write_manifest(fs::path(opts.out_dir) / "manifest.txt", sim, started, iso_now(), outputs);
  std::cout << "wrote " << summary_path.string() << "\n";
  return 0;
}

int cmd_aggregate(const std::string& input_path) {
  std::ifstream in(input_path);
  if (!in) throw std::invalid_argument("cannot open '" + input_path + "'");
  const AggregateFileInput input = read_aggregate_input(in, input_path);
  const Vec out = aggregate(input.set, input.spec);
  std::string line;
  for (std::size_t k = 0; k < out.size(); ++k) line += (k ? " " : "") + fmt17(out[k]);
  std::cout << line << "\n";
  return 0;
}

int cmd_report(const std::vector<std::string>& traces, const std::string& plot_path) {
  if (traces.empty()) throw std::invalid_argument("report: no trace files given");

  std::vector<CurveSummary> curves;
  std::vector<std::vector<TraceRow>> all_rows;
  for (const std::string& path : traces) {
    auto rows = read_trace_csv(path);
    curves.push_back(summarize_trace(rows, fs::path(path).filename().string()));
    all_rows.push_back(std::move(rows));
  }
  for (std::size_t i = 1; i < curves.size(); ++i)
    if (!same_grid(curves[i], curves[0]))
      throw std::invalid_argument("report: traces do not share an iteration grid");

  if (curves.size() > 1) curves.push_back(pool_traces(all_rows, "pooled"));
  print_report_table(std::cout, curves);
  if (!plot_path.empty()) {
    write_svg_chart(plot_path, curves);
    std::cout << "wrote " << plot_path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"asynchronous robust-aggregation simulator"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string axis, values, input_path, plot_path;
  std::vector<std::string> trace_paths;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    if (needs_config)
      cmd->add_option("--config", opts.config_path, "experiment config file")->required();
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--trials", opts.trials, "override run.trials");
    cmd->add_option("--seed", opts.seed, "override run.seed");
    cmd->add_option("--threads", opts.threads, "trial-parallel workers");
    cmd->add_option("--assert-level", opts.assert_level, "off or debug");
  };

  CLI::App* c_run = app.add_subcommand("run", "execute one configuration");
  add_common(c_run, true);

  CLI::App* c_sweep = app.add_subcommand("sweep", "run a parameter sweep");
  add_common(c_sweep, true);
  c_sweep->add_option("--axis", axis, "T, lambda, aggregator, attack or eta")->required();
  c_sweep->add_option("--values", values, "comma-separated axis values")->required();

  CLI::App* c_agg = app.add_subcommand("aggregate", "aggregate one weighted vector file");
  c_agg->add_option("input", input_path, "file: 'd m lambda base ctma', then m x 'weight v1..vd'")
      ->required();

  CLI::App* c_rep = app.add_subcommand("report", "summarize trace files");
  c_rep->add_option("traces", trace_paths, "trace.csv files")->required();
  c_rep->add_option("--plot", plot_path, "write an SVG line chart here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? 2 : 0;
  }

  try {
    if (c_run->parsed()) return cmd_run(opts);
    if (c_sweep->parsed()) return cmd_sweep(opts, axis, values);
    if (c_agg->parsed()) return cmd_aggregate(input_path);
    if (c_rep->parsed()) return cmd_report(trace_paths, plot_path);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime fault: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
