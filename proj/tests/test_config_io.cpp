#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "asyncbyz/config.hpp"
#include "asyncbyz/csv.hpp"
#include "asyncbyz/report.hpp"
#include "test_util.hpp"

using namespace asyncbyz;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const char* kMinimalConfig = R"(
# minimal quadratic experiment
problem.kind = additive-noise-quadratic
problem.dimension = 6
schedule.kind = iid-categorical
schedule.m-honest = 3
optimizer.horizon = 200
run.trials = 2
run.seed = 7
)";

}  // namespace

TEST_CASE("config files parse with defaults applied") {
  const auto file = ConfigFile::parse(kMinimalConfig, "mini.cfg");
  const SimulationConfig sim = load_simulation_config(file);
  CHECK(sim.problem.dimension == 6);
  CHECK(sim.schedule.m_honest == 3);
  CHECK(sim.optimizer.horizon == 200);
  CHECK(sim.trials == 2);
  CHECK(sim.seed == 7);
  CHECK(sim.aggregator.base == BaseAggregator::WeightedMean);
  CHECK(sim.optimizer.eta == 0.0);  // resolved to the 1/(4LT) default at run time
}

TEST_CASE("validation failures carry the file, line, field and bound") {
  const std::string bad = "schedule.m-honest = 2\nschedule.lambda = 0.7\n";
  const auto file = ConfigFile::parse(bad, "exp.cfg");
  try {
    load_simulation_config(file);
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK_THAT(msg, ContainsSubstring("exp.cfg:2"));
    CHECK_THAT(msg, ContainsSubstring("schedule.lambda"));
    CHECK_THAT(msg, ContainsSubstring("< 0.5"));
  }
}

TEST_CASE("unknown keys and malformed lines are rejected") {
  CHECK_THROWS_AS(ConfigFile::parse("problem.kind additive", "x.cfg"), ConfigError);
  CHECK_THROWS_AS(ConfigFile::parse("a.b = 1\na.b = 2", "x.cfg"), ConfigError);

  const auto file = ConfigFile::parse("problem.typo-key = 3", "x.cfg");
  try {
    load_simulation_config(file);
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK_THAT(std::string(e.what()), ContainsSubstring("x.cfg:1"));
    CHECK_THAT(std::string(e.what()), ContainsSubstring("unknown key"));
  }

  const auto nonnum = ConfigFile::parse("problem.sigma = abc", "x.cfg");
  CHECK_THROWS_AS(load_simulation_config(nonnum), ConfigError);
}

TEST_CASE("config hash ignores field order and tracks content") {
  const auto a = load_simulation_config(ConfigFile::parse(kMinimalConfig, "a.cfg"));
  const std::string reordered = R"(
run.seed = 7
run.trials = 2
optimizer.horizon = 200
schedule.m-honest = 3
schedule.kind = iid-categorical
problem.dimension = 6
problem.kind = additive-noise-quadratic
)";
  const auto b = load_simulation_config(ConfigFile::parse(reordered, "b.cfg"));
  CHECK(config_hash(a) == config_hash(b));

  auto c = b;
  c.seed = 8;
  CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("trace csv round-trips bit-exactly") {
  auto g = testutil::rng(33);
  std::vector<TraceRow> rows;
  for (long i = 0; i < 200; ++i) {
    TraceRow r;
    r.trial = i % 4;
    r.t = i + 1;
    r.excess_loss = std::exp(testutil::runif(g, -20, 3));
    r.grad_error_sq = std::exp(testutil::runif(g, -20, 3));
    r.tau_max = static_cast<long>(g() % 17);
    r.honest_frac = testutil::runif(g, 0.5, 1.0);
    rows.push_back(r);
  }
  const auto path = std::filesystem::temp_directory_path() / "asyncbyz_roundtrip.csv";
  write_trace_csv(path.string(), rows);
  const auto back = read_trace_csv(path.string());
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].trial == rows[i].trial);
    CHECK(back[i].t == rows[i].t);
    CHECK(back[i].excess_loss == rows[i].excess_loss);
    CHECK(back[i].grad_error_sq == rows[i].grad_error_sq);
    CHECK(back[i].tau_max == rows[i].tau_max);
    CHECK(back[i].honest_frac == rows[i].honest_frac);
  }

  // summary statistics recomputed from the round-tripped rows are identical
  const auto s1 = summarize_trace(rows, "x");
  const auto s2 = summarize_trace(back, "x");
  CHECK(s1.mean == s2.mean);
  CHECK(s1.stderr_ == s2.stderr_);
  std::filesystem::remove(path);
}

TEST_CASE("trace csv rejects foreign schemas") {
  const auto path = std::filesystem::temp_directory_path() / "asyncbyz_bad.csv";
  {
    std::ofstream out(path);
    out << "a,b,c\n1,2,3\n";
  }
  CHECK_THROWS_AS(read_trace_csv(path.string()), std::invalid_argument);
  std::filesystem::remove(path);
}

TEST_CASE("pooling a duplicated trace shrinks the standard error by sqrt(2)") {
  SimulationConfig cfg;
  cfg.problem.dimension = 4;
  cfg.schedule.m_honest = 2;
  cfg.optimizer.horizon = 150;
  cfg.optimizer.domain_radius = cfg.problem.domain_radius;
  cfg.trials = 8;
  cfg.metric_stride = 10;
  const RunResult res = run(cfg);

  const auto one = summarize_trace(res.rows, "one");
  const auto two = pool_traces({res.rows, res.rows}, "two");
  REQUIRE(one.final_stderr > 0.0);
  CHECK_THAT(two.final_stderr * std::sqrt(2.0), WithinRel(one.final_stderr, 1e-6));
  CHECK_THAT(two.final_mean, WithinRel(one.final_mean, 1e-12));
}

TEST_CASE("svg chart renders one polyline per curve") {
  CurveSummary a;
  a.label = "alpha";
  a.trials = 1;
  for (long t = 1; t <= 20; ++t) {
    a.ts.push_back(t * 10);
    a.mean.push_back(1.0 / t);
    a.stderr_.push_back(0.0);
  }
  CurveSummary b = a;
  b.label = "beta";
  for (double& v : b.mean) v *= 3.0;

  const auto path = std::filesystem::temp_directory_path() / "asyncbyz_chart.svg";
  write_svg_chart(path.string(), std::vector<CurveSummary>{a, b});
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string svg = ss.str();
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(std::count(svg.begin(), svg.end(), '\n') > 10);
  std::size_t polylines = 0;
  for (std::size_t pos = 0; (pos = svg.find("<polyline", pos)) != std::string::npos; ++pos)
    ++polylines;
  CHECK(polylines == 2);
  CHECK(svg.find("alpha") != std::string::npos);
  std::filesystem::remove(path);
}

TEST_CASE("aggregation input files parse and reject dimension mismatches") {
  std::istringstream good("1 3 0.333333333333333315 weighted-gm 1\n"
                          "1 0\n1 0.1\n1 100\n");
  const auto input = read_aggregate_input(good, "t");
  CHECK(input.set.size() == 3);
  CHECK(input.spec.ctma);
  CHECK(input.spec.base == BaseAggregator::WeightedGm);

  std::istringstream short_row("2 2 0 weighted-mean 0\n1 0.5 0.5\n1 0.25\n");
  CHECK_THROWS_AS(read_aggregate_input(short_row, "t"), std::invalid_argument);

  std::istringstream trailing("1 2 0 weighted-mean 0\n1 0.5\n1 0.25\n0.7\n");
  CHECK_THROWS_AS(read_aggregate_input(trailing, "t"), std::invalid_argument);

  std::istringstream badbase("1 1 0 krum 0\n1 0.5\n");
  CHECK_THROWS_AS(read_aggregate_input(badbase, "t"), std::invalid_argument);
}
