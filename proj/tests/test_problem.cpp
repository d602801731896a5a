#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "asyncbyz/problem.hpp"
#include "asyncbyz/rng.hpp"
#include "test_util.hpp"

using namespace asyncbyz;
using Catch::Matchers::WithinAbs;

namespace {

ProblemParams quadratic_params(double sigma = 1.0) {
  ProblemParams p;
  p.kind = ProblemKind::AdditiveNoiseQuadratic;
  p.dimension = 8;
  p.l_smooth = 1.0;
  p.mu_min = 0.1;
  p.sigma = sigma;
  return p;
}

Vec random_domain_point(const Problem& p, std::mt19937_64& g, double frac = 0.8) {
  Vec x(p.dimension());
  for (double& v : x) v = testutil::rnorm(g);
  scale(x, frac * p.radius() * std::pow(testutil::runif(g, 0, 1), 1.0 / p.dimension()) / norm(x));
  return x;
}

}  // namespace

TEST_CASE("sample tokens replay bit-identically") {
  const Problem p = Problem::make(quadratic_params(), 7);
  RngStream s1(123), s2(123);
  const SampleToken a = p.draw_sample(s1);
  const SampleToken b = p.draw_sample(s2);
  CHECK(a.key == b.key);

  const Vec x(p.dimension(), 0.5);
  CHECK(p.stochastic_gradient(x, a) == p.stochastic_gradient(x, b));
  CHECK(p.stochastic_gradient(x, a) == p.stochastic_gradient(x, a));
}

TEST_CASE("distinct draws decorrelate") {
  const Problem p = Problem::make(quadratic_params(), 7);
  RngStream stream(9);
  const Vec x(p.dimension(), 0.0);
  const Vec g0 = p.true_gradient(x);

  const int n = 10000;
  double sxy = 0, sx = 0, sy = 0, sxx = 0, syy = 0;
  for (int i = 0; i < n; ++i) {
    const Vec ga = sub(p.stochastic_gradient(x, p.draw_sample(stream)), g0);
    const Vec gb = sub(p.stochastic_gradient(x, p.draw_sample(stream)), g0);
    const double a = ga[0], b = gb[0];
    sx += a;
    sy += b;
    sxx += a * a;
    syy += b * b;
    sxy += a * b;
  }
  const double corr = (n * sxy - sx * sy) /
                      std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
  CHECK(std::abs(corr) < 0.05);
}

TEST_CASE("additive noise has the declared second moment") {
  const double sigma = 2.0;
  const Problem p = Problem::make(quadratic_params(sigma), 21);
  RngStream stream(4);
  const Vec x(p.dimension(), 0.0);
  const Vec g0 = p.true_gradient(x);

  const int n = 20000;
  double sum = 0, sum_sq = 0;
  for (int i = 0; i < n; ++i) {
    const double nsq = dist_sq(p.stochastic_gradient(x, p.draw_sample(stream)), g0);
    sum += nsq;
    sum_sq += nsq * nsq;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sum_sq / n - mean * mean) / n);
  CHECK_THAT(mean, WithinAbs(sigma * sigma, 3.0 * se));
}

TEST_CASE("identity curvature gives the identity gradient map") {
  ProblemParams params = quadratic_params(0.0);  // noiseless
  params.dimension = 2;
  params.mu_min = 1.0;  // eigenvalues pinned to [1, 1]: curvature is I
  params.x_star_at_origin = true;
  const Problem p = Problem::make(params, 3);

  RngStream stream(1);
  const Vec g = p.stochastic_gradient({1.0, 1.0}, p.draw_sample(stream));
  CHECK_THAT(g[0], WithinAbs(1.0, 1e-12));
  CHECK_THAT(g[1], WithinAbs(1.0, 1e-12));

  CHECK(p.excess_loss(p.optimum()) == 0.0);
  CHECK_THAT(p.excess_loss({1.0, 0.0}), WithinAbs(0.5, 1e-12));
}

TEST_CASE("stochastic gradients are unbiased") {
  std::vector<Problem> problems;
  problems.push_back(Problem::make(quadratic_params(1.5), 11));
  ProblemParams rc = quadratic_params();
  rc.kind = ProblemKind::RandomCurvatureQuadratic;
  rc.sigma_l = 0.4;
  problems.push_back(Problem::make(rc, 12));

  auto g = testutil::rng(5);
  for (const Problem& p : problems) {
    RngStream stream(17);
    for (int rep = 0; rep < 5; ++rep) {
      const Vec x = random_domain_point(p, g);
      const Vec expect = p.true_gradient(x);
      const int n = 20000;
      Vec mean(p.dimension(), 0.0);
      double var_acc = 0.0;
      for (int i = 0; i < n; ++i) {
        const Vec gi = p.stochastic_gradient(x, p.draw_sample(stream));
        axpy(1.0 / n, gi, mean);
        var_acc += dist_sq(gi, expect);
      }
      const double se = std::sqrt(var_acc / n / n);  // vector-level 1-sigma scale
      CHECK(dist(mean, expect) < 4.0 * se + 1e-12);
    }
  }
}

TEST_CASE("gradient noise respects the variance bound across the domain") {
  ProblemParams rc = quadratic_params();
  rc.kind = ProblemKind::RandomCurvatureQuadratic;
  rc.sigma_l = 0.3;
  ProblemParams lg;
  lg.kind = ProblemKind::SyntheticLogistic;
  lg.dimension = 6;
  lg.logistic_pool = 512;
  for (const Problem& p : {Problem::make(quadratic_params(1.0), 31), Problem::make(rc, 32),
                           Problem::make(lg, 33)}) {
    RngStream stream(71);
    auto g = testutil::rng(6);
    for (int rep = 0; rep < 10; ++rep) {
      const Vec x = random_domain_point(p, g);
      const Vec expect = p.true_gradient(x);
      double acc = 0.0;
      const int n = 2000;
      for (int i = 0; i < n; ++i)
        acc += dist_sq(p.stochastic_gradient(x, p.draw_sample(stream)), expect);
      CHECK(acc / n <= p.sigma() * p.sigma() * 1.05);
    }
  }
}

TEST_CASE("per-sample smoothness holds on random pairs") {
  ProblemParams rc = quadratic_params();
  rc.kind = ProblemKind::RandomCurvatureQuadratic;
  rc.sigma_l = 0.5;
  ProblemParams lg;
  lg.kind = ProblemKind::SyntheticLogistic;
  lg.dimension = 6;
  lg.logistic_pool = 512;

  for (const Problem& p : {Problem::make(quadratic_params(), 41), Problem::make(rc, 42),
                           Problem::make(lg, 43)}) {
    RngStream stream(5);
    auto g = testutil::rng(7);
    for (int rep = 0; rep < 100; ++rep) {
      const Vec x = random_domain_point(p, g);
      const Vec y = random_domain_point(p, g);
      const SampleToken tok = p.draw_sample(stream);
      const double lhs = dist(p.stochastic_gradient(x, tok), p.stochastic_gradient(y, tok));
      CHECK(lhs <= p.l_smooth() * dist(x, y) * (1.0 + 1e-9));
    }
    CHECK(p.sigma_l() <= p.l_smooth() + 1e-12);
  }
}

TEST_CASE("shared-sample noise difference is smoothness-noise bounded") {
  ProblemParams rc = quadratic_params();
  rc.kind = ProblemKind::RandomCurvatureQuadratic;
  rc.sigma_l = 0.35;
  const Problem p = Problem::make(rc, 52);
  RngStream stream(8);
  auto g = testutil::rng(9);
  for (int rep = 0; rep < 100; ++rep) {
    const Vec x = random_domain_point(p, g);
    const Vec y = random_domain_point(p, g);
    const SampleToken tok = p.draw_sample(stream);
    const Vec nx = sub(p.stochastic_gradient(x, tok), p.true_gradient(x));
    const Vec ny = sub(p.stochastic_gradient(y, tok), p.true_gradient(y));
    CHECK(dist(nx, ny) <= rc.sigma_l * dist(x, y) * (1.0 + 1e-9));
  }
}

TEST_CASE("logistic pool has a certified interior optimum") {
  ProblemParams lg;
  lg.kind = ProblemKind::SyntheticLogistic;
  lg.dimension = 6;
  lg.logistic_pool = 1024;
  const Problem p = Problem::make(lg, 99);

  CHECK(p.g_star() <= 1e-8);
  CHECK(norm(p.optimum()) < 0.9 * p.radius());
  CHECK(p.excess_loss(p.optimum()) <= 1e-9);

  // excess loss is nonnegative everywhere we look
  auto g = testutil::rng(10);
  RngStream stream(3);
  for (int rep = 0; rep < 50; ++rep)
    CHECK(p.excess_loss(random_domain_point(p, g)) >= -1e-9);
}

TEST_CASE("label-flipped oracle negates the quadratic target") {
  ProblemParams params = quadratic_params(0.0);
  params.x_star_at_origin = false;
  const Problem p = Problem::make(params, 61);
  RngStream stream(2);
  const SampleToken tok = p.draw_sample(stream);
  const Vec x(p.dimension(), 0.1);
  // corrupted target -x_star shifts the gradient by 2*A*x_star
  const Vec honest = p.stochastic_gradient(x, tok);
  const Vec flipped = p.stochastic_gradient_label_flipped(x, tok);
  const Vec a_xstar = p.true_gradient(scaled(p.optimum(), 2.0));  // A * x_star
  for (int k = 0; k < p.dimension(); ++k)
    CHECK_THAT(flipped[k] - honest[k], WithinAbs(2.0 * a_xstar[k], 1e-9));
}

TEST_CASE("domain violations are rejected") {
  const Problem p = Problem::make(quadratic_params(), 71);
  RngStream stream(1);
  Vec outside(p.dimension(), 0.0);
  outside[0] = p.radius() * 1.5;
  CHECK_THROWS_AS(p.stochastic_gradient(outside, p.draw_sample(stream)), std::invalid_argument);
  CHECK_THROWS_AS(p.true_gradient(Vec(p.dimension() + 1, 0.0)), std::invalid_argument);
}
