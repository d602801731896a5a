#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "asyncbyz/rng.hpp"
#include "asyncbyz/vec.hpp"

namespace asyncbyz {

enum class ProblemKind { AdditiveNoiseQuadratic, RandomCurvatureQuadratic, SyntheticLogistic };

inline std::string to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::AdditiveNoiseQuadratic: return "additive-noise-quadratic";
    case ProblemKind::RandomCurvatureQuadratic: return "random-curvature-quadratic";
    case ProblemKind::SyntheticLogistic: return "synthetic-logistic";
  }
  return "?";
}

inline ProblemKind parse_problem_kind(const std::string& s) {
  if (s == "additive-noise-quadratic") return ProblemKind::AdditiveNoiseQuadratic;
  if (s == "random-curvature-quadratic") return ProblemKind::RandomCurvatureQuadratic;
  if (s == "synthetic-logistic") return ProblemKind::SyntheticLogistic;
  throw std::invalid_argument("unknown problem kind '" + s + "'");
}

struct ProblemParams {
  ProblemKind kind = ProblemKind::AdditiveNoiseQuadratic;
  int dimension = 20;
  double l_smooth = 1.0;      // per-sample smoothness bound L
  double mu_min = 0.1;        // smallest curvature eigenvalue (quadratics)
  double sigma = 1.0;         // gradient noise scale (quadratics: set directly)
  double sigma_l = 0.0;       // smoothness-noise scale (random-curvature only)
  double domain_radius = 10.0;
  bool x_star_at_origin = false;  // otherwise drawn uniformly in the R/2 ball
  int logistic_pool = 4096;

  void validate() const {
    if (dimension < 1) throw std::invalid_argument("problem.dimension must be >= 1");
    if (!(l_smooth > 0.0)) throw std::invalid_argument("problem.l-smooth must be > 0");
    if (!(mu_min > 0.0 && mu_min <= l_smooth))
      throw std::invalid_argument("problem.mu-min must be in (0, l-smooth]");
    if (!(sigma >= 0.0)) throw std::invalid_argument("problem.sigma must be >= 0");
    if (!(sigma_l >= 0.0 && sigma_l <= l_smooth))
      throw std::invalid_argument("problem.sigma-l must be in [0, l-smooth]");
    if (!(domain_radius > 0.0)) throw std::invalid_argument("problem.domain-radius must be > 0");
    if (logistic_pool < 2) throw std::invalid_argument("problem.logistic-pool must be >= 2");
  }
};

/// Opaque handle for one data draw. Re-evaluating the same token at the same
/// point is bit-identical; the payload is synthesized from the key on demand,
/// so a token costs O(1) memory.
struct SampleToken {
  std::uint64_t key = 0;
};

namespace detail {

// Random orthogonal matrix via modified Gram-Schmidt on hashed Gaussians,
// with one re-orthogonalization pass.
inline std::vector<Vec> random_orthogonal(int d, RngStream& rng) {
  std::vector<Vec> q(d, Vec(d));
  for (auto& row : q)
    for (double& v : row) v = rng.normal();
  for (int pass = 0; pass < 2; ++pass) {
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < i; ++j) {
        const double c = dot(q[i], q[j]);
        axpy(-c, q[j], q[i]);
      }
      const double n = norm(q[i]);
      if (n < 1e-12) throw std::runtime_error("degenerate basis draw");
      scale(q[i], 1.0 / n);
    }
  }
  return q;
}

}  // namespace detail

/// Stochastic convex objective with a gradient oracle and known constants.
/// Immutable after construction; gradient evaluation is a pure function of
/// (point, token).
class Problem {
 public:
  static Problem make(const ProblemParams& params, std::uint64_t construction_seed) {
    params.validate();
    Problem p;
    p.params_ = params;
    RngStream rng(mix_seed(construction_seed, 0x9072));

    const int d = params.dimension;
    p.x_star_.assign(d, 0.0);
    if (!params.x_star_at_origin) {
      // uniform in the ball of radius R/2
      Vec dir(d);
      for (double& v : dir) v = rng.normal();
      const double n = norm(dir);
      const double r =
          0.5 * params.domain_radius * std::pow(rng.uniform01(), 1.0 / d);
      p.x_star_ = scaled(dir, r / n);
    }

    switch (params.kind) {
      case ProblemKind::AdditiveNoiseQuadratic:
        p.build_quadratic(params.l_smooth, rng);
        p.sigma_ = params.sigma;
        p.sigma_l_ = 0.0;
        break;
      case ProblemKind::RandomCurvatureQuadratic: {
        // Per-sample Hessian is A + Z with |Z| <= sigma_l, so cap A's top
        // eigenvalue at L - sigma_l to keep per-sample smoothness at L.
        const double top = std::max(params.mu_min, params.l_smooth - params.sigma_l);
        p.build_quadratic(top, rng);
        p.sigma_l_ = params.sigma_l;
        p.sigma_ = params.sigma_l * (params.domain_radius + norm(p.x_star_));
        break;
      }
      case ProblemKind::SyntheticLogistic:
        p.build_logistic(rng);
        break;
    }
    return p;
  }

  const ProblemParams& params() const { return params_; }
  int dimension() const { return params_.dimension; }
  double radius() const { return params_.domain_radius; }
  double sigma() const { return sigma_; }
  double sigma_l() const { return sigma_l_; }
  double l_smooth() const { return params_.l_smooth; }
  const Vec& optimum() const { return x_star_; }
  double g_star() const { return g_star_; }

  SampleToken draw_sample(RngStream& stream) const { return SampleToken{stream.next_u64()}; }

  Vec stochastic_gradient(const Vec& x, SampleToken token) const {
    return gradient_impl(x, token, false);
  }

  // Same oracle evaluated against corrupted labels: logistic labels are
  // flipped, quadratics negate the target (the regression analogue).
  Vec stochastic_gradient_label_flipped(const Vec& x, SampleToken token) const {
    return gradient_impl(x, token, true);
  }

  Vec true_gradient(const Vec& x) const {
    check_domain(x);
    switch (params_.kind) {
      case ProblemKind::AdditiveNoiseQuadratic:
      case ProblemKind::RandomCurvatureQuadratic:
        return matvec(sub(x, x_star_));
      case ProblemKind::SyntheticLogistic: {
        Vec g(dimension(), 0.0);
        for (std::size_t i = 0; i < features_.size(); ++i) {
          const double p = sigmoid(dot(features_[i], x));
          axpy((p - labels_[i]) / static_cast<double>(features_.size()), features_[i], g);
        }
        axpy(ridge_, x, g);
        return g;
      }
    }
    return {};
  }

  double loss(const Vec& x) const {
    check_domain(x);
    switch (params_.kind) {
      case ProblemKind::AdditiveNoiseQuadratic:
      case ProblemKind::RandomCurvatureQuadratic: {
        const Vec q = sub(x, x_star_);
        return 0.5 * dot(q, matvec(q));
      }
      case ProblemKind::SyntheticLogistic: {
        double l = 0.0;
        for (std::size_t i = 0; i < features_.size(); ++i)
          l += cross_entropy(dot(features_[i], x), labels_[i]);
        l /= static_cast<double>(features_.size());
        return l + 0.5 * ridge_ * norm_sq(x);
      }
    }
    return 0.0;
  }

  double excess_loss(const Vec& x) const { return loss(x) - optimum_loss_; }

 private:
  Vec gradient_impl(const Vec& x, SampleToken token, bool label_flipped) const {
    check_domain(x);
    switch (params_.kind) {
      case ProblemKind::AdditiveNoiseQuadratic: {
        Vec g = matvec(label_flipped ? add(x, x_star_) : sub(x, x_star_));
        const double s = sigma_ / std::sqrt(static_cast<double>(dimension()));
        for (int i = 0; i < dimension(); ++i)
          g[i] += s * token_normal(token.key, static_cast<std::uint64_t>(i));
        return g;
      }
      case ProblemKind::RandomCurvatureQuadratic: {
        const Vec q = label_flipped ? add(x, x_star_) : sub(x, x_star_);
        Vec g = matvec(q);
        // token perturbation: signed rank-one with spectral norm sigma_l
        Vec u(dimension());
        for (int i = 0; i < dimension(); ++i)
          u[i] = token_normal(token.key, static_cast<std::uint64_t>(i));
        scale(u, 1.0 / norm(u));
        const double sign = (token_word(token.key, 1u << 20) & 1) ? 1.0 : -1.0;
        axpy(sign * sigma_l_ * dot(u, q), u, g);
        return g;
      }
      case ProblemKind::SyntheticLogistic: {
        const std::size_t i = static_cast<std::size_t>(
            token_word(token.key, 0) % features_.size());
        double y = labels_[i];
        if (label_flipped) y = 1.0 - y;
        const double p = sigmoid(dot(features_[i], x));
        Vec g = scaled(features_[i], p - y);
        axpy(ridge_, x, g);
        return g;
      }
    }
    return {};
  }

  void check_domain(const Vec& x) const {
    if (static_cast<int>(x.size()) != dimension())
      throw std::invalid_argument("problem: dimension mismatch");
    if (norm(x) > params_.domain_radius * (1.0 + 1e-9))
      throw std::invalid_argument("problem: point outside the domain ball");
  }

  Vec matvec(const Vec& q) const {
    const int d = dimension();
    Vec out(d, 0.0);
    for (int i = 0; i < d; ++i) {
      double s = 0.0;
      const double* row = &curvature_[static_cast<std::size_t>(i) * d];
      for (int j = 0; j < d; ++j) s += row[j] * q[j];
      out[i] = s;
    }
    return out;
  }

  static double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

  static double cross_entropy(double z, double y) {
    // -(y log p + (1-y) log(1-p)) in the numerically stable form
    const double sp = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    return sp - y * z;
  }

  // A = Q diag(mu_min..top) Q^T with endpoint eigenvalues hit exactly.
  void build_quadratic(double top, RngStream& rng) {
    const int d = dimension();
    curvature_.assign(static_cast<std::size_t>(d) * d, 0.0);
    if (d == 1) {
      curvature_[0] = top;
    } else {
      const auto q = detail::random_orthogonal(d, rng);
      Vec eig(d);
      for (int i = 0; i < d; ++i)
        eig[i] = params_.mu_min + (top - params_.mu_min) * i / (d - 1.0);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          double s = 0.0;
          for (int k = 0; k < d; ++k) s += q[k][i] * eig[k] * q[k][j];
          curvature_[static_cast<std::size_t>(i) * d + j] = s;
        }
    }
    optimum_loss_ = 0.0;  // interior optimum, f(x*) normalized to 0
    g_star_ = 0.0;
  }

  void build_logistic(RngStream& rng) {
    const int d = dimension();
    const double a_max = 2.0;
    ridge_ = 1e-3;
    params_.l_smooth = 0.25 * a_max * a_max + ridge_;
    sigma_ = a_max;
    sigma_l_ = params_.l_smooth;

    Vec x_true(d);
    for (double& v : x_true) v = rng.normal();
    scale(x_true, 2.0 / norm(x_true));

    features_.assign(params_.logistic_pool, Vec(d));
    labels_.assign(params_.logistic_pool, 0.0);
    for (int i = 0; i < params_.logistic_pool; ++i) {
      Vec& a = features_[i];
      for (double& v : a) v = rng.normal();
      scale(a, a_max / norm(a));
      labels_[i] = rng.uniform01() < sigmoid(dot(a, x_true)) ? 1.0 : 0.0;
    }
    solve_logistic_optimum();
  }

  // Full-pool deterministic solver (Nesterov, fixed steps) run to gradient
  // norm <= 1e-10; the result is the excess-loss reference point.
  void solve_logistic_optimum() {
    const int d = dimension();
    const double step = 1.0 / params_.l_smooth;
    const double kappa = params_.l_smooth / ridge_;
    const double momentum = (std::sqrt(kappa) - 1.0) / (std::sqrt(kappa) + 1.0);

    Vec x(d, 0.0), y(d, 0.0), x_prev(d, 0.0);
    for (int it = 0; it < 200000; ++it) {
      Vec g = logistic_full_gradient(y);
      if (norm(g) <= 1e-10 && it > 0) {
        x = y;
        break;
      }
      x_prev = x;
      x = y;
      axpy(-step, g, x);
      y = x;
      for (int k = 0; k < d; ++k) y[k] += momentum * (x[k] - x_prev[k]);
    }
    const Vec g_final = logistic_full_gradient(x);
    if (norm(g_final) > 1e-8)
      throw std::runtime_error("logistic optimum solver did not converge");
    if (norm(x) >= 0.9 * params_.domain_radius)
      throw std::runtime_error("logistic optimum too close to the domain boundary");
    x_star_ = x;
    g_star_ = norm(g_final);
    optimum_loss_ = loss(x);
  }

  Vec logistic_full_gradient(const Vec& x) const {
    Vec g(dimension(), 0.0);
    for (std::size_t i = 0; i < features_.size(); ++i) {
      const double p = sigmoid(dot(features_[i], x));
      axpy((p - labels_[i]) / static_cast<double>(features_.size()), features_[i], g);
    }
    axpy(ridge_, x, g);
    return g;
  }

  ProblemParams params_;
  Vec curvature_;  // dense d x d, quadratics only
  Vec x_star_;
  double optimum_loss_ = 0.0;
  double g_star_ = 0.0;
  double sigma_ = 0.0;
  double sigma_l_ = 0.0;

  // logistic pool
  std::vector<Vec> features_;
  std::vector<double> labels_;
  double ridge_ = 0.0;
};

}  // namespace asyncbyz
