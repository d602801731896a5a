#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "asyncbyz/aggregate.hpp"
#include "asyncbyz/rng.hpp"
#include "asyncbyz/vec.hpp"
#include "asyncbyz/weighted_set.hpp"

namespace asyncbyz {

enum class AttackKind { SignFlip, LabelFlip, Little, Empire };

inline std::string to_string(AttackKind k) {
  switch (k) {
    case AttackKind::SignFlip: return "sign-flip";
    case AttackKind::LabelFlip: return "label-flip";
    case AttackKind::Little: return "little";
    case AttackKind::Empire: return "empire";
  }
  return "?";
}

inline AttackKind parse_attack_kind(const std::string& s) {
  if (s == "sign-flip") return AttackKind::SignFlip;
  if (s == "label-flip") return AttackKind::LabelFlip;
  if (s == "little") return AttackKind::Little;
  if (s == "empire") return AttackKind::Empire;
  throw std::invalid_argument("unknown attack kind '" + s + "'");
}

struct AttackSpec {
  AttackKind kind = AttackKind::SignFlip;
  double epsilon = 0.1;  // empire scale

  // Omniscient view of honest momentums; granted to the attacks whose
  // formulas need it, denied to the flip attacks.
  bool collusion() const {
    return kind == AttackKind::Little || kind == AttackKind::Empire;
  }

  void validate() const {
    if (kind == AttackKind::Empire && !(epsilon > 0.0))
      throw std::invalid_argument("attack.epsilon must be > 0 for empire");
  }
};

/// Coordinate-wise weighted population standard deviation:
/// sqrt(sum_i s_i (x_ik - mu_k)^2 / sum_i s_i).
inline Vec weighted_std(const WeightedVectorSet& set) {
  set.validate();
  const Vec mu = weighted_mean(set);
  const auto order = canonical_order(set);
  Vec var(set.dimension(), 0.0);
  double total = 0.0;
  for (std::size_t i : order) {
    total += set.weights[i];
    for (std::size_t k = 0; k < var.size(); ++k) {
      const double d = set.vectors[i][k] - mu[k];
      var[k] += set.weights[i] * d * d;
    }
  }
  for (double& v : var) v = std::sqrt(v / total);
  return var;
}

/// Deviation budget for the coordinated perturbation attack, driven by
/// iteration counts: with s total updates of which s_B are adversarial,
/// z_max = Phi^-1(q), q = clamp((s - s_B - floor(s/2 + 1)) / (s - s_B),
/// 0.5, 1 - 1e-9). Saturates at zero once the adversarial share is large.
inline double zmax(long total_updates, long byz_updates) {
  if (total_updates < 1) throw std::invalid_argument("zmax: total updates must be >= 1");
  if (byz_updates < 0 || byz_updates >= total_updates)
    throw std::invalid_argument("zmax: adversarial updates must be in [0, total)");
  const double num = static_cast<double>(total_updates - byz_updates -
                                         (total_updates / 2 + 1));
  const double den = static_cast<double>(total_updates - byz_updates);
  const double q = std::clamp(num / den, 0.5, 1.0 - 1e-9);
  return normal_quantile(q);
}

/// Coordinated perturbation: the weighted mean pushed z weighted standard
/// deviations down in every coordinate.
inline Vec little_update(const WeightedVectorSet& honest_view, double z) {
  Vec out = weighted_mean(honest_view);
  axpy(-z, weighted_std(honest_view), out);
  return out;
}

struct ByzantineContext {
  const WeightedVectorSet* honest_view = nullptr;  // collusion attacks only
  const Vec* own_honest_d = nullptr;               // flip attacks only
  long total_updates = 0;
  long byz_updates = 0;
};

/// The vector an adversarial worker transmits. Flip attacks transform the
/// momentum the worker would have sent honestly (for label flipping, the one
/// computed against the corrupted oracle); collusion attacks are functions
/// of the honest workers' current momentums.
inline Vec byzantine_update(const AttackSpec& spec, const ByzantineContext& ctx) {
  spec.validate();
  switch (spec.kind) {
    case AttackKind::SignFlip:
      if (!ctx.own_honest_d) throw std::logic_error("sign-flip: missing honest momentum");
      return negated(*ctx.own_honest_d);
    case AttackKind::LabelFlip:
      if (!ctx.own_honest_d) throw std::logic_error("label-flip: missing honest momentum");
      return *ctx.own_honest_d;  // already computed against the corrupted oracle
    case AttackKind::Little: {
      if (!ctx.honest_view || ctx.honest_view->size() == 0)
        throw std::logic_error("little: honest view is empty");
      return little_update(*ctx.honest_view, zmax(ctx.total_updates, ctx.byz_updates));
    }
    case AttackKind::Empire: {
      if (!ctx.honest_view || ctx.honest_view->size() == 0)
        throw std::logic_error("empire: honest view is empty");
      return scaled(weighted_mean(*ctx.honest_view), -spec.epsilon);
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace asyncbyz
