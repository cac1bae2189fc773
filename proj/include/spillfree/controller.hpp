#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "spillfree/functionals.hpp"

namespace spillfree {

/// Feedback force on the tank.  Uses only four measured quantities: the tank
/// error xi, the tank velocity w, the total liquid momentum, and the level
/// difference between the walls.  Interior profile values enter only through
/// the momentum integral.
inline double control_force(const FullState& s, const PhysicalParams& p, const Gains& gn,
                            const Grid& grid) {
  const double momentum = momentum_integral(s.h, s.v, grid.dx);
  const double wall_diff = wall_level_right(s.h) - wall_level_left(s.h);
  return -gn.sigma * (2.0 * momentum + p.mu * wall_diff - gn.q * (s.w + gn.k * s.xi));
}

struct GainCheck {
  bool ok = false;
  double bound = 0;   // admissible strict upper bound on k
  double margin = 0;  // bound - k, positive when admissible
};

/// Strict admissibility of the position gain k at budget r.
inline GainCheck check_gain_condition(const PhysicalParams& p, const Gains& gn) {
  GainCheck out;
  out.bound = gain_bound(p, gn.sigma, gn.q, gn.r);
  out.margin = out.bound - gn.k;
  out.ok = gn.k < out.bound;
  return out;
}

/// The constant multiplying the squared rest norm in the small-state CLF
/// bound; eps must satisfy eps < min(h*, H_max - h*) / sqrt(L).
inline double small_state_factor(const PhysicalParams& p, double q, double eps) {
  return std::max({p.mu * p.mu / (p.h_star - eps * std::sqrt(p.L)),
                   p.g,
                   1.5 * p.H_max,
                   q});
}

/// Certified upper bound on the CLF value of a nearly-at-rest state:
///   V <= factor * rest_norm^2 + (3 q k^2 / 2) xi^2.
/// Throws HypothesisViolated when eps is out of range or the state's rest
/// norm exceeds eps.
inline double small_state_clf_bound(const FullState& s, const PhysicalParams& p, const Gains& gn,
                                    const Grid& grid, double eps) {
  const double cap = std::min(p.h_star, p.H_max - p.h_star) / std::sqrt(p.L);
  if (!(eps > 0) || !(eps < cap))
    throw HypothesisViolated("tolerance eps must lie in (0, min(h*, H_max - h*)/sqrt(L))");
  const double rest = rest_deviation_norm(s, p, grid);
  if (!(rest <= eps))
    throw HypothesisViolated("rest deviation norm " + std::to_string(rest) +
                             " exceeds the tolerance " + std::to_string(eps));
  return small_state_factor(p, gn.q, eps) * rest * rest +
         1.5 * gn.q * gn.k * gn.k * s.xi * s.xi;
}

/// A finite-time transfer plan: gains, certificate, and the settling time T
/// at which the state norm is guaranteed back inside the tolerance.
struct TransferPlan {
  Gains gains;
  DerivedConstants constants;
  double T = 0;
  double epsilon = 0;
  double xi0 = 0;
  double k_bound_gain = 0;    // strict bound on k from admissibility
  double k_bound_settle = 0;  // bound on k certifying the initial CLF budget
};

/// Plan a near-rest to near-rest transfer over distance xi0 with tolerance
/// epsilon.
///
/// The search is a fixed deterministic ladder: the budget r scans
/// {0.9, 0.7, 0.5, 0.3, 0.1} R largest-first (larger r admits a larger k
/// through the settling bound but a smaller one through admissibility),
/// sigma scans {0.1, 1, 10} sqrt(g/L), q sits at its cap, and k takes 95% of
/// the smaller of its two bounds so that the strict inequality keeps margin.
inline TransferPlan plan_transfer(double xi0, double epsilon, const PhysicalParams& p) {
  const double R = state_space_radius(p);
  const double eps_cap = std::min(p.h_star, p.H_max - p.h_star) / std::sqrt(p.L);
  const double cap3 = std::max({p.mu * p.mu / (p.h_star - epsilon * std::sqrt(p.L)),
                                p.g,
                                1.5 * p.H_max});
  if (!(epsilon > 0) || !(epsilon < eps_cap) || !(epsilon * epsilon * cap3 < R))
    throw ToleranceTooLarge(
        "tolerance must satisfy eps^2 max(mu^2/(h*-eps sqrt(L)), g, 3 H_max/2) < R "
        "and eps < min(h*, H_max - h*)/sqrt(L)");

  const double q = cap3;               // q at its cap; the certified factor then equals cap3
  const double cap4 = std::max(cap3, q);
  const double sigma_scale = std::sqrt(p.g / p.L);

  for (double r_frac : {0.9, 0.7, 0.5, 0.3, 0.1}) {
    const double r = r_frac * R;
    if (!(epsilon * epsilon * cap3 < r)) continue;
    const double settle_gap = r - epsilon * epsilon * cap4;
    const double k_settle = xi0 == 0.0 ? std::numeric_limits<double>::infinity()
                                       : std::sqrt(2.0 / (3.0 * q)) *
                                             std::sqrt(settle_gap) / std::abs(xi0);
    for (double sigma_frac : {0.1, 1.0, 10.0}) {
      const double sigma = sigma_frac * sigma_scale;
      const double k_gain = gain_bound(p, sigma, q, r);
      const double k = 0.95 * std::min(k_gain, k_settle);
      if (!(k > 0)) continue;

      Gains gn{sigma, q, k, r};
      DerivedConstants d;
      try {
        d = derived_constants(p, gn);
      } catch (const DesignInfeasible&) {
        continue;
      }

      // settling-time certificate: the initial CLF budget must be covered
      const double v0_bound = epsilon * epsilon * cap4 + 1.5 * q * k * k * xi0 * xi0;
      if (!(v0_bound <= r)) continue;

      TransferPlan plan;
      plan.gains = gn;
      plan.constants = d;
      plan.epsilon = epsilon;
      plan.xi0 = xi0;
      plan.k_bound_gain = k_gain;
      plan.k_bound_settle = k_settle;
      plan.T = std::log((d.M * std::abs(xi0) + d.M * epsilon) / epsilon) / d.lambda;
      return plan;
    }
  }
  throw NoFeasibleGain("the deterministic (r, sigma) ladder found no admissible design");
}

}  // namespace spillfree
