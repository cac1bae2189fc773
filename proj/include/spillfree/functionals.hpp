#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "spillfree/model.hpp"

namespace spillfree {

/// Controller parameters: force gain sigma, velocity-error weight q, position
/// gain k, and the CLF budget r in [0, R).
struct Gains {
  double sigma = 0;
  double q = 0;
  double k = 0;
  double r = 0;
};

/// Every constant of the stabilization certificate, derived from the physical
/// parameters and one gain set.  lambda and M make the state-norm decay
/// estimate read norm(t) <= M * exp(-lambda t) * norm(0).
struct DerivedConstants {
  double c = 0;         // 1 / (mu sqrt(g)), couples the CLF value to the level barrier
  double R = 0;         // CLF radius of the admissible state space
  double theta = 0;     // sigma g / (g + mu sigma L), always < sigma
  double b = 0;         // (4 m L^2 H_max / (mu pi^2)) theta
  double eps_proof = 0; // Young-inequality split point, in (0, q)
  double x_aux = 0;     // (mu sigma L / (g + mu sigma L)) * level floor at budget r
  double phi = 0;       // gradient-dissipation split fraction, in (1/2, 1)
  double zeta = 0;      // second Young split, positive
  double gamma = 0;     // k relative to its admissible bound, in (0, 1)
  double beta = 0;      // level-ratio weight in the dissipation estimate
  double omega = 0;     // decay margin of the CLF; must be positive for a valid design
  double Gamma_r = 0;   // dissipation factor at budget r
  double G1_r = 0;      // upper norm-equivalence factor at budget r
  double G2_r = 0;      // lower norm-equivalence factor at budget r
  double lambda = 0;    // omega / (2 Gamma_r), state-norm decay rate
  double M = 0;         // sqrt(G1_r G2_r), state-norm overshoot factor
};

// ---- the level barrier map -----------------------------------------------

/// Lower endpoint of the barrier map's range.
inline double level_barrier_floor(const PhysicalParams& p) {
  return -(4.0 / 3.0) * p.h_star * std::sqrt(p.h_star);
}

/// Strictly increasing map of the liquid level used as a barrier coordinate:
/// the integral of |r - h*| / sqrt(r) from h* to h.  Evaluated in the factored
/// form sgn(h - h*) (2/3)(sqrt(h) - sqrt(h*))^2 (sqrt(h) + 2 sqrt(h*)), which
/// is algebraically identical and does not cancel near h*.
inline double level_barrier(double h, const PhysicalParams& p) {
  if (!(h > 0)) throw DomainError("level_barrier requires a positive level");
  const double u = std::sqrt(h), a = std::sqrt(p.h_star);
  const double d = u - a;
  const double mag = (2.0 / 3.0) * d * d * (u + 2.0 * a);
  return h >= p.h_star ? mag : -mag;
}

/// Inverse of the barrier map by safeguarded bisection.  The map is strictly
/// increasing with a flat derivative at h*, so bisection (never Newton) with
/// convergence on the bracket width is the reliable choice.
inline double level_barrier_inv(double y, const PhysicalParams& p) {
  const double floor = level_barrier_floor(p);
  if (!(y > floor))
    throw DomainError("level_barrier_inv argument is at or below the range endpoint " +
                      std::to_string(floor));
  if (y == 0.0) return p.h_star;

  double lo = 1e-12 * p.h_star;
  while (level_barrier(lo, p) > y) {
    lo *= 0.125;
    if (lo < 1e-300) return lo;
  }
  double hi = p.h_star;
  while (level_barrier(hi, p) < y) hi *= 2.0;

  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;  // bracket at floating-point resolution
    if (level_barrier(mid, p) < y)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// CLF radius of the admissible state space.  Positive whenever h* < H_max.
inline double state_space_radius(const PhysicalParams& p) {
  return (2.0 * p.mu * std::sqrt(p.g) / 3.0) *
         (2.0 * p.h_star * std::sqrt(p.h_star) +
          std::sqrt(p.H_max) * std::min(p.H_max - 3.0 * p.h_star, 0.0));
}

// ---- energies and the CLF -------------------------------------------------

/// Mechanical energy: kinetic  (1/2) int h v^2  plus potential
/// (1/2) g int (h - h*)^2.  Midpoint quadrature; v averaged to cells.
inline double mechanical_energy(const FullState& s, const PhysicalParams& p, const Grid& grid) {
  const ArrayXd vc = face_to_cell(s.v);
  const double kin = 0.5 * (s.h * vc.square()).sum() * grid.dx;
  const double pot = 0.5 * p.g * (s.h - p.h_star).square().sum() * grid.dx;
  return kin + pot;
}

/// The shifted momentum field h v + mu h_x at cells; the quadratic form of
/// this field is what the transport energy weighs.
inline ArrayXd shifted_momentum_field(const FullState& s, const PhysicalParams& p,
                                      const Grid& grid) {
  return s.h * face_to_cell(s.v) + p.mu * level_gradient_at_cells(s.h, grid.dx);
}

/// Transport energy: (1/2) int h^-1 (h v + mu h_x)^2 plus the same potential
/// term as the mechanical energy.
inline double transport_energy(const FullState& s, const PhysicalParams& p, const Grid& grid) {
  if (!(s.h > 0.0).all()) throw DomainError("transport_energy requires positive levels");
  const ArrayXd field = shifted_momentum_field(s, p, grid);
  const double core = 0.5 * (field.square() / s.h).sum() * grid.dx;
  const double pot = 0.5 * p.g * (s.h - p.h_star).square().sum() * grid.dx;
  return core + pot;
}

/// The control Lyapunov functional: both energies plus the tank error terms
/// (q k^2 / 2) xi^2 + (q / 2) (w + k xi)^2.
inline double clf_value(const FullState& s, const PhysicalParams& p, const Gains& gn,
                        const Grid& grid) {
  const double tank = 0.5 * gn.q * gn.k * gn.k * s.xi * s.xi +
                      0.5 * gn.q * (s.w + gn.k * s.xi) * (s.w + gn.k * s.xi);
  return transport_energy(s, p, grid) + mechanical_energy(s, p, grid) + tank;
}

/// Two-sided level confinement implied by a CLF value: every level lies in
/// [inv(-cV), inv(cV)].  Requires V < (4/3) mu h* sqrt(g h*).
inline std::pair<double, double> level_bounds(double V_value, const PhysicalParams& p) {
  const double cap = (4.0 / 3.0) * p.mu * p.h_star * std::sqrt(p.g * p.h_star);
  if (!(V_value < cap))
    throw DomainError("level_bounds requires the CLF value below (4/3) mu h* sqrt(g h*)");
  const double c = 1.0 / (p.mu * std::sqrt(p.g));
  return {level_barrier_inv(-c * V_value, p), level_barrier_inv(c * V_value, p)};
}

/// Norm of the deviation (xi, w, h - h*, v): sqrt of xi^2 + w^2 + the squared
/// L2 norms of the level deviation, its gradient, and the velocity.
inline double state_norm(const FullState& s, const PhysicalParams& p, const Grid& grid) {
  const ArrayXd dev = s.h - p.h_star;
  const ArrayXd gc = level_gradient_at_cells(s.h, grid.dx);
  const ArrayXd vc = face_to_cell(s.v);
  const double prof =
      (dev.square().sum() + gc.square().sum() + vc.square().sum()) * grid.dx;
  return std::sqrt(s.xi * s.xi + s.w * s.w + prof);
}

/// Same norm with the position error dropped: the "rest" part used by the
/// small-state bound and the settling criterion.
inline double rest_deviation_norm(const FullState& s, const PhysicalParams& p, const Grid& grid) {
  FullState zeroed = s;
  zeroed.xi = 0.0;
  return state_norm(zeroed, p, grid);
}

enum class StateClass { in_X, in_S_only, not_in_S };

struct StateClassification {
  StateClass cls = StateClass::not_in_S;
  double V = std::numeric_limits<double>::quiet_NaN();
  double R = 0;
  std::string reason;
};

/// Classify a state against the admissible set S and the CLF sublevel set X.
inline StateClassification classify_state(const FullState& s, const PhysicalParams& p,
                                          const Gains& gn, const Grid& grid) {
  StateClassification out;
  out.R = state_space_radius(p);
  std::string why;
  if (!in_set_S(s, p, grid, &why)) {
    out.cls = StateClass::not_in_S;
    out.reason = why;
    return out;
  }
  out.V = clf_value(s, p, gn, grid);
  out.cls = out.V < out.R ? StateClass::in_X : StateClass::in_S_only;
  if (out.cls == StateClass::in_S_only) out.reason = "CLF value is not below R";
  return out;
}

// ---- certificate factors ---------------------------------------------------

namespace detail {
inline void require_budget(double s, double R) {
  if (!(s >= 0.0) || !(s < R))
    throw DomainError("budget argument must lie in [0, R)");
}
}  // namespace detail

/// Non-decreasing factor bounding the CLF by the dissipation terms:
/// V <= Gamma(V) * (int h_x^2 + int h v_x^2 + xi^2 + (w + k xi)^2).
inline double dissipation_factor(double s, const PhysicalParams& p, const Gains& gn) {
  detail::require_budget(s, state_space_radius(p));
  const double c = 1.0 / (p.mu * std::sqrt(p.g));
  const double lo = level_barrier_inv(-c * s, p);
  const double hi = level_barrier_inv(c * s, p);
  const double pi2 = M_PI * M_PI;
  return std::max({3.0 * p.L * p.L * hi / (2.0 * pi2 * lo),
                   p.mu * p.mu / lo + p.g * p.L * p.L,
                   0.5 * gn.q * gn.k * gn.k,
                   0.5 * gn.q});
}

/// Upper norm-equivalence factor: norm^2 <= V * G1(V).
inline double norm_factor_G1(double s, const PhysicalParams& p, const Gains& gn) {
  detail::require_budget(s, state_space_radius(p));
  const double c = 1.0 / (p.mu * std::sqrt(p.g));
  const double lo = level_barrier_inv(-c * s, p);
  const double den = std::min({3.0 * p.H_max * lo,
                               2.0 * p.mu * p.mu,
                               3.0 * p.H_max * gn.q * gn.k * gn.k,
                               2.0 * p.H_max * gn.q,
                               12.0 * p.H_max * p.g});
  return 12.0 * p.H_max / den;
}

/// Lower norm-equivalence factor: V / G2(V) <= norm^2.
inline double norm_factor_G2(double s, const PhysicalParams& p, const Gains& gn) {
  detail::require_budget(s, state_space_radius(p));
  const double c = 1.0 / (p.mu * std::sqrt(p.g));
  const double lo = level_barrier_inv(-c * s, p);
  return std::max({1.5 * p.H_max,
                   p.mu * p.mu / lo,
                   1.5 * gn.q * gn.k * gn.k,
                   gn.q,
                   p.g});
}

/// Admissible upper bound on the position gain k for a given budget r.
inline double gain_bound(const PhysicalParams& p, double sigma, double q, double r) {
  const double R = state_space_radius(p);
  detail::require_budget(r, R);
  const double c = 1.0 / (p.mu * std::sqrt(p.g));
  const double theta = sigma * p.g / (p.g + p.mu * sigma * p.L);
  const double b = (4.0 * p.m * p.L * p.L * p.H_max / (p.mu * M_PI * M_PI)) * theta;
  const double lo = level_barrier_inv(-c * r, p);
  return q * theta * lo / (b + lo);
}

/// Build the full certificate.  Throws GainConditionViolated when k is not
/// strictly admissible and DesignInfeasible when the decay margin omega is
/// not positive.  All factor formulas are evaluated verbatim; feasibility is
/// gated on the runtime sign of omega rather than on any simplification.
inline DerivedConstants derived_constants(const PhysicalParams& p, const Gains& gn) {
  if (!(gn.sigma > 0) || !(gn.q > 0) || !(gn.k > 0))
    throw DomainError("gains sigma, q, k must be positive");
  DerivedConstants d;
  d.R = state_space_radius(p);
  detail::require_budget(gn.r, d.R);
  d.c = 1.0 / (p.mu * std::sqrt(p.g));
  d.theta = gn.sigma * p.g / (p.g + p.mu * gn.sigma * p.L);
  d.b = (4.0 * p.m * p.L * p.L * p.H_max / (p.mu * M_PI * M_PI)) * d.theta;

  const double lo = level_barrier_inv(-d.c * gn.r, p);
  const double hi = level_barrier_inv(d.c * gn.r, p);
  const double bound = gn.q * d.theta * lo / (d.b + lo);
  if (!(gn.k < bound))
    throw GainConditionViolated("position gain k = " + std::to_string(gn.k) +
                                " is not strictly below its admissible bound " +
                                std::to_string(bound));

  d.eps_proof = gn.q - gn.q * d.theta * lo / (gn.sigma * (d.b + lo));
  d.x_aux = (p.mu * gn.sigma * p.L / (p.g + p.mu * gn.sigma * p.L)) * lo;
  d.phi = d.x_aux / (2.0 * d.b + 2.0 * d.x_aux) + 0.5;
  d.zeta = d.x_aux / (d.b * d.phi + (d.phi - 1.0) * d.x_aux);
  d.gamma = gn.k * (d.b + lo) / (gn.q * d.theta * lo);
  d.beta = d.b * d.phi / (d.b * d.phi + (d.phi - 1.0) * d.x_aux);

  if (!(d.theta < gn.sigma) || !(d.gamma > 0 && d.gamma < 1) || !(d.phi > 0 && d.phi < 1) ||
      !(d.eps_proof > 0 && d.eps_proof < gn.q) || !(d.zeta > 0))
    throw std::logic_error("derived constants violate their structural ranges");

  d.omega = std::min({p.mu * p.g * (1.0 - d.phi),
                      p.mu * (1.0 - d.beta / p.H_max * hi),
                      gn.q * gn.k * gn.k * gn.k,
                      gn.q * gn.q * (1.0 - d.gamma) * d.theta * lo / (d.b + lo)});
  if (!(d.omega > 0))
    throw DesignInfeasible("decay margin omega = " + std::to_string(d.omega) +
                           " is not positive for this parameter/gain combination");

  d.Gamma_r = dissipation_factor(gn.r, p, gn);
  d.G1_r = norm_factor_G1(gn.r, p, gn);
  d.G2_r = norm_factor_G2(gn.r, p, gn);
  d.lambda = d.omega / (2.0 * d.Gamma_r);
  d.M = std::sqrt(d.G1_r * d.G2_r);
  return d;
}

}  // namespace spillfree
