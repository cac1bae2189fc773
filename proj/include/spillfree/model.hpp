#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "spillfree/errors.hpp"

namespace spillfree {

using Eigen::ArrayXd;

/// Fluid and tank constants for the 1-D viscous shallow-water tank model.
/// h_star = m/L is the flat equilibrium level and must stay strictly below
/// the wall height H_max.
struct PhysicalParams {
  double g = 0;       // gravity acceleration
  double mu = 0;      // kinematic viscosity
  double L = 0;       // tank length
  double m = 0;       // liquid mass per unit width
  double H_max = 0;   // wall height
  double h_star = 0;  // equilibrium level m/L

  static PhysicalParams make(double g, double mu, double L, double m, double H_max) {
    if (!(g > 0) || !(mu > 0) || !(L > 0) || !(m > 0) || !(H_max > 0))
      throw DomainError("physical parameters g, mu, L, m, H_max must all be positive");
    PhysicalParams p{g, mu, L, m, H_max, m / L};
    if (!(p.h_star < H_max))
      throw DomainError("equilibrium level h* = m/L = " + std::to_string(p.h_star) +
                        " must be strictly below the wall height H_max = " +
                        std::to_string(H_max) + " (no-spill equilibrium)");
    return p;
  }
};

/// Uniform staggered grid on [0, L]: levels live at the N cell centers,
/// velocities at the N+1 faces.
struct Grid {
  int N = 0;
  double dx = 0;
  ArrayXd cell_centers;  // (i + 1/2) dx, size N
  ArrayXd faces;         // j dx, size N+1

  static Grid make(double L, int N) {
    if (N < 4) throw DomainError("grid needs at least 4 cells");
    Grid grd;
    grd.N = N;
    grd.dx = L / N;
    grd.cell_centers = ArrayXd::LinSpaced(N, 0.5, N - 0.5) * grd.dx;
    grd.faces = ArrayXd::LinSpaced(N + 1, 0.0, double(N)) * grd.dx;
    return grd;
  }
};

/// Tank-frame state: tank position error xi, tank velocity w, level profile
/// h (cells), relative liquid velocity v (faces, zero at both walls).
struct FullState {
  double xi = 0;
  double w = 0;
  ArrayXd h;  // size N
  ArrayXd v;  // size N+1, v(0) = v(N) = 0
  double t = 0;
};

/// Lab-frame picture of a tank-frame state: left wall at a = xi + a_star,
/// absolute liquid velocity V_lab = v + w.
struct LabFrameView {
  double a = 0;
  double a_star = 0;
  ArrayXd H;
  ArrayXd V_lab;
};

// ---- staggered-grid primitives ------------------------------------------

/// Face field averaged to cells, size N.
inline ArrayXd face_to_cell(const ArrayXd& f) {
  const auto n = f.size() - 1;
  return 0.5 * (f.head(n) + f.tail(n));
}

/// Level gradient at the N+1 faces: centered differences between adjacent
/// cells inside, second-order one-sided stencils at the walls.
inline ArrayXd level_gradient_at_faces(const ArrayXd& h, double dx) {
  const auto n = h.size();
  ArrayXd gf(n + 1);
  gf.segment(1, n - 1) = (h.tail(n - 1) - h.head(n - 1)) / dx;
  gf(0) = (-2.0 * h(0) + 3.0 * h(1) - h(2)) / dx;
  gf(n) = (2.0 * h(n - 1) - 3.0 * h(n - 2) + h(n - 3)) / dx;
  return gf;
}

/// Level gradient averaged back to cells, size N.
inline ArrayXd level_gradient_at_cells(const ArrayXd& h, double dx) {
  return face_to_cell(level_gradient_at_faces(h, dx));
}

/// Velocity gradient at cells from the two bounding faces, size N.
inline ArrayXd velocity_gradient_at_cells(const ArrayXd& v, double dx) {
  const auto n = v.size() - 1;
  return (v.tail(n) - v.head(n)) / dx;
}

/// Wall levels by linear extrapolation from the two nearest cells
/// (second-order; the PDE imposes no boundary condition on h).
inline double wall_level_left(const ArrayXd& h) { return 0.5 * (3.0 * h(0) - h(1)); }
inline double wall_level_right(const ArrayXd& h) {
  const auto n = h.size();
  return 0.5 * (3.0 * h(n - 1) - h(n - 2));
}

/// Midpoint quadrature of a cell field.
inline double cell_integral(const ArrayXd& c, double dx) { return c.sum() * dx; }

inline double discrete_mass(const ArrayXd& h, double dx) { return h.sum() * dx; }

/// Total liquid momentum: integral of h v with v averaged to cells.
/// Accumulated directly; this sits on the per-step feedback path.
inline double momentum_integral(const ArrayXd& h, const ArrayXd& v, double dx) {
  const auto n = h.size();
  const double* hp = h.data();
  const double* vp = v.data();
  double acc = 0;
  for (Eigen::Index i = 0; i < n; ++i) acc += hp[i] * (vp[i] + vp[i + 1]);
  return 0.5 * acc * dx;
}

/// Membership in the admissible state set: positive levels, zero relative
/// velocity at both walls (exactly), and the mass constraint.
inline bool in_set_S(const FullState& s, const PhysicalParams& p, const Grid& grid,
                     std::string* why = nullptr) {
  if (s.h.size() != grid.N || s.v.size() != grid.N + 1) {
    if (why) *why = "profile sizes do not match the grid";
    return false;
  }
  if (!(s.h > 0.0).all()) {
    if (why) *why = "level profile is not positive everywhere";
    return false;
  }
  if (s.v(0) != 0.0 || s.v(grid.N) != 0.0) {
    if (why) *why = "relative velocity at the walls is not exactly zero";
    return false;
  }
  const double mass = discrete_mass(s.h, grid.dx);
  if (!(std::abs(mass - p.m) <= 1e-10 * p.m)) {
    if (why) *why = "discrete mass deviates from m by more than 1e-10 relative";
    return false;
  }
  return true;
}

// ---- constructors and frame maps ----------------------------------------

/// Flat level h*, liquid and tank at rest, arbitrary position error xi.
inline FullState equilibrium_state(const PhysicalParams& p, const Grid& grid, double xi = 0.0) {
  FullState s;
  s.xi = xi;
  s.w = 0.0;
  s.h = ArrayXd::Constant(grid.N, p.h_star);
  s.v = ArrayXd::Zero(grid.N + 1);
  return s;
}

enum class IcKind { level_mode, velocity_mode, combined };

/// Smooth single-mode perturbations of the equilibrium.
///
/// level_mode adds amplitude * cos(2 pi n x / L) to h (zero-mean, then the
/// profile is rescaled so the discrete mass equals m exactly); velocity_mode
/// sets v = amplitude * sin(pi n x / L), which vanishes at both walls.
inline FullState make_initial_condition(const PhysicalParams& p, const Grid& grid, IcKind kind,
                                        double amplitude, int mode_number, double xi0 = 0.0,
                                        double w0 = 0.0) {
  if (mode_number < 1) throw DomainError("mode_number must be a positive integer");
  const bool level = kind == IcKind::level_mode || kind == IcKind::combined;
  const bool velocity = kind == IcKind::velocity_mode || kind == IcKind::combined;
  if (level && !(std::abs(amplitude) < p.h_star))
    throw DomainError("level amplitude must satisfy |amplitude| < h* to keep h positive");

  FullState s = equilibrium_state(p, grid, xi0);
  s.w = w0;
  if (level) {
    s.h += amplitude * (2.0 * M_PI * mode_number / p.L * grid.cell_centers).cos();
    s.h *= p.m / discrete_mass(s.h, grid.dx);  // mass constraint is exact, not quadrature-limited
    if (!(s.h > 0.0).all())
      throw PositivityViolation("generated level profile touches zero");
  }
  if (velocity) {
    s.v = amplitude * (M_PI * mode_number / p.L * grid.faces).sin();
    s.v(0) = 0.0;
    s.v(grid.N) = 0.0;
  }
  return s;
}

/// Tank frame -> lab frame: shift positions by a = xi + a_star and velocities
/// by the tank velocity w.
inline LabFrameView to_lab_frame(const FullState& s, double a_star) {
  LabFrameView view;
  view.a_star = a_star;
  view.a = s.xi + a_star;
  view.H = s.h;
  view.V_lab = s.v + s.w;
  return view;
}

}  // namespace spillfree
