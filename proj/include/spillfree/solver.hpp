#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "spillfree/controller.hpp"
#include "spillfree/functionals.hpp"
#include "spillfree/model.hpp"

namespace spillfree {

/// Time-integration settings.  The single supported scheme is an explicit
/// two-stage (Heun) update; the viscous step restriction keeps runs at desk
/// scale, which is the intended regime.
struct SolverConfig {
  double cfl = 0.4;                    // in (0, 1]
  double t_end = 0;                    // > 0
  long record_every = 1;               // output decimation in steps
  double dt_max = std::numeric_limits<double>::infinity();
  std::vector<double> snapshot_times;  // profile dumps at these times
  double c_lyap = 10.0;                // tolerance constant for the CLF-increase flag
};

/// One recorded step: the serialized time-series columns plus in-memory
/// diagnostics (dissipation and momentum integrals) used by the energy
/// identity checks.
struct StepRecord {
  double t = 0, xi = 0, w = 0, f = 0;
  double V = 0, E = 0, W = 0;
  double mass = 0, norm_X = 0;
  double h_left = 0, h_right = 0, h_min = 0, h_max = 0;
  double dt = 0;
  // diagnostics, not part of the CSV contract
  double diss_E = 0;   // int h v_x^2
  double diss_W = 0;   // int h_x^2
  double mom = 0;      // int h v
  double shift_mom = 0;  // int (h v + mu h_x)
};

struct Snapshot {
  double t_requested = 0;
  double t = 0;
  ArrayXd h, v;
};

struct TrajectoryRecord {
  std::vector<StepRecord> records;
  std::vector<Snapshot> snapshots;
  long total_steps = 0;
  bool closed_loop = false;
  bool failed = false;
  double fail_time = std::numeric_limits<double>::quiet_NaN();
  std::string fail_reason;
  // first occurrence flags, set at record resolution without aborting
  std::optional<double> first_V_above_R;
  std::optional<double> first_spill;
  std::optional<double> first_V_increase;
};

struct RhsResult {
  ArrayXd dh;  // per cell
  ArrayXd dv;  // per face, zero at the walls
  double dxi = 0;
  double dw = 0;
};

namespace detail {

// Semidiscrete right-hand side on raw storage.  Levels must be positive.
// Mass: conservative flux differences with face levels by arithmetic mean and
// zero wall flux.  Momentum (nonconservative form, valid in the smooth
// regime): -v v_x - g h_x + mu h_face^-1 (h v_x)_x + f at interior faces,
// with v_x formed at cells and its weighted derivative taken back at faces.
inline void rhs_raw(const double* h, const double* v, int N, double inv_dx, double g, double mu,
                    double f, double* dh, double* dv) {
  // each interior flux is evaluated by the same expression on both sides, so
  // the cell updates telescope exactly and the loop carries no dependency
  dh[0] = -(0.5 * (h[0] + h[1]) * v[1]) * inv_dx;
  for (int i = 1; i < N - 1; ++i)
    dh[i] = -(0.5 * (h[i] + h[i + 1]) * v[i + 1] - 0.5 * (h[i - 1] + h[i]) * v[i]) * inv_dx;
  dh[N - 1] = (0.5 * (h[N - 2] + h[N - 1]) * v[N - 1]) * inv_dx;
  dv[0] = 0.0;
  dv[N] = 0.0;
  for (int j = 1; j < N; ++j) {
    const double h_face = 0.5 * (h[j - 1] + h[j]);
    const double vx_left = (v[j] - v[j - 1]) * inv_dx;    // cell j-1
    const double vx_right = (v[j + 1] - v[j]) * inv_dx;   // cell j
    const double advect = -v[j] * 0.5 * (vx_left + vx_right);
    const double grav = -g * (h[j] - h[j - 1]) * inv_dx;
    const double visc = mu / h_face * (h[j] * vx_right - h[j - 1] * vx_left) * inv_dx;
    dv[j] = advect + grav + visc + f;
  }
}

inline void require_positive_levels(const double* h, int N, double t, const char* where) {
  for (int i = 0; i < N; ++i)
    if (!(h[i] > 0.0))
      throw PositivityViolation(std::string(where) + ": level became non-positive at t = " +
                                std::to_string(t) + ", cell " + std::to_string(i));
}

// Preallocated buffers for the two-stage update.
struct StepWorkspace {
  ArrayXd k1h, k2h, hs;
  ArrayXd k1v, k2v, vs;
  void resize(int N) {
    k1h.resize(N);
    k2h.resize(N);
    hs.resize(N);
    k1v.resize(N + 1);
    k2v.resize(N + 1);
    vs.resize(N + 1);
  }
};

// One Heun step in place; f held constant across the step.  The caller
// guarantees positive levels on entry (the previous step's exit check, or an
// explicit admissibility check on the initial state).
inline void step_in_place(FullState& s, double f, double dt, const PhysicalParams& p,
                          const Grid& grid, StepWorkspace& ws) {
  const int N = grid.N;
  const double inv_dx = 1.0 / grid.dx;
  double* h = s.h.data();
  double* v = s.v.data();
  double* hs = ws.hs.data();
  double* vs = ws.vs.data();
  double* k1h = ws.k1h.data();
  double* k1v = ws.k1v.data();
  double* k2h = ws.k2h.data();
  double* k2v = ws.k2v.data();

  rhs_raw(h, v, N, inv_dx, p.g, p.mu, f, k1h, k1v);
  for (int i = 0; i < N; ++i) hs[i] = h[i] + dt * k1h[i];
  for (int i = 0; i < N; ++i)
    if (!(hs[i] > 0))
      throw PositivityViolation("step (stage): level became non-positive at t = " +
                                std::to_string(s.t));
  for (int j = 0; j <= N; ++j) vs[j] = v[j] + dt * k1v[j];
  vs[0] = 0.0;
  vs[N] = 0.0;
  rhs_raw(hs, vs, N, inv_dx, p.g, p.mu, f, k2h, k2v);
  const double half_dt = 0.5 * dt;
  for (int i = 0; i < N; ++i) h[i] += half_dt * (k1h[i] + k2h[i]);
  for (int i = 0; i < N; ++i)
    if (!(h[i] > 0))
      throw PositivityViolation("step: level became non-positive at t = " +
                                std::to_string(s.t + dt));
  for (int j = 0; j <= N; ++j) v[j] += half_dt * (k1v[j] + k2v[j]);
  v[0] = 0.0;
  v[N] = 0.0;

  s.xi += half_dt * (s.w + (s.w - dt * f));  // Heun on xi' = w, w' = -f
  s.w += -dt * f;
  s.t += dt;
}

}  // namespace detail

/// Time derivative of the full semidiscrete system under a frozen force f.
inline RhsResult semidiscrete_rhs(const FullState& s, double f, const PhysicalParams& p,
                                  const Grid& grid) {
  detail::require_positive_levels(s.h.data(), grid.N, s.t, "semidiscrete_rhs");
  RhsResult r;
  r.dh.resize(grid.N);
  r.dv.resize(grid.N + 1);
  detail::rhs_raw(s.h.data(), s.v.data(), grid.N, 1.0 / grid.dx, p.g, p.mu, f, r.dh.data(),
                  r.dv.data());
  r.dxi = s.w;
  r.dw = -f;
  return r;
}

/// Largest stable step: the advective limit dx / max(|v| + sqrt(g h_face))
/// against the viscous limit dx^2 h_min / (2 mu h_max), scaled by the Courant
/// number and clamped by dt_max.
inline double stable_dt(const FullState& s, const PhysicalParams& p, const Grid& grid,
                        const SolverConfig& cfg) {
  const int N = grid.N;
  const double h_min = s.h.minCoeff();
  const double h_max = s.h.maxCoeff();
  double signal =
      (s.v.segment(1, N - 1).abs() +
       (p.g * 0.5 * (s.h.head(N - 1) + s.h.tail(N - 1))).sqrt())
          .maxCoeff();
  signal = std::max(signal, std::abs(s.v(0)) + std::sqrt(p.g * wall_level_left(s.h)));
  signal = std::max(signal, std::abs(s.v(N)) + std::sqrt(p.g * wall_level_right(s.h)));
  const double advective = grid.dx / signal;
  const double viscous = grid.dx * grid.dx * h_min / (2.0 * p.mu * h_max);
  return cfg.cfl * std::min({advective, viscous, cfg.dt_max});
}

/// One explicit two-stage update with the force held constant.  Wall
/// velocities are re-pinned to zero and mass is conserved by the telescoping
/// flux form.  Throws PositivityViolation if any level reaches zero.
inline FullState step(const FullState& s, double f, double dt, const PhysicalParams& p,
                      const Grid& grid) {
  if (!(dt > 0)) throw DomainError("step requires dt > 0");
  detail::require_positive_levels(s.h.data(), grid.N, s.t, "step");
  FullState out = s;
  detail::StepWorkspace ws;
  ws.resize(grid.N);
  detail::step_in_place(out, f, dt, p, grid, ws);
  return out;
}

namespace detail {

inline StepRecord make_record(const FullState& s, double f, double dt, const PhysicalParams& p,
                              const std::optional<Gains>& gains, const Grid& grid) {
  StepRecord rec;
  rec.t = s.t;
  rec.xi = s.xi;
  rec.w = s.w;
  rec.f = f;
  rec.E = mechanical_energy(s, p, grid);
  rec.W = transport_energy(s, p, grid);
  if (gains) {
    const Gains& gn = *gains;
    rec.V = rec.W + rec.E + 0.5 * gn.q * gn.k * gn.k * s.xi * s.xi +
            0.5 * gn.q * (s.w + gn.k * s.xi) * (s.w + gn.k * s.xi);
  } else {
    rec.V = rec.W + rec.E;  // open loop: tank terms carry no meaning without gains
  }
  rec.mass = discrete_mass(s.h, grid.dx);
  rec.norm_X = state_norm(s, p, grid);
  rec.h_left = wall_level_left(s.h);
  rec.h_right = wall_level_right(s.h);
  rec.h_min = s.h.minCoeff();
  rec.h_max = s.h.maxCoeff();
  rec.dt = dt;
  const ArrayXd vx = velocity_gradient_at_cells(s.v, grid.dx);
  const ArrayXd gc = level_gradient_at_cells(s.h, grid.dx);
  rec.diss_E = (s.h * vx.square()).sum() * grid.dx;
  rec.diss_W = gc.square().sum() * grid.dx;
  rec.mom = momentum_integral(s.h, s.v, grid.dx);
  rec.shift_mom = rec.mom + p.mu * gc.sum() * grid.dx;
  return rec;
}

}  // namespace detail

/// Integrate the closed-loop (gains present) or open-loop (f = 0) system from
/// t = 0 to t_end with the adaptive stable step.  The force is sampled once
/// per step and held.  Records are taken every record_every steps plus the
/// initial and final states; profile snapshots are stored the first time the
/// clock passes each requested instant.
///
/// The run never aborts on flagged behaviour (CLF past R, wall spill, CLF
/// increase beyond the discretization allowance); it records the first time
/// of each.  Loss of level positivity is a hard failure: the partial
/// trajectory is returned with the failure marker set.
inline TrajectoryRecord simulate(const FullState& initial, const PhysicalParams& p,
                                 const std::optional<Gains>& gains, const Grid& grid,
                                 const SolverConfig& cfg) {
  if (!(cfg.cfl > 0) || !(cfg.cfl <= 1)) throw DomainError("cfl must lie in (0, 1]");
  if (!(cfg.t_end > 0)) throw DomainError("t_end must be positive");
  std::string why;
  if (!in_set_S(initial, p, grid, &why))
    throw DomainError("initial state is not admissible: " + why);
  if (gains) {
    const GainCheck gc = check_gain_condition(p, *gains);
    if (!gc.ok)
      throw GainConditionViolated("closed-loop run requires an admissible k (bound " +
                                  std::to_string(gc.bound) + ")");
  }

  TrajectoryRecord traj;
  traj.closed_loop = gains.has_value();
  FullState s = initial;
  s.t = 0.0;

  detail::StepWorkspace ws;
  ws.resize(grid.N);

  std::vector<double> snaps = cfg.snapshot_times;
  std::sort(snaps.begin(), snaps.end());
  size_t next_snap = 0;

  const double R = state_space_radius(p);
  double f = gains ? control_force(s, p, *gains, grid) : 0.0;

  StepRecord rec = detail::make_record(s, f, 0.0, p, gains, grid);
  const double V0 = rec.V;
  const double drift_rate =
      cfg.c_lyap * (stable_dt(s, p, grid, cfg) + grid.dx * grid.dx) * V0;  // allowed dV/dt
  double last_V = rec.V;
  double last_t = rec.t;

  auto note_flags = [&](const StepRecord& r) {
    if (!traj.first_V_above_R && r.V > R) traj.first_V_above_R = r.t;
    if (!traj.first_spill && std::max(r.h_left, r.h_right) >= p.H_max) traj.first_spill = r.t;
    if (!traj.first_V_increase && r.t > last_t &&
        r.V - last_V > drift_rate * (r.t - last_t))
      traj.first_V_increase = r.t;
    last_V = r.V;
    last_t = r.t;
  };
  note_flags(rec);
  traj.records.push_back(rec);
  while (next_snap < snaps.size() && snaps[next_snap] <= s.t) {
    traj.snapshots.push_back({snaps[next_snap], s.t, s.h, s.v});
    ++next_snap;
  }

  const double t_end = cfg.t_end;
  long steps_since_record = 0;
  while (s.t < t_end) {
    double dt = stable_dt(s, p, grid, cfg);
    if (s.t + dt > t_end) dt = t_end - s.t;
    if (!(dt > 0) || s.t + dt == s.t) break;  // clock at floating-point resolution
    try {
      detail::step_in_place(s, f, dt, p, grid, ws);
    } catch (const PositivityViolation& e) {
      traj.failed = true;
      traj.fail_time = s.t;
      traj.fail_reason = e.what();
      break;
    }
    ++traj.total_steps;
    ++steps_since_record;
    if (gains) f = control_force(s, p, *gains, grid);

    const bool at_end = !(s.t < t_end);
    if (steps_since_record >= cfg.record_every || at_end) {
      steps_since_record = 0;
      rec = detail::make_record(s, f, dt, p, gains, grid);
      note_flags(rec);
      traj.records.push_back(rec);
    }
    while (next_snap < snaps.size() && snaps[next_snap] <= s.t) {
      traj.snapshots.push_back({snaps[next_snap], s.t, s.h, s.v});
      ++next_snap;
    }
  }
  return traj;
}

}  // namespace spillfree
