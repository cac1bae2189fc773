#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "spillfree/solver.hpp"

using namespace spillfree;

namespace {
const PhysicalParams unit_params = PhysicalParams::make(1, 1, 1, 1, 2);
}

TEST_CASE("rhs vanishes at equilibrium and passes a constant force through") {
  const Grid g = Grid::make(1.0, 16);
  FullState s = equilibrium_state(unit_params, g, 0.0);

  RhsResult r = semidiscrete_rhs(s, 0.0, unit_params, g);
  CHECK((r.dh == 0.0).all());
  CHECK((r.dv == 0.0).all());
  CHECK(r.dxi == 0.0);
  CHECK(r.dw == 0.0);

  s.w = 0.25;
  r = semidiscrete_rhs(s, 0.7, unit_params, g);
  CHECK((r.dh == 0.0).all());
  for (int j = 1; j < g.N; ++j) CHECK(r.dv(j) == 0.7);
  CHECK(r.dv(0) == 0.0);
  CHECK(r.dv(g.N) == 0.0);
  CHECK(r.dxi == 0.25);
  CHECK(r.dw == -0.7);
}

TEST_CASE("rhs reproduces the analytic advection of a sine profile") {
  // nearly inviscid, flat level: dv/dt = -v v_x = -(A^2 pi / 2L) sin(2 pi x / L)
  const PhysicalParams thin = PhysicalParams::make(1.0, 1e-12, 1.0, 1.0, 2.0);
  const double A = 0.3;
  auto error_at = [&](int N) {
    const Grid g = Grid::make(1.0, N);
    FullState s = equilibrium_state(thin, g, 0.0);
    for (int j = 0; j <= N; ++j) s.v(j) = A * std::sin(M_PI * g.faces(j));
    s.v(0) = s.v(N) = 0.0;
    const RhsResult r = semidiscrete_rhs(s, 0.0, thin, g);
    double worst = 0;
    for (int j = 1; j < N; ++j) {
      const double exact = -A * A * M_PI / 2.0 * std::sin(2 * M_PI * g.faces(j));
      worst = std::max(worst, std::abs(r.dv(j) - exact));
    }
    return worst;
  };
  const double e128 = error_at(128);
  const double e256 = error_at(256);
  CHECK(e128 <= 5e-3 * A * A * M_PI / 2.0);
  CHECK(e256 <= e128 / 3.0);  // second-order stencil
}

TEST_CASE("stable step collapses to the textbook formula at equilibrium") {
  const Grid g = Grid::make(1.0, 20);
  const Grid g2 = Grid::make(1.0, 40);
  SolverConfig cfg;
  cfg.cfl = 0.4;
  cfg.t_end = 1.0;
  const FullState s = equilibrium_state(unit_params, g, 0.0);
  const double expected = 0.4 * std::min(g.dx / std::sqrt(1.0), g.dx * g.dx / 2.0);
  CHECK(stable_dt(s, unit_params, g, cfg) == doctest::Approx(expected).epsilon(1e-15));

  // viscosity-dominated: halving dx quarters dt
  const FullState s2 = equilibrium_state(unit_params, g2, 0.0);
  CHECK(stable_dt(s, unit_params, g, cfg) /
            stable_dt(s2, unit_params, g2, cfg) ==
        doctest::Approx(4.0).epsilon(1e-12));

  cfg.dt_max = 1e-6;
  CHECK(stable_dt(s, unit_params, g, cfg) == doctest::Approx(0.4e-6).epsilon(1e-15));
  CHECK(stable_dt(s, unit_params, g, cfg) > 0);
}

TEST_CASE("step: equilibrium fixed point and constant-force response") {
  const Grid g = Grid::make(1.0, 16);
  FullState s = equilibrium_state(unit_params, g, 0.0);

  const FullState fixed = step(s, 0.0, 1e-3, unit_params, g);
  CHECK((fixed.h == s.h).all());
  CHECK((fixed.v == s.v).all());
  CHECK(fixed.xi == 0.0);
  CHECK(fixed.w == 0.0);

  const double c0 = 0.8, dt = 1e-6;
  const FullState pushed = step(s, c0, dt, unit_params, g);
  CHECK(pushed.w == -c0 * dt);  // exact for constant force
  CHECK(pushed.xi == doctest::Approx(-0.5 * dt * dt * c0).epsilon(1e-12));  // Heun tail
  for (int j = 1; j < g.N; ++j)
    CHECK(pushed.v(j) == doctest::Approx(c0 * dt).epsilon(1e-7));
  CHECK(pushed.v(0) == 0.0);
  CHECK(pushed.v(g.N) == 0.0);
  // wall cells feel the velocity jump at second order in dt
  CHECK((pushed.h - 1.0).abs().maxCoeff() <= 2.0 * c0 * dt * dt / g.dx);

  CHECK_THROWS_AS(step(s, 0.0, -1.0, unit_params, g), DomainError);
}

TEST_CASE("step throws on loss of level positivity") {
  const Grid g = Grid::make(1.0, 16);
  FullState s = make_initial_condition(unit_params, g, IcKind::velocity_mode, 3.0, 1);
  CHECK_THROWS_AS(step(s, 0.0, 0.5, unit_params, g), PositivityViolation);
}

TEST_CASE("mass is conserved to machine precision over ten thousand steps") {
  const Grid g = Grid::make(1.0, 32);
  const FullState s0 = make_initial_condition(unit_params, g, IcKind::combined, 0.05, 2);
  SolverConfig cfg;
  cfg.t_end = 1e9;  // step count limited below
  FullState s = s0;
  detail::StepWorkspace ws;
  ws.resize(g.N);
  const double m0 = discrete_mass(s.h, g.dx);
  for (int n = 0; n < 10000; ++n)
    detail::step_in_place(s, 0.0, stable_dt(s, unit_params, g, cfg), unit_params, g, ws);
  CHECK(std::abs(discrete_mass(s.h, g.dx) - m0) <= 1e-12 * unit_params.m);
}

TEST_CASE("closed loop holds the equilibrium bit-for-bit") {
  const Grid g = Grid::make(1.0, 32);
  const Gains gn{1.0, 2.0, 0.3, 0.0};
  const FullState s0 = equilibrium_state(unit_params, g, 0.0);
  SolverConfig cfg;
  cfg.t_end = 1e9;
  FullState s = s0;
  detail::StepWorkspace ws;
  ws.resize(g.N);
  for (int n = 0; n < 1000; ++n) {
    const double f = control_force(s, unit_params, gn, g);
    detail::step_in_place(s, f, stable_dt(s, unit_params, g, cfg), unit_params, g, ws);
  }
  CHECK((s.h == s0.h).all());
  CHECK((s.v == s0.v).all());
  CHECK(std::abs(s.xi) <= 1e-12);
  CHECK(std::abs(s.w) <= 1e-12);
}

TEST_CASE("simulate: record cadence, clock, and quiet flags on a certified run") {
  const Grid g = Grid::make(1.0, 32);
  const Gains gn{1.0, 2.0, 0.3, 0.0};
  FullState s0 = equilibrium_state(unit_params, g, 0.0);
  SolverConfig cfg;
  cfg.t_end = 0.02;
  cfg.record_every = 1;
  const TrajectoryRecord traj = simulate(s0, unit_params, gn, g, cfg);
  CHECK_FALSE(traj.failed);
  CHECK(traj.closed_loop);
  CHECK(long(traj.records.size()) == traj.total_steps + 1);
  CHECK(traj.records.back().t == doctest::Approx(0.02).epsilon(1e-12));
  CHECK_FALSE(traj.first_V_above_R.has_value());
  CHECK_FALSE(traj.first_spill.has_value());
  CHECK_FALSE(traj.first_V_increase.has_value());
  for (const StepRecord& rec : traj.records) CHECK(rec.V == 0.0);
  for (size_t i = 1; i < traj.records.size(); ++i)
    CHECK(traj.records[i].t > traj.records[i - 1].t);
}

TEST_CASE("simulate: open-loop mechanical energy decays") {
  const Grid g = Grid::make(1.0, 48);
  const FullState s0 = make_initial_condition(unit_params, g, IcKind::velocity_mode, 0.3, 1);
  SolverConfig cfg;
  cfg.t_end = 0.5;
  cfg.record_every = 10;
  const TrajectoryRecord traj = simulate(s0, unit_params, std::nullopt, g, cfg);
  CHECK_FALSE(traj.failed);
  const double E0 = traj.records.front().E;
  CHECK(traj.records.back().E < 0.5 * E0);
  for (size_t i = 1; i < traj.records.size(); ++i)
    CHECK(traj.records[i].E <= traj.records[i - 1].E + 1e-9 * E0);
}

TEST_CASE("simulate: snapshots land at the requested instants") {
  const Grid g = Grid::make(1.0, 16);
  const FullState s0 = make_initial_condition(unit_params, g, IcKind::level_mode, 0.02, 1);
  SolverConfig cfg;
  cfg.t_end = 0.01;
  cfg.record_every = 5;
  cfg.snapshot_times = {0.0, 0.005, 0.01};
  const TrajectoryRecord traj = simulate(s0, unit_params, std::nullopt, g, cfg);
  REQUIRE(traj.snapshots.size() == 3);
  CHECK(traj.snapshots[0].t == 0.0);
  CHECK(traj.snapshots[1].t >= 0.005);
  CHECK(traj.snapshots[2].t == doctest::Approx(0.01).epsilon(1e-12));
  // and the lab-frame wall velocities coincide with the tank velocity
  FullState final_state = s0;
  final_state.h = traj.snapshots[2].h;
  final_state.v = traj.snapshots[2].v;
  final_state.w = traj.records.back().w;
  const LabFrameView view = to_lab_frame(final_state, 3.0);
  CHECK(view.V_lab(0) == final_state.w);
  CHECK(view.V_lab(g.N) == final_state.w);
}

TEST_CASE("simulate rejects inadmissible inputs") {
  const Grid g = Grid::make(1.0, 16);
  SolverConfig cfg;
  cfg.t_end = 0.1;
  FullState bad = equilibrium_state(unit_params, g, 0.0);
  bad.v(0) = 1.0;
  CHECK_THROWS_AS(simulate(bad, unit_params, std::nullopt, g, cfg), DomainError);

  const FullState ok = equilibrium_state(unit_params, g, 0.0);
  const double bound = gain_bound(unit_params, 1.0, 2.0, 0.0);
  CHECK_THROWS_AS(simulate(ok, unit_params, Gains{1.0, 2.0, 2.0 * bound, 0.0}, g, cfg),
                  GainConditionViolated);
  SolverConfig bad_cfg = cfg;
  bad_cfg.cfl = 1.5;
  CHECK_THROWS_AS(simulate(ok, unit_params, std::nullopt, g, bad_cfg), DomainError);
}

TEST_CASE("spatial convergence on a smooth run (coarse preview)") {
  // N vs 2N against a 4N reference at a fixed early time
  const double t_end = 0.05;
  auto solve = [&](int N) {
    const Grid g = Grid::make(1.0, N);
    const FullState s0 = make_initial_condition(unit_params, g, IcKind::combined, 0.05, 1);
    SolverConfig cfg;
    cfg.t_end = t_end;
    cfg.record_every = 1000000;
    cfg.snapshot_times = {t_end};
    const TrajectoryRecord traj = simulate(s0, unit_params, std::nullopt, g, cfg);
    REQUIRE_FALSE(traj.failed);
    REQUIRE(traj.snapshots.size() == 1);
    return traj.snapshots[0];
  };
  const Snapshot fine = solve(64);
  auto error_vs_fine = [&](const Snapshot& coarse, int N, int ratio) {
    double acc = 0;
    for (int i = 0; i < N; ++i) {
      double cell = 0;
      for (int k = 0; k < ratio; ++k) cell += fine.h(i * ratio + k);
      cell /= ratio;
      acc += (coarse.h(i) - cell) * (coarse.h(i) - cell);
    }
    for (int j = 0; j <= N; ++j) {
      const double dv = coarse.v(j) - fine.v(j * ratio);
      acc += dv * dv;
    }
    return std::sqrt(acc / N);
  };
  const double e16 = error_vs_fine(solve(16), 16, 4);
  const double e32 = error_vs_fine(solve(32), 32, 2);
  CHECK(std::log2(e16 / e32) >= 1.5);
}
