// Acceptance suite: one test case per criterion, one printed verdict line
// each.  Shipped scenarios run once (into a temp directory) and are shared
// across criteria.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <map>

#include "commands.hpp"
#include "io.hpp"
#include "spillfree/verify.hpp"

using namespace spillfree;
using namespace spillfree::cli;
namespace fs = std::filesystem;

namespace {

struct ScenarioRun {
  RunResult result;
  double wall_seconds = 0;
};

const std::vector<std::string> kRunScenarios = {"equilibrium", "open_loop_decay",
                                                "stabilization", "refinement",
                                                "transfer_demo"};

fs::path out_root() {
  static const fs::path root = [] {
    const fs::path dir = fs::temp_directory_path() / "spillfree_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
  }();
  return root;
}

ScenarioConfig load_shipped(const std::string& name) {
  ScenarioConfig cfg =
      load_scenario_file(std::string(SPILLFREE_SCENARIO_DIR) + "/" + name + ".json");
  const fs::path dir = out_root() / name;
  fs::create_directories(dir);
  if (!cfg.outputs.csv_path.empty())
    cfg.outputs.csv_path = (dir / fs::path(cfg.outputs.csv_path).filename()).string();
  if (!cfg.outputs.summary_path.empty())
    cfg.outputs.summary_path = (dir / fs::path(cfg.outputs.summary_path).filename()).string();
  return cfg;
}

const ScenarioRun& shipped_run(const std::string& name) {
  static std::map<std::string, ScenarioRun> cache;
  auto it = cache.find(name);
  if (it == cache.end()) {
    const ScenarioConfig cfg = load_shipped(name);
    ScenarioRun run;
    const auto start = std::chrono::steady_clock::now();
    run.result = name == "r_ladder" ? run_sweep(cfg) : run_scenario(cfg);
    run.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    it = cache.emplace(name, std::move(run)).first;
  }
  return it->second;
}

const nlohmann::json* find_check(const nlohmann::json& summary, const std::string& name) {
  for (const auto& entry : summary.at("checks"))
    if (entry.at("name") == name) return &entry;
  return nullptr;
}

void verdict(int criterion, bool pass, const std::string& text) {
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, text.c_str());
  std::fflush(stdout);
}

}  // namespace

TEST_CASE("criterion 1: mass conservation on every shipped scenario") {
  bool pass = true;
  std::string note;
  for (const std::string& name : kRunScenarios) {
    const ScenarioRun& run = shipped_run(name);
    const nlohmann::json* mass = find_check(run.result.summary, "mass_conservation");
    REQUIRE(mass != nullptr);
    const bool mass_ok = mass->at("passed").get<bool>();
    // the transfer demo carries its own 60 s budget (criterion 6); every
    // other scenario must finish within 10 s
    const bool time_ok = name == "transfer_demo" || run.wall_seconds < 10.0;
    pass = pass && mass_ok && time_ok;
    note += name + " drift " + format_double(-mass->at("worst_violation").get<double>()) +
            " (" + format_double(run.wall_seconds) + " s); ";
    CHECK_MESSAGE(mass_ok, name, ": mass drift exceeded 1e-10");
    CHECK_MESSAGE(time_ok, name, ": scenario exceeded its runtime budget");
  }
  const ScenarioRun& ladder = shipped_run("r_ladder");
  for (const auto& row : ladder.result.summary.at("rows")) {
    const bool ok = row.at("passed").get<bool>();
    pass = pass && ok;
    CHECK_MESSAGE(ok, "r_ladder cell failed its hard checks (mass included)");
  }
  verdict(1, pass, "mass within 1e-10 at all records on all shipped scenarios: " + note);
}

TEST_CASE("criterion 2: the closed loop holds the equilibrium for 1000 steps") {
  const PhysicalParams p = PhysicalParams::make(1, 1, 1, 1, 2);
  const Grid g = Grid::make(1.0, 50);
  const Gains gn{1.0, 2.0, 0.3, 0.0};
  const FullState s0 = equilibrium_state(p, g, 0.0);
  SolverConfig cfg;
  cfg.t_end = 1e9;
  FullState s = s0;
  detail::StepWorkspace ws;
  ws.resize(g.N);
  for (int n = 0; n < 1000; ++n) {
    const double f = control_force(s, p, gn, g);
    detail::step_in_place(s, f, stable_dt(s, p, g, cfg), p, g, ws);
  }
  const double dev = std::max({(s.h - s0.h).abs().maxCoeff(), (s.v - s0.v).abs().maxCoeff(),
                               std::abs(s.xi), std::abs(s.w)});
  const bool pass = dev <= 1e-12;
  verdict(2, pass, "max deviation after 1000 closed-loop steps = " + format_double(dev));
  CHECK(pass);
}

TEST_CASE("criterion 3: certified stabilization from five initial conditions") {
  const PhysicalParams p = PhysicalParams::make(1, 1, 1, 1, 4);
  const Grid g = Grid::make(1.0, 50);
  const double r = 0.5 * state_space_radius(p);
  const Gains gn{1.0, 2.0, 0.1, r};
  REQUIRE(check_gain_condition(p, gn).ok);
  const DerivedConstants d = derived_constants(p, gn);

  struct Ic {
    IcKind kind;
    double amp;
    int mode;
    double xi0, w0;
  };
  const std::vector<Ic> ics = {{IcKind::level_mode, 0.15, 1, 0.0, 0.0},
                               {IcKind::velocity_mode, 0.30, 1, 0.0, 0.0},
                               {IcKind::combined, 0.08, 2, 0.0, 0.1},
                               {IcKind::level_mode, 0.10, 1, 0.5, 0.0},
                               {IcKind::velocity_mode, 0.20, 3, -0.4, 0.15}};
  bool pass = true;
  int index = 0;
  for (const Ic& ic : ics) {
    const FullState s0 = make_initial_condition(p, g, ic.kind, ic.amp, ic.mode, ic.xi0, ic.w0);
    const double V0 = clf_value(s0, p, gn, g);
    REQUIRE_MESSAGE(V0 <= r, "initial condition ", index, " is not within the budget");
    SolverConfig cfg;
    cfg.t_end = 20.0;
    cfg.record_every = 20;
    const TrajectoryRecord traj = simulate(s0, p, gn, g, cfg);
    REQUIRE_FALSE(traj.failed);
    const bool no_spill_flag = !traj.first_spill.has_value();
    const auto spill = check_spill_free(traj, p);
    const CheckReport lyap = check_lyapunov(traj, p, gn, g);
    const auto envelope = check_envelope(traj, p, gn, d, g);
    const bool ok = no_spill_flag && spill[0].passed && spill[1].passed && lyap.passed &&
                    !lyap.skipped && envelope[0].passed && envelope[1].passed;
    CHECK_MESSAGE(ok, "initial condition ", index, " violated a certified property");
    pass = pass && ok;
    ++index;
  }
  verdict(3, pass, "5 certified runs at r = R/2: spill-free, CLF non-increasing, envelopes hold");
  CHECK(pass);
}

TEST_CASE("criterion 4: energy identities sharpen under refinement") {
  const PhysicalParams p = PhysicalParams::make(1, 1, 1, 1, 2);
  auto residual = [&](int N, double dt_cap) {
    const Grid g = Grid::make(1.0, N);
    const FullState s0 = make_initial_condition(p, g, IcKind::combined, 0.05, 2);
    SolverConfig cfg;
    cfg.t_end = 0.5;
    cfg.record_every = 1;
    cfg.dt_max = dt_cap;
    const TrajectoryRecord traj = simulate(s0, p, std::nullopt, g, cfg);
    REQUIRE_FALSE(traj.failed);
    const CheckReport rep = check_energy_identities(traj, p, g);
    return std::pair<double, double>(-rep.worst_violation, rep.tolerance_used);
  };
  const auto [coarse, tol_coarse] = residual(50, 2e-5);
  const auto [fine, tol_fine] = residual(100, 1e-5);
  const bool within = coarse <= tol_coarse;
  const bool sharpens = fine <= coarse / 3.0;
  verdict(4, within && sharpens,
          "relative residual " + std::string(format_double(coarse)) + " <= " +
              format_double(tol_coarse) + "; refinement factor " +
              format_double(coarse / fine));
  CHECK(within);
  CHECK(sharpens);
}

TEST_CASE("criterion 5: static inequality battery, 1000 seeded states") {
  const PhysicalParams p = PhysicalParams::make(1, 1, 1, 1, 2);
  const Grid g = Grid::make(1.0, 50);
  const Gains gn{1.0, 2.0, 0.5, 0.0};
  const auto reports = check_static_inequalities(1000, p, gn, g, 42);
  REQUIRE(reports.size() == 4);
  bool pass = true;
  std::string note;
  for (const CheckReport& r : reports) {
    pass = pass && r.passed;
    note += r.name + " margin " + format_double(r.worst_violation) + "; ";
    CHECK_MESSAGE(r.passed, r.name, ": ", r.detail);
  }
  verdict(5, pass, note);
}

TEST_CASE("criterion 6: the glass-transfer demo settles without spilling") {
  const ScenarioRun& run = shipped_run("transfer_demo");
  const nlohmann::json& summary = run.result.summary;
  REQUIRE(summary.contains("transfer_plan"));
  const nlohmann::json& plan = summary.at("transfer_plan");
  const double k = plan.at("gains").at("k").get<double>();
  const double T = plan.at("T").get<double>();

  const PhysicalParams p = PhysicalParams::make(1, 1, 1, 1, 2);
  const double R = state_space_radius(p);
  const double cap3 = std::max({1.0 / (1.0 - 0.05), 1.0, 1.5 * p.H_max});
  const bool gain_ok = k < plan.at("k_bound_gain").get<double>();
  const bool tol_ok = 0.05 * 0.05 * cap3 < R && 0.05 < 1.0;
  const bool settle_bound_ok = k <= plan.at("k_bound_settle").get<double>();

  const nlohmann::json* settled = find_check(summary, "transfer_settled");
  const nlohmann::json* walls = find_check(summary, "spill_free_walls");
  const nlohmann::json* lyap = find_check(summary, "clf_nonincrease");
  REQUIRE(settled != nullptr);
  REQUIRE(walls != nullptr);
  REQUIRE(lyap != nullptr);
  const bool settled_ok = settled->at("passed").get<bool>();
  const bool spill_ok =
      walls->at("passed").get<bool>() && !summary.at("flags").at("first_spill").is_number();
  const bool lyap_ok = lyap->at("passed").get<bool>();

  const bool pass = gain_ok && tol_ok && settle_bound_ok && settled_ok && spill_ok && lyap_ok;
  verdict(6, pass,
          "plan (r=" + std::string(format_double(plan.at("gains").at("r").get<double>())) +
              ", sigma=" + format_double(plan.at("gains").at("sigma").get<double>()) +
              ", q=" + format_double(plan.at("gains").at("q").get<double>()) +
              ", k=" + format_double(k) + ", T=" + format_double(T) +
              "); final norm margin " +
              format_double(settled->at("worst_violation").get<double>()) + "; runtime " +
              format_double(run.wall_seconds) + " s (expected < 60)");
  CHECK(gain_ok);
  CHECK(tol_ok);
  CHECK(settle_bound_ok);
  CHECK(settled_ok);
  CHECK(spill_ok);
  CHECK(lyap_ok);
  WARN_MESSAGE(run.wall_seconds < 60.0, "transfer demo exceeded the expected 60 s budget");
}

TEST_CASE("criterion 7: semi-global tradeoff trends on the budget ladder") {
  const ScenarioRun& ladder = shipped_run("r_ladder");
  REQUIRE(ladder.result.summary.contains("trends"));
  bool pass = true;
  std::string note;
  for (const auto& trend : ladder.result.summary.at("trends")) {
    const bool ok = trend.at("passed").get<bool>();
    pass = pass && ok;
    note += trend.at("name").get<std::string>() + (ok ? " ok; " : " FAILED; ");
    CHECK_MESSAGE(ok, trend.dump());
  }
  verdict(7, pass, note + "(k bound and lambda fall, M grows as r -> R)");
}

TEST_CASE("criterion 8: spatial convergence order of the smooth run") {
  const PhysicalParams p = PhysicalParams::make(1, 1, 1, 1, 2);
  const double t_end = 0.25;
  auto solve = [&](int N) {
    const Grid g = Grid::make(1.0, N);
    const FullState s0 = make_initial_condition(p, g, IcKind::combined, 0.05, 1);
    SolverConfig cfg;
    cfg.t_end = t_end;
    cfg.record_every = 1000000;
    cfg.snapshot_times = {t_end};
    const TrajectoryRecord traj = simulate(s0, p, std::nullopt, g, cfg);
    REQUIRE_FALSE(traj.failed);
    REQUIRE(traj.snapshots.size() == 1);
    return traj.snapshots[0];
  };
  const Snapshot ref = solve(200);
  auto l2_error = [&](const Snapshot& coarse, int N) {
    const int ratio = 200 / N;
    double acc = 0;
    for (int i = 0; i < N; ++i) {
      double cell = 0;
      for (int k = 0; k < ratio; ++k) cell += ref.h(i * ratio + k);
      cell /= ratio;
      acc += (coarse.h(i) - cell) * (coarse.h(i) - cell) / N;
    }
    for (int j = 0; j <= N; ++j)
      acc += (coarse.v(j) - ref.v(j * ratio)) * (coarse.v(j) - ref.v(j * ratio)) / N;
    return std::sqrt(acc);
  };
  const double e50 = l2_error(solve(50), 50);
  const double e100 = l2_error(solve(100), 100);
  const double order = std::log2(e50 / e100);
  const bool pass = order >= 1.8;
  verdict(8, pass, "observed order " + std::string(format_double(order)) +
                       " (errors " + format_double(e50) + " -> " + format_double(e100) + ")");
  CHECK(pass);
}

TEST_CASE("criterion 9: constant oracles") {
  const PhysicalParams p2 = PhysicalParams::make(1, 1, 1, 1, 2);
  const PhysicalParams p4 = PhysicalParams::make(1, 1, 1, 1, 4);
  const Gains gn{1.0, 2.0, 0.5, 0.0};

  double worst_roundtrip = 0;
  for (int i = 0; i <= 400; ++i) {
    const double h = 0.01 * std::pow(10000.0, i / 400.0);
    const double back = level_barrier_inv(level_barrier(h, p2), p2);
    worst_roundtrip = std::max(worst_roundtrip, std::abs(back - h) / std::max(1.0, h));
  }
  const bool roundtrip_ok = worst_roundtrip <= 1e-10;

  auto rel = [](double a, double b) { return std::abs(a - b) / std::abs(b); };
  const bool constants_ok =
      rel(state_space_radius(p4), 4.0 / 3.0) <= 1e-12 &&
      rel(state_space_radius(p2), 0.3905242917512699) <= 1e-12 &&
      rel(state_space_radius(PhysicalParams::make(1, 2, 1, 1, 4)), 8.0 / 3.0) <= 1e-12 &&
      rel(derived_constants(p2, Gains{1.0, 2.0, 0.3, 0.0}).theta, 0.5) <= 1e-12 &&
      rel(derived_constants(p2, Gains{1.0, 2.0, 0.3, 0.0}).b, 0.4052847345693511) <= 1e-12 &&
      rel(dissipation_factor(0.0, p2, gn), 2.0) <= 1e-12 &&
      rel(norm_factor_G1(0.0, p2, gn), 12.0) <= 1e-12 &&
      rel(norm_factor_G2(0.0, p2, gn), 3.0) <= 1e-12;

  const bool pass = roundtrip_ok && constants_ok;
  verdict(9, pass, "barrier round-trip worst " + std::string(format_double(worst_roundtrip)) +
                       "; closed-form constants match hand values to 1e-12");
  CHECK(roundtrip_ok);
  CHECK(constants_ok);
}
