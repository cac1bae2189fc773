#include "scenario.hpp"

#include <fstream>
#include <limits>

namespace spillfree::cli {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

const json& require(const json& node, const std::string& path, const char* key) {
  if (!node.contains(key)) fail(path + "/" + key, "missing required field");
  return node.at(key);
}

double number(const json& node, const std::string& path) {
  if (!node.is_number()) fail(path, "expected a number");
  return node.get<double>();
}

double req_number(const json& node, const std::string& path, const char* key) {
  return number(require(node, path, key), path + "/" + key);
}

double opt_number(const json& node, const std::string& path, const char* key, double fallback) {
  if (!node.contains(key) || node.at(key).is_null()) return fallback;
  return number(node.at(key), path + "/" + key);
}

long opt_integer(const json& node, const std::string& path, const char* key, long fallback) {
  if (!node.contains(key) || node.at(key).is_null()) return fallback;
  const json& v = node.at(key);
  if (!v.is_number_integer()) fail(path + "/" + key, "expected an integer");
  return v.get<long>();
}

IcKind parse_kind(const std::string& text, const std::string& path) {
  if (text == "level_mode") return IcKind::level_mode;
  if (text == "velocity_mode") return IcKind::velocity_mode;
  if (text == "combined") return IcKind::combined;
  fail(path, "unknown kind '" + text + "' (level_mode | velocity_mode | combined)");
}

}  // namespace

std::string mode_name(RunMode mode) {
  switch (mode) {
    case RunMode::closed_loop: return "closed_loop";
    case RunMode::open_loop: return "open_loop";
    case RunMode::transfer_demo: return "transfer_demo";
  }
  return "?";
}

std::string ic_kind_name(IcKind kind) {
  switch (kind) {
    case IcKind::level_mode: return "level_mode";
    case IcKind::velocity_mode: return "velocity_mode";
    case IcKind::combined: return "combined";
  }
  return "?";
}

ScenarioConfig parse_scenario(const json& root) {
  ScenarioConfig cfg;

  const json& phys = require(root, "", "physical");
  try {
    cfg.params = PhysicalParams::make(req_number(phys, "/physical", "g"),
                                      req_number(phys, "/physical", "mu"),
                                      req_number(phys, "/physical", "L"),
                                      req_number(phys, "/physical", "m"),
                                      req_number(phys, "/physical", "H_max"));
  } catch (const DomainError& e) {
    fail("/physical", e.what());
  }

  const json& grid = require(root, "", "grid");
  cfg.N = int(opt_integer(grid, "/grid", "N", 0));
  if (cfg.N < 4) fail("/grid/N", "need at least 4 cells");

  const std::string mode = require(root, "", "mode").get<std::string>();
  if (mode == "closed_loop") cfg.mode = RunMode::closed_loop;
  else if (mode == "open_loop") cfg.mode = RunMode::open_loop;
  else if (mode == "transfer_demo") cfg.mode = RunMode::transfer_demo;
  else fail("/mode", "unknown mode '" + mode + "'");

  const json& solver = require(root, "", "solver");
  cfg.solver.cfl = opt_number(solver, "/solver", "cfl", 0.4);
  if (!(cfg.solver.cfl > 0) || !(cfg.solver.cfl <= 1)) fail("/solver/cfl", "must lie in (0, 1]");
  cfg.solver.record_every = opt_integer(solver, "/solver", "record_every", 1);
  if (cfg.solver.record_every < 1) fail("/solver/record_every", "must be >= 1");
  cfg.solver.dt_max =
      opt_number(solver, "/solver", "dt_max", std::numeric_limits<double>::infinity());
  if (!(cfg.solver.dt_max > 0)) fail("/solver/dt_max", "must be positive");
  if (solver.contains("scheme") && solver.at("scheme").get<std::string>() != "explicit_rk2")
    fail("/solver/scheme", "the only supported scheme is 'explicit_rk2'");
  if (cfg.mode == RunMode::transfer_demo) {
    if (solver.contains("t_end") && !solver.at("t_end").is_null())
      fail("/solver/t_end", "transfer_demo derives the final time from the plan; omit t_end");
  } else {
    cfg.solver.t_end = req_number(solver, "/solver", "t_end");
    if (!(cfg.solver.t_end > 0)) fail("/solver/t_end", "must be positive");
  }

  if (cfg.mode == RunMode::closed_loop) {
    const json& g = require(root, "", "gains");
    Gains gn;
    gn.sigma = req_number(g, "/gains", "sigma");
    gn.q = req_number(g, "/gains", "q");
    gn.k = req_number(g, "/gains", "k");
    gn.r = req_number(g, "/gains", "r");
    if (!(gn.sigma > 0) || !(gn.q > 0) || !(gn.k > 0))
      fail("/gains", "sigma, q, k must be positive");
    const double R = state_space_radius(cfg.params);
    if (!(gn.r >= 0) || !(gn.r < R))
      fail("/gains/r", "CLF budget must lie in [0, R) with R = " + std::to_string(R));
    cfg.gains = gn;
  }

  if (cfg.mode == RunMode::transfer_demo && !root.contains("transfer"))
    fail("/transfer", "transfer_demo mode requires a transfer block");
  if (root.contains("transfer") && !root.at("transfer").is_null()) {
    const json& t = root.at("transfer");
    TransferSpec ts;
    ts.xi0 = req_number(t, "/transfer", "xi0");
    ts.epsilon = req_number(t, "/transfer", "epsilon");
    ts.a_star = opt_number(t, "/transfer", "a_star", 0.0);
    if (!(ts.epsilon > 0)) fail("/transfer/epsilon", "must be positive");
    cfg.transfer = ts;
  }

  const json& ic = require(root, "", "ic");
  cfg.ic.kind = parse_kind(require(ic, "/ic", "kind").get<std::string>(), "/ic/kind");
  cfg.ic.amplitude = opt_number(ic, "/ic", "amplitude", 0.0);
  cfg.ic.mode_number = int(opt_integer(ic, "/ic", "mode_number", 1));
  if (cfg.ic.mode_number < 1) fail("/ic/mode_number", "must be >= 1");
  cfg.ic.xi0 = opt_number(ic, "/ic", "xi0", 0.0);
  cfg.ic.w0 = opt_number(ic, "/ic", "w0", 0.0);
  if (std::abs(cfg.ic.amplitude) >= cfg.params.h_star &&
      (cfg.ic.kind == IcKind::level_mode || cfg.ic.kind == IcKind::combined))
    fail("/ic/amplitude", "level amplitude must satisfy |amplitude| < h*");
  if (cfg.mode == RunMode::transfer_demo && cfg.transfer && cfg.ic.xi0 != cfg.transfer->xi0)
    fail("/ic/xi0", "must equal /transfer/xi0 in transfer_demo mode");

  if (root.contains("outputs") && !root.at("outputs").is_null()) {
    const json& out = root.at("outputs");
    if (out.contains("csv_path")) cfg.outputs.csv_path = out.at("csv_path").get<std::string>();
    if (out.contains("summary_path"))
      cfg.outputs.summary_path = out.at("summary_path").get<std::string>();
    if (out.contains("snapshot_times")) {
      for (size_t i = 0; i < out.at("snapshot_times").size(); ++i)
        cfg.outputs.snapshot_times.push_back(
            number(out.at("snapshot_times").at(i), "/outputs/snapshot_times"));
    }
  }
  cfg.solver.snapshot_times = cfg.outputs.snapshot_times;

  if (root.contains("checks") && !root.at("checks").is_null()) {
    const json& c = root.at("checks");
    cfg.checks.c_lyap = opt_number(c, "/checks", "c_lyap", 10.0);
    cfg.checks.c_energy = opt_number(c, "/checks", "c_energy", 20.0);
    cfg.checks.envelope_tol = opt_number(c, "/checks", "envelope_tol", 0.05);
    cfg.checks.static_samples = int(opt_integer(c, "/checks", "static_samples", 0));
    if (cfg.checks.static_samples > 0 && cfg.mode == RunMode::open_loop)
      fail("/checks/static_samples", "the static battery needs gains; use a closed-loop mode");
  }
  cfg.solver.c_lyap = cfg.checks.c_lyap;

  cfg.seed = std::uint64_t(opt_integer(root, "", "seed", 0));

  if (root.contains("sweep") && !root.at("sweep").is_null()) {
    const json& sw = root.at("sweep");
    SweepSpec spec;
    spec.r_ladder = sw.contains("r_ladder") && sw.at("r_ladder").get<bool>();
    spec.k_rule = opt_number(sw, "/sweep", "k_rule", 0.95);
    if (!(spec.k_rule > 0) || !(spec.k_rule < 1)) fail("/sweep/k_rule", "must lie in (0, 1)");
    if (sw.contains("axes") && !sw.at("axes").is_null()) {
      const json& ax = sw.at("axes");
      auto load_axis = [&](const char* key, std::vector<double>& dst) {
        if (!ax.contains(key)) return;
        for (size_t i = 0; i < ax.at(key).size(); ++i)
          dst.push_back(number(ax.at(key).at(i), std::string("/sweep/axes/") + key));
      };
      load_axis("r", spec.r);
      load_axis("sigma", spec.sigma);
      load_axis("q", spec.q);
      load_axis("k", spec.k);
      load_axis("amplitude", spec.amplitude);
      if (ax.contains("N"))
        for (size_t i = 0; i < ax.at("N").size(); ++i) {
          const json& v = ax.at("N").at(i);
          if (!v.is_number_integer()) fail("/sweep/axes/N", "expected integers");
          spec.N.push_back(v.get<int>());
        }
    }
    if (spec.r_ladder && !spec.r.empty())
      fail("/sweep/axes/r", "r_ladder mode generates the r axis itself");
    if (spec.r_ladder && cfg.mode != RunMode::closed_loop)
      fail("/sweep/r_ladder", "r_ladder mode requires closed_loop base gains");
    cfg.sweep = spec;
  }

  return cfg;
}

ScenarioConfig load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_scenario(root);
}

}  // namespace spillfree::cli
