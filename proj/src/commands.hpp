#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "scenario.hpp"

namespace spillfree::cli {

// exit codes: 0 all hard checks pass, 1 check failure, 2 config error,
// 3 solver failure
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailure = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitSolverFailure = 3;

struct RunResult {
  int exit_code = kExitOk;
  nlohmann::json summary;
};

/// Execute one scenario: simulate, check, and emit the configured artifacts.
RunResult run_scenario(const ScenarioConfig& cfg);

/// Cartesian-product (or r-ladder) sweep over the configured axes.
RunResult run_sweep(const ScenarioConfig& cfg);

struct DesignRequest {
  double g = 1, mu = 1, L = 1, m = 1, H_max = 2;
  double epsilon = 0;
  double xi0 = 0;
};

/// Plan a transfer without simulating; the summary is the printed plan.
RunResult run_design(const DesignRequest& req);

/// Re-check a serialized trajectory against its scenario config.
RunResult run_verify(const std::string& csv_path, const ScenarioConfig& cfg);

// command entry points used by the executable; these print the summary (or
// the error) and map exceptions onto the exit-code contract
int cmd_run(const std::string& config_path);
int cmd_sweep(const std::string& config_path);
int cmd_design(const DesignRequest& req);
int cmd_verify(const std::string& csv_path, const std::string& config_path);

}  // namespace spillfree::cli
