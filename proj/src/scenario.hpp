#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "spillfree/model.hpp"
#include "spillfree/functionals.hpp"
#include "spillfree/solver.hpp"

namespace spillfree::cli {

using nlohmann::json;

/// Configuration problem; carries the JSON pointer of the offending field.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class RunMode { closed_loop, open_loop, transfer_demo };

struct TransferSpec {
  double xi0 = 0;
  double epsilon = 0;
  double a_star = 0;
};

struct IcSpec {
  IcKind kind = IcKind::level_mode;
  double amplitude = 0;
  int mode_number = 1;
  double xi0 = 0;
  double w0 = 0;
};

struct OutputSpec {
  std::string csv_path;
  std::string summary_path;
  std::vector<double> snapshot_times;
};

struct CheckSpec {
  double c_lyap = 10.0;
  double c_energy = 20.0;
  double envelope_tol = 0.05;
  int static_samples = 0;
};

struct SweepSpec {
  // axis order is fixed: r, sigma, q, k, N, amplitude
  std::vector<double> r, sigma, q, k, amplitude;
  std::vector<int> N;
  bool r_ladder = false;
  double k_rule = 0.95;  // fraction of the admissible bound in ladder mode
};

struct ScenarioConfig {
  PhysicalParams params;
  int N = 0;
  SolverConfig solver;
  RunMode mode = RunMode::open_loop;
  std::optional<Gains> gains;
  std::optional<TransferSpec> transfer;
  IcSpec ic;
  OutputSpec outputs;
  CheckSpec checks;
  std::optional<SweepSpec> sweep;
  std::uint64_t seed = 0;
};

ScenarioConfig parse_scenario(const json& root);
ScenarioConfig load_scenario_file(const std::string& path);

std::string mode_name(RunMode mode);
std::string ic_kind_name(IcKind kind);

}  // namespace spillfree::cli
