#include <string>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"spillfree: closed-loop viscous shallow-water tank simulator and checker"};
  app.require_subcommand(1);

  std::string run_config;
  CLI::App* run = app.add_subcommand("run", "execute one scenario config");
  run->add_option("config", run_config, "scenario JSON file")->required();

  std::string sweep_config;
  CLI::App* sweep = app.add_subcommand("sweep", "run a parameter sweep config");
  sweep->add_option("config", sweep_config, "scenario JSON file with a sweep block")->required();

  spillfree::cli::DesignRequest req;
  CLI::App* design = app.add_subcommand("design", "plan a transfer without simulating");
  design->add_option("--g", req.g, "gravity")->required();
  design->add_option("--mu", req.mu, "kinematic viscosity")->required();
  design->add_option("--L", req.L, "tank length")->required();
  design->add_option("--m", req.m, "liquid mass per unit width")->required();
  design->add_option("--hmax", req.H_max, "wall height")->required();
  design->add_option("--epsilon", req.epsilon, "settling tolerance")->required();
  design->add_option("--xi0", req.xi0, "initial position error")->required();

  std::string verify_csv, verify_config;
  CLI::App* verify = app.add_subcommand("verify", "re-check a stored trajectory");
  verify->add_option("trajectory", verify_csv, "time-series CSV")->required();
  verify->add_option("config", verify_config, "scenario JSON file")->required();

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return spillfree::cli::cmd_run(run_config);
  if (sweep->parsed()) return spillfree::cli::cmd_sweep(sweep_config);
  if (design->parsed()) return spillfree::cli::cmd_design(req);
  if (verify->parsed()) return spillfree::cli::cmd_verify(verify_csv, verify_config);
  return spillfree::cli::kExitConfigError;
}
