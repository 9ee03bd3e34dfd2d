#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "lpv_smpc/experiment.hpp"

using namespace lpv_smpc;

namespace {

int run(const std::string& command, const std::string& config_path, const std::string& out, const std::string& stage_input,
        const std::optional<std::uint64_t>& seed) {
  auto cfg = experiment::load_config(config_path);
  if (seed) cfg.seed = *seed;
  cfg.validate();
  const int threads = experiment::thread_count();
  std::cout << "config hash " << experiment::config_hash(cfg) << ", seed " << cfg.seed << "\n";
  if (command == "all") {
    require(stage_input.empty() || stage_input == out, "--stage-input is not supported with `all`");
    experiment::run_all(cfg, out, std::cout, threads);
  } else {
    const auto& s = experiment::info(command);
    experiment::run_stage(s.stage, cfg, out, stage_input.empty() ? out : stage_input, std::cout, threads);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scenario-based stochastic MPC for LPV systems with BNN-identified models"};
  std::string command, config, out, stage_input;
  std::optional<std::uint64_t> seed;
  std::string commands = "all";
  for (const auto& s : experiment::stages()) commands += std::string("|") + s.command;
  app.add_option("command", command, commands)->required();
  app.add_option("--config", config, "key = value configuration file")->required()->check(CLI::ExistingFile);
  app.add_option("--out", out, "run directory for the artifacts")->required();
  app.add_option("--seed", seed, "override the configured seed");
  app.add_option("--stage-input", stage_input, "directory holding the input artifacts (default: --out)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  try {
    return run(command, config, out, stage_input, seed);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
