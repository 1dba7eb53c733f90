#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "config.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-sex trait-structured population simulator and analysis harness", "dimorph"};
  app.require_subcommand(1);

  std::string config_path;
  std::size_t jobs = 1;
  std::optional<std::uint64_t> seed;
  std::string out_dir;

  const char* names[][2] = {
      {"ibm", "Run the individual-based model"},
      {"macro", "Integrate the trait-resolved macroscopic system"},
      {"totals", "Classify the rates and integrate the total-mass system"},
      {"stationary", "Find the positive stationary point and probe its uniqueness"},
      {"fixed-point", "Compute the limiting trait distribution and a convergence report"},
      {"lln", "Compare individual-based runs with the macroscopic limit"},
      {"acceptance", "Run the acceptance suite"},
  };
  for (const auto& [name, help] : names) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "Scenario configuration (JSON)")->required();
    sub->add_option("--jobs", jobs, "Maximum number of concurrent replicas")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "Override the configured seed");
    sub->add_option("--out", out_dir, std::string("Output directory (default: $") + dimorph::cli::kOutEnv + " or ./" +
                                          dimorph::cli::kDefaultOut + ")");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  const std::string sub = app.get_subcommands().front()->get_name();
  dimorph::cli::ScenarioConfig config;
  try {
    config = dimorph::cli::load_config(config_path);
  } catch (const dimorph::cli::ConfigError& e) {
    std::cerr << "dimorph " << sub << ": config error: " << e.what() << "\n";
    return kExitConfig;
  }

  dimorph::cli::RunOptions options;
  options.jobs = jobs;
  options.seed = seed;
  options.out_dir = out_dir;
  options.config_path = config_path;
  try {
    return dimorph::cli::run_subcommand(sub, config, options, std::cout);
  } catch (const dimorph::cli::ConfigError& e) {
    std::cerr << "dimorph " << sub << ": config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "dimorph " << sub << ": error in scenario '" << (config.scenario.empty() ? sub : config.scenario)
              << "' (" << config_path << "): " << e.what() << "\n";
    return kExitRuntime;
  }
}
