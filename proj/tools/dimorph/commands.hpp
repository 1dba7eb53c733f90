#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

#include "config.hpp"

namespace dimorph::cli {

/// Environment variable naming the default output directory.
inline constexpr const char* kOutEnv = "DIMORPH_OUT";
inline constexpr const char* kDefaultOut = "dimorph_out";

struct RunOptions {
  std::size_t jobs = 1;
  std::optional<std::uint64_t> seed;
  /// --out; falls back to the config, then DIMORPH_OUT, then ./dimorph_out.
  std::string out_dir;
  /// Hashed into the manifest when set.
  std::string config_path;
};

std::string resolve_out_dir(const RunOptions& options, const ScenarioConfig& config);

/// Runs one subcommand and writes its artifacts plus manifest.json. Returns the exit
/// status; library errors propagate as exceptions.
int run_subcommand(const std::string& name, const ScenarioConfig& config, const RunOptions& options,
                   std::ostream& log);

}  // namespace dimorph::cli
