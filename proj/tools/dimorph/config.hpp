#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "dimorph/ibm.hpp"
#include "dimorph/kernels.hpp"
#include "dimorph/macro_solver.hpp"
#include "dimorph/measures.hpp"
#include "dimorph/rates.hpp"

namespace dimorph::cli {

inline constexpr int kSchemaVersion = 1;

/// Invalid or unreadable configuration; `field` is the JSON path of the culprit.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct GridSpec {
  double x_min = -6.0;
  double x_max = 6.0;
  std::size_t n_cells = 128;
};

struct NoiseSpec {
  std::string kind = "gaussian";  // gaussian | uniform
  double sigma = 0.5;
  double lo = 0.0;
  double hi = 1.0;
};

struct KernelSpec {
  std::string family = "additive";  // additive | multiplicative | tabulated
  NoiseSpec noise;
  std::string path;  // tabulated only
};

struct ShapeSpec {
  std::string shape = "gaussian";  // point | uniform | gaussian | tabulated
  double mass = 1.0;
  double at = 0.0;
  double lo = 0.0;
  double hi = 1.0;
  double mean = 0.0;
  double sd = 1.0;
  std::string path;
};

struct TotalsSpec {
  double M0 = 1.0;
  double F0 = 1.0;
  double t_end = 60.0;
  double dt = 0.01;
  std::size_t stride = 100;
};

struct IbmSpec {
  std::size_t N = 1000;
  double t_end = 1.0;
  std::vector<double> sample_times;
  std::size_t replicas = 1;
  InitMode init = InitMode::quantile;
};

struct LlnSpec {
  std::vector<std::size_t> scales{100, 1000, 10000};
  std::size_t replicas = 10;
  std::vector<double> checkpoints{1.0, 3.0};
};

struct FixedPointSpec {
  double tol = 1e-8;
  std::size_t max_iter = 10000;
  bool check_hypotheses = false;
};

struct AcceptanceSpec {
  std::vector<int> criteria;  // empty = all
};

/// Parsed and validated scenario configuration.
struct ScenarioConfig {
  int schema_version = kSchemaVersion;
  std::string scenario;
  GridSpec grid;
  ConstantRates rates{2.0, 2.0, 1.0, 1.0, 0.25, 0.25, 0.25, 0.25};
  KernelSpec kernel;
  ShapeSpec male0;
  ShapeSpec female0;
  SolverConfig solver;
  /// Present when the macro run integrates the normalized system with this A.
  std::optional<double> normalized_A;
  TotalsSpec totals;
  IbmSpec ibm;
  LlnSpec lln;
  FixedPointSpec fixed_point;
  AcceptanceSpec acceptance;
  std::uint64_t seed = 1;
  std::string out_dir;
  std::string base_dir;  // directory of the config file, for relative paths

  TraitGrid make_grid() const;
  RateSet make_rates() const;
  InheritanceKernel make_kernel() const;
  GridMeasure make_initial(const ShapeSpec& s) const;
};

/// Parses JSON text. Throws ConfigError naming the offending field.
ScenarioConfig parse_config(const nlohmann::json& j, const std::string& base_dir = ".");
ScenarioConfig load_config(const std::string& path);

}  // namespace dimorph::cli
