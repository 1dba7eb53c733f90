#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dimorph/measures.hpp"

namespace dimorph {

using Rng = std::mt19937_64;

/// Law of the inheritance noise Z (additive: offspring = (x+y)/2 + Z,
/// multiplicative: offspring = (x+y) Z).
class NoiseDensity {
 public:
  struct Gaussian {
    double sigma;
  };
  struct Uniform {
    double lo;
    double hi;
  };
  /// Piecewise-linear density through (z[i], density[i]); normalized on construction.
  struct Tabulated {
    std::vector<double> z;
    std::vector<double> density;
    std::vector<double> cdf;  // cumulative integral at each node
  };

  static NoiseDensity gaussian(double sigma);
  static NoiseDensity uniform(double lo, double hi);
  static NoiseDensity tabulated(std::vector<double> z, std::vector<double> density);

  double pdf(double z) const;
  double cdf(double z) const;
  double mean() const;
  double second_moment() const;
  /// Closed support bounds; +-infinity for the Gaussian.
  double support_lo() const;
  double support_hi() const;
  double sample(Rng& rng) const;
  std::string describe() const;

  const std::variant<Gaussian, Uniform, Tabulated>& law() const { return law_; }

 private:
  explicit NoiseDensity(std::variant<Gaussian, Uniform, Tabulated> law) : law_(std::move(law)) {}
  std::variant<Gaussian, Uniform, Tabulated> law_;
};

/// One offspring law k(x, y, .) restricted to the grid and renormalized.
struct KernelRow {
  GridMeasure measure;
  /// Probability that fell outside the grid before renormalization.
  double tail_mass = 0.0;
};

/// Offspring-trait law k(x, y, dz).
class InheritanceKernel {
 public:
  enum class Family { additive, multiplicative, density, sampling_only };

  using DensityFn = std::function<double(double x, double y, double z)>;
  using SamplerFn = std::function<double(double x, double y, Rng& rng)>;

  static InheritanceKernel additive(NoiseDensity h);
  /// Requires h supported in [0, 1] with mean 1/2 (within 1e-9).
  static InheritanceKernel multiplicative(NoiseDensity h);
  /// Custom density kappa(x, y, z). Sampling and CDF evaluation use the midpoint
  /// discretization on `resolution`.
  static InheritanceKernel from_density(DensityFn density, TraitGrid resolution, std::string name);
  /// Sampling-only kernels support sample_offspring and nothing else.
  static InheritanceKernel sampling_only(SamplerFn sampler, std::string name);

  Family family() const { return family_; }
  const NoiseDensity& noise() const;
  const std::string& name() const { return name_; }

  /// True when k(x, y, .) depends on (x, y) only through x + y.
  bool depends_on_sum_only() const {
    return family_ == Family::additive || family_ == Family::multiplicative;
  }

  KernelRow density_row(double x, double y, const TraitGrid& grid) const;
  /// K(x, y, z) = k(x, y, (-inf, z]).
  double cdf(double x, double y, double z) const;
  double sample(double x, double y, Rng& rng) const;

 private:
  InheritanceKernel() = default;

  Family family_ = Family::additive;
  std::string name_;
  std::shared_ptr<const NoiseDensity> noise_;
  DensityFn density_;
  std::shared_ptr<const TraitGrid> resolution_;
  SamplerFn sampler_;
};

/// Loads a custom kernel from CSV rows "x,y,z,density" on a full rectangular lattice.
/// The density is interpolated trilinearly and symmetrized in (x, y).
InheritanceKernel load_tabulated_kernel(const std::string& path, const TraitGrid& resolution);

/// P(mu, nu)(dz) = int int k(x, y, dz) mu(dx) nu(dy), discretized on a fixed grid.
/// For kernels that depend on x + y only, the 2n-1 distinct rows are cached and the
/// operator is a discrete convolution followed by a row contraction (O(n^2)).
class BirthOperator {
 public:
  BirthOperator(InheritanceKernel kernel, const TraitGrid& grid);

  const TraitGrid& grid() const { return grid_; }
  const InheritanceKernel& kernel() const { return kernel_; }
  /// Largest tail mass dropped by any cached row.
  double max_tail_mass() const { return max_tail_mass_; }

  GridMeasure apply(const GridMeasure& mu, const GridMeasure& nu) const;
  /// Allocation-free form; `out` must have grid().size() entries.
  void apply_into(std::span<const double> mu, std::span<const double> nu, std::span<double> out) const;

 private:
  InheritanceKernel kernel_;
  TraitGrid grid_;
  bool sum_indexed_ = false;
  bool pair_cache_ = false;
  std::vector<double> rows_;            // sum-indexed: (2n-1) x n; pair cache: n^2 x n
  std::vector<std::size_t> row_lo_;     // first non-zero column of each row
  std::vector<std::size_t> row_hi_;     // one past the last non-zero column
  double max_tail_mass_ = 0.0;
};

GridMeasure birth_operator(const InheritanceKernel& kernel, const GridMeasure& mu, const GridMeasure& nu);

/// Direct triple sum over (x, y) cell pairs with a freshly computed row for each pair.
/// O(n^3); kept as an independent reference for the fast path.
GridMeasure birth_operator_tensor(const InheritanceKernel& kernel, const GridMeasure& mu,
                                  const GridMeasure& nu);

struct HypothesisConfig {
  std::size_t n_triples = 400;
  /// Sub-cells per grid cell for the z-integral of condition (i).
  std::size_t z_refine = 4;
  double gamma = 2.0;
  /// Admissible range of first moments for condition (ii).
  double mean_lo = 0.0;
  double mean_hi = 0.0;
  /// Measures for condition (ii) are supported in [support_lo, support_hi]; when the
  /// range is empty the whole grid is used.
  double support_lo = 0.0;
  double support_hi = 0.0;
  std::size_t n_pairs = 300;
  std::size_t n_mean_samples = 400;
  std::uint64_t seed = 12345;
};

struct ConditionII {
  double gamma = 2.0;
  double c_est = 0.0;
  double l_est = 0.0;
  bool holds = false;
};

struct HypothesisReport {
  double condition_i_max = 0.0;
  double condition_i_a = 0.0;
  double condition_i_b = 0.0;
  double condition_i_y = 0.0;
  ConditionII condition_ii;
  double mean_condition_max_error = 0.0;
  std::size_t triples_used = 0;
  std::size_t pairs_used = 0;
  std::size_t mean_samples_used = 0;
};

/// int |d/dx K(a, y, z) - d/dx K(b, y, z)| dz with central differences of step dx/2.
double condition_i_contribution(const InheritanceKernel& kernel, const TraitGrid& grid, double a,
                                double b, double y, std::size_t z_refine = 4);

/// Largest |mean(row(x, y)) - (x+y)/2| over sampled cell-center pairs whose rows keep
/// at least 1 - 1e-6 of their mass on the grid.
double mean_condition_error(const InheritanceKernel& kernel, const TraitGrid& grid,
                            std::size_t n_samples, std::uint64_t seed);

/// Numerical certificate for the stability hypotheses on a finite sample.
/// Throws UnsupportedKernel for sampling-only kernels.
HypothesisReport check_hypotheses(const InheritanceKernel& kernel, const TraitGrid& grid,
                                  const HypothesisConfig& config);

}  // namespace dimorph
