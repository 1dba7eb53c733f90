#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace dimorph {

/// Uniform partition of a closed trait interval [x_min, x_max] into n_cells cells.
/// Every measure in the library lives on one of these; cell i is represented by its
/// center z_i = x_min + (i + 1/2) dx.
class TraitGrid {
 public:
  TraitGrid(double x_min, double x_max, std::size_t n_cells);

  double x_min() const { return x_min_; }
  double x_max() const { return x_max_; }
  std::size_t size() const { return n_cells_; }
  double dx() const { return dx_; }

  double center(std::size_t i) const { return x_min_ + (static_cast<double>(i) + 0.5) * dx_; }
  /// Left boundary of cell i; edge(size()) == x_max.
  double edge(std::size_t i) const;
  std::vector<double> centers() const;

  /// Cell containing x; values outside the interval map to the nearest end cell.
  std::size_t cell_of(double x) const;
  bool contains(double x) const { return x >= x_min_ && x <= x_max_; }

  friend bool operator==(const TraitGrid& a, const TraitGrid& b) {
    return a.x_min_ == b.x_min_ && a.x_max_ == b.x_max_ && a.n_cells_ == b.n_cells_;
  }

 private:
  double x_min_;
  double x_max_;
  std::size_t n_cells_;
  double dx_;
};

/// Finite non-negative measure on a TraitGrid: weights[i] is the mass of cell i.
class GridMeasure {
 public:
  explicit GridMeasure(const TraitGrid& grid);
  GridMeasure(const TraitGrid& grid, std::vector<double> weights);

  const TraitGrid& grid() const { return grid_; }
  std::span<const double> weights() const { return weights_; }
  double operator[](std::size_t i) const { return weights_[i]; }
  std::size_t size() const { return weights_.size(); }

  /// Mutable access for builders and integrators; callers keep weights non-negative.
  std::vector<double>& mutable_weights() { return weights_; }

  GridMeasure scaled(double factor) const;

  friend bool operator==(const GridMeasure& a, const GridMeasure& b) {
    return a.grid_ == b.grid_ && a.weights_ == b.weights_;
  }

 private:
  TraitGrid grid_;
  std::vector<double> weights_;
};

/// Cumulative distribution of the signed measure a - b evaluated at cell centers.
struct SignedCdf {
  TraitGrid grid;
  std::vector<double> values;
};

/// Absolute tolerance on |mass(a) - mass(b)| for the Wasserstein precondition.
inline constexpr double kMassTolerance = 1e-9;

double total_mass(const GridMeasure& m);

/// Raw moment sum_i z_i^k w_i (midpoint rule).
double moment(const GridMeasure& m, unsigned k);
/// sum_i |z_i|^gamma w_i.
double abs_moment(const GridMeasure& m, double gamma);
/// First moment of the normalized measure. Throws ZeroMass.
double mean(const GridMeasure& m);
/// Central second moment of the normalized measure. Throws ZeroMass.
double variance(const GridMeasure& m);

SignedCdf signed_cdf(const GridMeasure& a, const GridMeasure& b);

/// Wasserstein-1 distance between measures of equal mass, computed as the integral of
/// |CDF(a - b)|. Throws MassMismatch when the masses differ by more than mass_tol.
double wasserstein1(const GridMeasure& a, const GridMeasure& b, double mass_tol = kMassTolerance);

double total_variation(const GridMeasure& a, const GridMeasure& b);

/// Splits m into a probability measure and its original mass. Throws ZeroMass.
std::pair<GridMeasure, double> normalize(const GridMeasure& m);

// Builders for common initial shapes. Cell weights are exact cell probabilities of the
// continuous law (restricted to the grid and rescaled to `mass`).

GridMeasure point_mass(const TraitGrid& grid, double at, double mass = 1.0);
GridMeasure uniform_measure(const TraitGrid& grid, double lo, double hi, double mass = 1.0);
GridMeasure gaussian_measure(const TraitGrid& grid, double mean, double sd, double mass = 1.0);

/// Moves the mass of each (center, weight) pair into the cell containing center.
GridMeasure bin_points(const TraitGrid& grid, std::span<const double> positions,
                       std::span<const double> weights);

}  // namespace dimorph
