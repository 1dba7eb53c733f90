#include "dimorph/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "dimorph/error.hpp"

namespace dimorph {

TraitGrid::TraitGrid(double x_min, double x_max, std::size_t n_cells)
    : x_min_(x_min), x_max_(x_max), n_cells_(n_cells), dx_(0.0) {
  if (!(std::isfinite(x_min) && std::isfinite(x_max)) || !(x_min < x_max)) {
    throw std::invalid_argument("TraitGrid: need finite x_min < x_max");
  }
  if (n_cells < 2) {
    throw std::invalid_argument("TraitGrid: need at least 2 cells");
  }
  dx_ = (x_max - x_min) / static_cast<double>(n_cells);
}

double TraitGrid::edge(std::size_t i) const {
  if (i >= n_cells_) return x_max_;
  return x_min_ + static_cast<double>(i) * dx_;
}

std::vector<double> TraitGrid::centers() const {
  std::vector<double> out(n_cells_);
  for (std::size_t i = 0; i < n_cells_; ++i) out[i] = center(i);
  return out;
}

std::size_t TraitGrid::cell_of(double x) const {
  if (!(x > x_min_)) return 0;
  const double k = std::floor((x - x_min_) / dx_);
  if (k >= static_cast<double>(n_cells_ - 1)) return n_cells_ - 1;
  return static_cast<std::size_t>(k);
}

GridMeasure::GridMeasure(const TraitGrid& grid) : grid_(grid), weights_(grid.size(), 0.0) {}

GridMeasure::GridMeasure(const TraitGrid& grid, std::vector<double> weights)
    : grid_(grid), weights_(std::move(weights)) {
  if (weights_.size() != grid_.size()) {
    throw std::invalid_argument("GridMeasure: weight count " + std::to_string(weights_.size()) +
                                " does not match grid size " + std::to_string(grid_.size()));
  }
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("GridMeasure: weights must be finite and non-negative");
    }
  }
}

GridMeasure GridMeasure::scaled(double factor) const {
  GridMeasure out = *this;
  for (double& w : out.weights_) w *= factor;
  return out;
}

double total_mass(const GridMeasure& m) {
  const auto w = m.weights();
  return std::accumulate(w.begin(), w.end(), 0.0);
}

double moment(const GridMeasure& m, unsigned k) {
  const auto& g = m.grid();
  double acc = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    double zk = 1.0;
    const double z = g.center(i);
    for (unsigned p = 0; p < k; ++p) zk *= z;
    acc += zk * m[i];
  }
  return acc;
}

double abs_moment(const GridMeasure& m, double gamma) {
  const auto& g = m.grid();
  double acc = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) acc += std::pow(std::abs(g.center(i)), gamma) * m[i];
  return acc;
}

double mean(const GridMeasure& m) {
  const double mass = total_mass(m);
  if (!(mass > 0.0)) throw ZeroMass("mean: measure has zero mass");
  return moment(m, 1) / mass;
}

double variance(const GridMeasure& m) {
  const double mass = total_mass(m);
  if (!(mass > 0.0)) throw ZeroMass("variance: measure has zero mass");
  const double mu = moment(m, 1) / mass;
  const auto& g = m.grid();
  double acc = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double d = g.center(i) - mu;
    acc += d * d * m[i];
  }
  return acc / mass;
}

static void require_same_grid(const GridMeasure& a, const GridMeasure& b, const char* what) {
  if (!(a.grid() == b.grid())) throw GridMismatch(std::string(what) + ": measures live on different grids");
}

SignedCdf signed_cdf(const GridMeasure& a, const GridMeasure& b) {
  require_same_grid(a, b, "signed_cdf");
  SignedCdf out{a.grid(), std::vector<double>(a.size())};
  double run = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    run += a[i] - b[i];
    out.values[i] = run;
  }
  return out;
}

double wasserstein1(const GridMeasure& a, const GridMeasure& b, double mass_tol) {
  require_same_grid(a, b, "wasserstein1");
  const double ma = total_mass(a);
  const double mb = total_mass(b);
  if (std::abs(ma - mb) > mass_tol) {
    throw MassMismatch("wasserstein1: masses differ (" + std::to_string(ma) + " vs " +
                       std::to_string(mb) + ")");
  }
  // The CDF of a - b is piecewise constant between consecutive centers, so the integral
  // over the trait interval is dx times the sum over cells.
  double run = 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    run += a[i] - b[i];
    acc += std::abs(run);
  }
  return acc * a.grid().dx();
}

double total_variation(const GridMeasure& a, const GridMeasure& b) {
  require_same_grid(a, b, "total_variation");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return acc;
}

std::pair<GridMeasure, double> normalize(const GridMeasure& m) {
  const double mass = total_mass(m);
  if (!(mass > 0.0)) throw ZeroMass("normalize: measure has zero mass");
  return {m.scaled(1.0 / mass), mass};
}

GridMeasure point_mass(const TraitGrid& grid, double at, double mass) {
  if (!grid.contains(at)) throw std::invalid_argument("point_mass: location outside the grid");
  if (!(mass >= 0.0)) throw std::invalid_argument("point_mass: negative mass");
  GridMeasure out(grid);
  out.mutable_weights()[grid.cell_of(at)] = mass;
  return out;
}

static GridMeasure rescale_to(GridMeasure m, double mass, const char* what) {
  const double have = total_mass(m);
  if (!(have > 0.0)) throw std::invalid_argument(std::string(what) + ": law has no mass on the grid");
  for (double& w : m.mutable_weights()) w *= mass / have;
  return m;
}

GridMeasure uniform_measure(const TraitGrid& grid, double lo, double hi, double mass) {
  if (!(lo < hi)) throw std::invalid_argument("uniform_measure: need lo < hi");
  GridMeasure out(grid);
  auto& w = out.mutable_weights();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double overlap = std::min(hi, grid.edge(i + 1)) - std::max(lo, grid.edge(i));
    w[i] = overlap > 0.0 ? overlap : 0.0;
  }
  return rescale_to(std::move(out), mass, "uniform_measure");
}

GridMeasure gaussian_measure(const TraitGrid& grid, double mu, double sd, double mass) {
  if (!(sd > 0.0)) throw std::invalid_argument("gaussian_measure: need sd > 0");
  GridMeasure out(grid);
  auto& w = out.mutable_weights();
  const double s = sd * std::sqrt(2.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double a = (grid.edge(i) - mu) / s;
    const double b = (grid.edge(i + 1) - mu) / s;
    // Difference of complementary error functions on the side of the tail keeps precision.
    const double p = (a >= 0.0) ? 0.5 * (std::erfc(a) - std::erfc(b)) : 0.5 * (std::erfc(-b) - std::erfc(-a));
    w[i] = std::max(p, 0.0);
  }
  return rescale_to(std::move(out), mass, "gaussian_measure");
}

GridMeasure bin_points(const TraitGrid& grid, std::span<const double> positions,
                       std::span<const double> weights) {
  if (positions.size() != weights.size()) throw std::invalid_argument("bin_points: length mismatch");
  GridMeasure out(grid);
  auto& w = out.mutable_weights();
  for (std::size_t k = 0; k < positions.size(); ++k) {
    if (!(weights[k] >= 0.0)) throw std::invalid_argument("bin_points: negative weight");
    w[grid.cell_of(positions[k])] += weights[k];
  }
  return out;
}

}  // namespace dimorph
