#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dimorph/fit.hpp"
#include "dimorph/ibm.hpp"
#include "dimorph/kernels.hpp"
#include "dimorph/macro_solver.hpp"
#include "dimorph/measures.hpp"

namespace dimorph {

struct FixedPointResult {
  GridMeasure mu_star;
  std::size_t iterations = 0;
  /// Wasserstein distance between the last two iterates.
  double final_step_distance = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  bool damped = false;
  /// Step distance of every iteration.
  std::vector<double> steps;
};

struct FixedPointOptions {
  double tol = 1e-8;
  std::size_t max_iter = 10000;
  /// Largest accepted mean-condition error of the kernel, in grid cells.
  double mean_condition_cells = 0.5;
};

/// Iterates mu <- P(mu, mu) until consecutive iterates are within tol in Wasserstein
/// distance, switching to mu <- (mu + P(mu, mu)) / 2 if the step fails to shrink for
/// 5 iterations. Throws UnsupportedKernel if the kernel breaks the mean condition and
/// NoConvergence after max_iter.
FixedPointResult fixed_point(const InheritanceKernel& kernel, const GridMeasure& mu0,
                             const FixedPointOptions& options = {});

/// Common limit of the male and female means: (A m0 + n0) / (A + 1).
double limiting_mean(double A, double m0, double n0);

struct ConvergenceReport {
  std::vector<double> times;
  std::vector<double> dist_mu_nu;
  std::vector<double> dist_mu_star;
  std::vector<double> dist_nu_star;
  std::vector<double> dist_max;
  std::vector<double> mean_mu;
  std::vector<double> mean_nu;
  /// Fit of log dist_max over the part of the tail above the floor.
  LinearFit fit;
  bool fit_valid = false;
  /// dist_max never increases (beyond `slack`) between snapshots.
  bool max_non_increasing = true;
  /// dist_mu_nu never increases (beyond `slack`) between snapshots.
  bool gap_non_increasing = true;
};

ConvergenceReport convergence_report(const MacroTrajectory& traj, const GridMeasure& mu_star,
                                     double slack = 1e-12, double fit_floor = 1e-10);

struct LlnCell {
  std::size_t N = 0;
  double t = 0.0;
  double mean_error = 0.0;
  double std_error = 0.0;
  std::size_t replicas = 0;
};

struct LlnTable {
  std::vector<std::size_t> scales;
  std::vector<double> checkpoints;
  /// cells[i * checkpoints.size() + j] belongs to scales[i], checkpoints[j].
  std::vector<LlnCell> cells;

  const LlnCell& at(std::size_t i, std::size_t j) const { return cells[i * checkpoints.size() + j]; }
};

/// Per-run error at each checkpoint: mean over sexes of the Wasserstein distance between
/// the normalized empirical and macro distributions. runs[i] holds the replicas at
/// scales[i]; every run must carry a snapshot at each checkpoint. The macro trajectory
/// needs snapshots at the same times. Throws InsufficientReplicas below 3 replicas.
LlnTable lln_compare(const std::vector<std::size_t>& scales, const std::vector<std::vector<IbmTrajectory>>& runs,
                     const MacroTrajectory& macro, const std::vector<double>& checkpoints);

struct ContractionSample {
  double lhs = 0.0;  // d(P(mu1, nu1), P(mu2, nu2))
  double rhs = 0.0;  // max(d(mu1, mu2), d(nu1, nu2))
};

struct ContractionProbe {
  std::vector<ContractionSample> samples;
  std::size_t violations = 0;
  /// Smallest rhs - lhs over the samples.
  double min_margin = 0.0;
  /// Largest lhs / rhs.
  double max_ratio = 0.0;
};

/// Draws n_pairs pairs (mu1, mu2) and (nu1, nu2) of probability measures supported in
/// [lo, hi] with equal means within each pair, and compares both sides of the
/// contraction inequality.
ContractionProbe contraction_probe(const InheritanceKernel& kernel, const TraitGrid& grid, double lo, double hi,
                                   std::size_t n_pairs, std::uint64_t seed);

}  // namespace dimorph
