#include "dimorph/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "dimorph/error.hpp"

namespace dimorph {

FixedPointResult fixed_point(const InheritanceKernel& kernel, const GridMeasure& mu0, const FixedPointOptions& options) {
  if (kernel.family() == InheritanceKernel::Family::sampling_only) {
    throw UnsupportedKernel("fixed_point: kernel '" + kernel.name() + "' has no density rows");
  }
  const TraitGrid& grid = mu0.grid();
  const double mean_err = mean_condition_error(kernel, grid, 200, 7);
  if (mean_err > options.mean_condition_cells * grid.dx()) {
    throw UnsupportedKernel("fixed_point: kernel '" + kernel.name() +
                            "' violates the mean condition (error " + std::to_string(mean_err) + ")");
  }
  if (std::abs(total_mass(mu0) - 1.0) > 1e-9) {
    throw std::invalid_argument("fixed_point: mu0 must be a probability measure");
  }

  const BirthOperator op(kernel, grid);
  FixedPointResult res{mu0, 0, 0.0, 0.0, 0.0, false, {}};
  GridMeasure next(grid);
  std::size_t stalled = 0;
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t it = 1; it <= options.max_iter; ++it) {
    op.apply_into(res.mu_star.weights(), res.mu_star.weights(), next.mutable_weights());
    auto& w = next.mutable_weights();
    if (res.damped) {
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.5 * (w[i] + res.mu_star[i]);
    }
    // mass(P(mu, mu)) = mass(mu)^2 doubles any rounding drift, so renormalize.
    const double mass = total_mass(next);
    for (double& v : w) v /= mass;
    const double step = wasserstein1(next, res.mu_star, 1e-6);
    res.steps.push_back(step);
    std::swap(res.mu_star, next);
    res.iterations = it;
    res.final_step_distance = step;
    if (step < options.tol) {
      res.mean = mean(res.mu_star);
      res.variance = variance(res.mu_star);
      return res;
    }
    stalled = step >= previous ? stalled + 1 : 0;
    if (!res.damped && stalled >= 5) res.damped = true;
    previous = step;
  }
  throw NoConvergence("fixed_point: no convergence after " + std::to_string(options.max_iter) +
                      " iterations (last step " + std::to_string(res.final_step_distance) + ")");
}

double limiting_mean(double A, double m0, double n0) {
  if (!(A > 0.0)) throw std::invalid_argument("limiting_mean: A must be positive");
  return (A * m0 + n0) / (A + 1.0);
}

ConvergenceReport convergence_report(const MacroTrajectory& traj, const GridMeasure& mu_star, double slack,
                                     double fit_floor) {
  ConvergenceReport r;
  for (const MacroState& s : traj.snapshots) {
    r.times.push_back(s.t);
    r.dist_mu_nu.push_back(wasserstein1(s.m, s.f, 1e-6));
    r.dist_mu_star.push_back(wasserstein1(s.m, mu_star, 1e-6));
    r.dist_nu_star.push_back(wasserstein1(s.f, mu_star, 1e-6));
    r.dist_max.push_back(std::max(r.dist_mu_star.back(), r.dist_nu_star.back()));
    r.mean_mu.push_back(mean(s.m));
    r.mean_nu.push_back(mean(s.f));
  }
  for (std::size_t i = 1; i < r.times.size(); ++i) {
    if (r.dist_max[i] > r.dist_max[i - 1] + slack) r.max_non_increasing = false;
    if (r.dist_mu_nu[i] > r.dist_mu_nu[i - 1] + slack) r.gap_non_increasing = false;
  }
  // Tail fit: the second half of the snapshots that are still above the floor.
  std::vector<double> t, v;
  for (std::size_t i = 0; i < r.times.size(); ++i) {
    if (r.dist_max[i] > fit_floor) {
      t.push_back(r.times[i]);
      v.push_back(r.dist_max[i]);
    }
  }
  const std::size_t half = t.size() / 2;
  if (t.size() - half >= 3) {
    const std::span<const double> tt(t.data() + half, t.size() - half);
    const std::span<const double> vv(v.data() + half, v.size() - half);
    try {
      r.fit = fit_log_tail(tt, vv, fit_floor, std::numeric_limits<double>::infinity());
      r.fit_valid = true;
    } catch (const std::invalid_argument&) {
      r.fit_valid = false;
    }
  }
  return r;
}

namespace {

const MacroState& macro_at(const MacroTrajectory& macro, double t) {
  for (const MacroState& s : macro.snapshots) {
    if (std::abs(s.t - t) <= 1e-9 * std::max(1.0, std::abs(t))) return s;
  }
  throw std::invalid_argument("lln_compare: macro trajectory has no snapshot at t = " + std::to_string(t));
}

const IbmSnapshot* ibm_at(const IbmTrajectory& run, double t) {
  for (const IbmSnapshot& s : run.snapshots) {
    if (std::abs(s.t - t) <= 1e-9 * std::max(1.0, std::abs(t))) return &s;
  }
  return nullptr;
}

// W1 between normalized measures; an empty empirical class counts as the worst case.
double normalized_distance(const GridMeasure& empirical, const GridMeasure& macro) {
  const double mass = total_mass(empirical);
  if (!(mass > 0.0)) return empirical.grid().x_max() - empirical.grid().x_min();
  return wasserstein1(normalize(empirical).first, normalize(macro).first, 1e-9);
}

}  // namespace

LlnTable lln_compare(const std::vector<std::size_t>& scales, const std::vector<std::vector<IbmTrajectory>>& runs,
                     const MacroTrajectory& macro, const std::vector<double>& checkpoints) {
  if (scales.size() != runs.size()) throw std::invalid_argument("lln_compare: one replica list per scale");
  LlnTable table{scales, checkpoints, {}};
  for (std::size_t i = 0; i < scales.size(); ++i) {
    const auto& reps = runs[i];
    if (reps.size() < 3) {
      throw InsufficientReplicas("lln_compare: N = " + std::to_string(scales[i]) + " has " +
                                 std::to_string(reps.size()) + " replicas, need at least 3");
    }
    for (double t : checkpoints) {
      const MacroState& ref = macro_at(macro, t);
      std::vector<double> errors;
      for (const IbmTrajectory& run : reps) {
        const IbmSnapshot* s = ibm_at(run, t);
        double e = 0.0;
        if (s == nullptr) {
          e = ref.m.grid().x_max() - ref.m.grid().x_min();  // extinct before t
        } else {
          e = 0.5 * (normalized_distance(s->male, ref.m) + normalized_distance(s->female, ref.f));
        }
        errors.push_back(e);
      }
      const double n = static_cast<double>(errors.size());
      double mu = 0.0;
      for (double e : errors) mu += e;
      mu /= n;
      double ss = 0.0;
      for (double e : errors) ss += (e - mu) * (e - mu);
      const double sd = std::sqrt(ss / (n - 1.0));
      table.cells.push_back({scales[i], t, mu, sd / std::sqrt(n), errors.size()});
    }
  }
  return table;
}

namespace {

// Random probability measure on the cells whose centers lie in [lo, hi]: a mixture of
// a few Gaussian bumps, occasionally spiked with point masses.
std::vector<double> random_measure(const TraitGrid& grid, std::size_t first, std::size_t last, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double lo = grid.center(first), hi = grid.center(last);
  std::vector<double> w(grid.size(), 0.0);
  const int bumps = 1 + static_cast<int>(unit(rng) * 4.0);
  for (int b = 0; b < bumps; ++b) {
    const double c = lo + unit(rng) * (hi - lo);
    const double sd = (0.02 + 0.3 * unit(rng)) * (hi - lo);
    const double weight = 0.1 + unit(rng);
    for (std::size_t i = first; i <= last; ++i) {
      const double z = (grid.center(i) - c) / sd;
      w[i] += weight * std::exp(-0.5 * z * z);
    }
  }
  if (unit(rng) < 0.3) {
    const auto spikes = 1 + static_cast<std::size_t>(unit(rng) * 3.0);
    for (std::size_t k = 0; k < spikes; ++k) {
      const auto i = first + std::min(last - first, static_cast<std::size_t>(unit(rng) * static_cast<double>(last - first + 1)));
      w[i] += unit(rng) * 2.0;
    }
  }
  double s = 0.0;
  for (double v : w) s += v;
  for (double& v : w) v /= s;
  return w;
}

double grid_mean(const TraitGrid& grid, const std::vector<double>& w) {
  double m = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) m += grid.center(i) * w[i];
  return m;
}

// Mixes w with a point mass at the lower or upper end cell so that its mean becomes target.
void match_mean(const TraitGrid& grid, std::vector<double>& w, std::size_t first, std::size_t last, double target) {
  const double m = grid_mean(grid, w);
  const std::size_t end = target > m ? last : first;
  const double z = grid.center(end);
  if (std::abs(z - m) < 1e-300) return;
  const double theta = (target - m) / (z - m);
  for (double& v : w) v *= (1.0 - theta);
  w[end] += theta;
}

}  // namespace

ContractionProbe contraction_probe(const InheritanceKernel& kernel, const TraitGrid& grid, double lo, double hi,
                                   std::size_t n_pairs, std::uint64_t seed) {
  if (!(lo < hi)) throw std::invalid_argument("contraction_probe: need lo < hi");
  const std::size_t first = grid.cell_of(lo);
  const std::size_t last = grid.cell_of(hi);
  if (last <= first + 1) throw std::invalid_argument("contraction_probe: support range covers too few cells");
  const BirthOperator op(kernel, grid);
  Rng rng(seed);
  ContractionProbe probe;
  probe.min_margin = std::numeric_limits<double>::infinity();
  while (probe.samples.size() < n_pairs) {
    auto mu1 = random_measure(grid, first, last, rng);
    auto mu2 = random_measure(grid, first, last, rng);
    auto nu1 = random_measure(grid, first, last, rng);
    auto nu2 = random_measure(grid, first, last, rng);
    match_mean(grid, mu2, first, last, grid_mean(grid, mu1));
    match_mean(grid, nu2, first, last, grid_mean(grid, nu1));
    const GridMeasure a1(grid, mu1), a2(grid, mu2), b1(grid, nu1), b2(grid, nu2);
    const double rhs = std::max(wasserstein1(a1, a2), wasserstein1(b1, b2));
    if (!(rhs > 0.0)) continue;
    const double lhs = wasserstein1(op.apply(a1, b1), op.apply(a2, b2), 1e-6);
    probe.samples.push_back({lhs, rhs});
    if (!(lhs < rhs)) ++probe.violations;
    probe.min_margin = std::min(probe.min_margin, rhs - lhs);
    probe.max_ratio = std::max(probe.max_ratio, lhs / rhs);
  }
  return probe;
}

}  // namespace dimorph
