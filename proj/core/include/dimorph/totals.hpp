#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "dimorph/rates.hpp"

namespace dimorph {

/// Total male and female masses M(t), F(t).
struct TotalsState {
  double M = 0.0;
  double F = 0.0;

  /// lambda = (p_f F + p_m M) / 2, the birth rate shared by both sexes.
  double birth_rate(const ConstantRates& r) const { return 0.5 * (r.p_f * F + r.p_m * M); }
  std::optional<double> sex_ratio() const {
    if (!(F > 0.0)) return std::nullopt;
    return M / F;
  }
};

enum class Regime { persistence, extinction };

const char* to_string(Regime r);

/// (dM/dt, dF/dt) of the total-mass system.
std::pair<double, double> totals_rhs(const TotalsState& s, const ConstantRates& r);

/// p_m/D_m + p_f/D_f, the sum of the sexes' reproductive adaptations.
double adaptation_sum(const ConstantRates& r);

/// Persistence iff adaptation_sum > 2; the boundary counts as extinction.
Regime classify(const ConstantRates& r);

/// Largest relative residual of the stationary polynomial system at (M, F): each
/// equation's absolute value divided by the sum of its terms' magnitudes.
double poly_residual(const ConstantRates& r, double M, double F);

struct StationaryResult {
  enum class Kind { persistent, extinct_only };
  Kind kind = Kind::extinct_only;
  double M_bar = 0.0;
  double F_bar = 0.0;
  double residual = 0.0;
  std::size_t starts = 0;
  std::size_t starts_converged = 0;
  /// Largest relative disagreement between converged starts.
  double start_spread = 0.0;
};

struct RootAttempt {
  bool converged = false;
  double M = 0.0;
  double F = 0.0;
  double residual = 0.0;
  std::size_t newton_iterations = 0;
  bool used_flow = false;
};

/// Damped Newton for the positive stationary point from one start (M0, F0 > 0).
/// Iterates on log M, log F with each equation divided by its own sex's mass, so the
/// trivial root at the origin is not an attractor. If Newton stalls, the start is
/// carried along the total-mass flow for a while and Newton is retried.
RootAttempt find_positive_root(const ConstantRates& r, double M0, double F0);

/// Unique positive stationary point in the persistence regime (16-start grid).
/// Throws ConvergenceFailure if no start reaches residual < 1e-10.
StationaryResult stationary_point(const ConstantRates& r);

struct UniquenessProbe {
  std::size_t starts = 0;
  std::size_t converged = 0;
  double M_ref = 0.0;
  double F_ref = 0.0;
  /// Largest |root - reference| over converged starts (absolute, both coordinates).
  double max_deviation = 0.0;
  double max_residual = 0.0;
};

/// Runs find_positive_root from n_starts uniform random starts in (0, box]^2, where
/// box defaults to 10 * max(M_bar, F_bar).
UniquenessProbe probe_uniqueness(const ConstantRates& r, std::size_t n_starts, std::uint64_t seed,
                                 double box = 0.0);

struct TotalsSample {
  double t = 0.0;
  double M = 0.0;
  double F = 0.0;
};

/// Classical RK4 on the total-mass system, recording every `stride`-th step
/// (plus the initial and final states).
std::vector<TotalsSample> integrate_totals(const TotalsState& s0, const ConstantRates& r, double t_end, double dt,
                                           std::size_t stride = 1);

}  // namespace dimorph
