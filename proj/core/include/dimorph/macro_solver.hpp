#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "dimorph/kernels.hpp"
#include "dimorph/measures.hpp"
#include "dimorph/rates.hpp"

namespace dimorph {

/// Male measure m and female measure f at time t. For the normalized systems m holds
/// mu_t and f holds nu_t.
struct MacroState {
  GridMeasure m;
  GridMeasure f;
  double t = 0.0;
};

enum class Scheme { euler, rk4 };

enum class Positivity {
  automatic,         // clip for raw systems, clip and renormalize for normalized ones
  clip,              // zero negative weights, keep the remaining mass
  clip_renormalize,  // zero negative weights, rescale to the pre-step mass
  reject_step        // halve the step (up to 20 times) until no weight turns negative
};

struct SolverConfig {
  /// Step size; 0 selects 0.1 / (max per-capita rate) from a scan of the initial state.
  double dt = 0.0;
  Scheme scheme = Scheme::rk4;
  Positivity positivity = Positivity::automatic;
  double t_end = 1.0;
  /// Snapshot every `stride` steps when sample_times is empty.
  std::size_t stride = 1;
  /// Explicit snapshot times in (0, t_end]; steps are shortened to land on them.
  std::vector<double> sample_times;
};

struct MacroDiagnostics {
  std::size_t steps = 0;
  double dt_used = 0.0;
  /// 0.1 / (max per-capita rate) at the initial state.
  double dt_bound = 0.0;
  bool dt_exceeds_bound = false;
  double clipped_mass = 0.0;
  std::size_t clip_events = 0;
  std::size_t rejected_steps = 0;
  /// Steps during which one sex class had no mating capability and births were off.
  std::size_t empty_sex_steps = 0;
  double max_tail_mass = 0.0;
  /// Normalized systems: largest per-step mass drift removed by projection.
  double max_mass_correction = 0.0;
};

struct MacroTrajectory {
  std::vector<MacroState> snapshots;
  MacroDiagnostics diagnostics;
};

/// Trait-resolved two-sex system with precomputed per-cell rates and competition
/// matrices. Births use the kernels fast path whenever the kernel allows it.
class MacroModel {
 public:
  MacroModel(RateSet rates, InheritanceKernel kernel, const TraitGrid& grid);

  const TraitGrid& grid() const { return op_.grid(); }
  const BirthOperator& birth_operator() const { return op_; }
  bool constant_rates() const { return constant_; }

  /// Birth density shared by both sexes. Returns false (and zeros) when a sex class
  /// has no mass, in which case dynamics are pure death.
  bool birth_density(std::span<const double> m, std::span<const double> f, std::span<double> out) const;

  /// Per-cell death rates D + U * m + U * f of males (sex_male) or females.
  void death_rates(std::span<const double> m, std::span<const double> f, bool male, std::span<double> out) const;

  /// Right-hand side (dm, df). Returns false when births were switched off.
  bool rhs(std::span<const double> m, std::span<const double> f, std::span<double> dm, std::span<double> df) const;

  /// Largest per-capita rate (death or birth per unit of own mass) at the given state.
  double max_per_capita_rate(std::span<const double> m, std::span<const double> f) const;

 private:
  RateSet rates_;
  BirthOperator op_;
  bool constant_;
  bool constant_u_;
  std::vector<double> p_f_, p_m_, D_f_, D_m_;
  // Row-major n x n competition matrices U(z_i, z_j); empty when constant.
  std::vector<double> U_ff_, U_fm_, U_mf_, U_mm_;
  double u_ff_ = 0.0, u_fm_ = 0.0, u_mf_ = 0.0, u_mm_ = 0.0;
};

/// (dm, df) of the trait-resolved system at state. Throws GridMismatch.
std::pair<GridMeasure, GridMeasure> rhs_general(const MacroState& state, const RateSet& rates,
                                                const InheritanceKernel& kernel);

/// Integrates the trait-resolved system.
MacroTrajectory integrate(const MacroState& state0, const MacroModel& model, const SolverConfig& config);
MacroTrajectory integrate(const MacroState& state0, const RateSet& rates, const InheritanceKernel& kernel,
                          const SolverConfig& config);

/// Constant A or A(t).
using SexRatio = std::variant<double, std::function<double(double)>>;

/// mu' = -mu + P(mu, nu), nu' = -A nu + A P(mu, nu) for probability measures mu, nu.
/// Any A > 0 is accepted.
MacroTrajectory integrate_normalized(const GridMeasure& mu0, const GridMeasure& nu0, const SexRatio& A,
                                     const InheritanceKernel& kernel, const SolverConfig& config);

struct CoupledRun {
  MacroTrajectory raw;
  /// Snapshots of (m_t / M(t), f_t / F(t)) at the raw snapshot times.
  std::vector<MacroState> normalized;
  std::vector<double> times;
  std::vector<double> sex_ratio;  // A(t) = M(t) / F(t)
  std::vector<double> dist_male_to_star;
  std::vector<double> dist_female_to_star;
};

/// Runs the constant-rate system, extracts A(t) and the normalized trait distributions,
/// and measures their distance to mu_star. Throws ExtinctionDetected if a mass drops
/// below 1e-8.
CoupledRun coupled_full_run(const GridMeasure& m0, const GridMeasure& f0, const RateSet& rates,
                            const InheritanceKernel& kernel, const SolverConfig& config,
                            const GridMeasure& mu_star);

}  // namespace dimorph
