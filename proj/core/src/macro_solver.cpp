#include "dimorph/macro_solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dimorph/error.hpp"

namespace dimorph {

namespace {

std::vector<double> tabulate(const TraitRate& r, const TraitGrid& g) {
  std::vector<double> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = r(g.center(i));
  return out;
}

std::vector<double> tabulate(const CompetitionRate& r, const TraitGrid& g) {
  const std::size_t n = g.size();
  std::vector<double> out(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = r(g.center(i), g.center(j));
  }
  return out;
}

double sum(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Generic explicit integrator over a flat state vector [m | f].
struct System {
  std::size_t n;
  std::function<bool(double t, std::span<const double> y, std::span<double> dy)> f;
  bool normalized;
};

struct StepperScratch {
  std::vector<double> k1, k2, k3, k4, tmp;
  explicit StepperScratch(std::size_t len) : k1(len), k2(len), k3(len), k4(len), tmp(len) {}
};

// Advances y by h; returns whether births were active at every stage.
bool advance(const System& sys, Scheme scheme, double t, double h, std::vector<double>& y, StepperScratch& s) {
  const std::size_t len = y.size();
  bool births = sys.f(t, y, s.k1);
  if (scheme == Scheme::euler) {
    for (std::size_t i = 0; i < len; ++i) y[i] += h * s.k1[i];
    return births;
  }
  for (std::size_t i = 0; i < len; ++i) s.tmp[i] = y[i] + 0.5 * h * s.k1[i];
  births &= sys.f(t + 0.5 * h, s.tmp, s.k2);
  for (std::size_t i = 0; i < len; ++i) s.tmp[i] = y[i] + 0.5 * h * s.k2[i];
  births &= sys.f(t + 0.5 * h, s.tmp, s.k3);
  for (std::size_t i = 0; i < len; ++i) s.tmp[i] = y[i] + h * s.k3[i];
  births &= sys.f(t + h, s.tmp, s.k4);
  for (std::size_t i = 0; i < len; ++i) y[i] += h / 6.0 * (s.k1[i] + 2.0 * s.k2[i] + 2.0 * s.k3[i] + s.k4[i]);
  return births;
}

bool any_negative(const std::vector<double>& y) {
  return std::any_of(y.begin(), y.end(), [](double v) { return v < 0.0; });
}

// Zeroes negative weights of each half; optionally rescales each half to `target` masses.
double clip(std::vector<double>& y, std::size_t n, const double* target) {
  double removed = 0.0;
  for (std::size_t half = 0; half < 2; ++half) {
    double* w = y.data() + half * n;
    double neg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (w[i] < 0.0) {
        neg -= w[i];
        w[i] = 0.0;
      }
    }
    removed += neg;
    if (target != nullptr && neg > 0.0) {
      double mass = 0.0;
      for (std::size_t i = 0; i < n; ++i) mass += w[i];
      if (mass > 0.0) {
        const double scale = target[half] / mass;
        for (std::size_t i = 0; i < n; ++i) w[i] *= scale;
      }
    }
  }
  return removed;
}

std::vector<double> stop_times(const SolverConfig& c, double dt) {
  std::vector<double> stops;
  if (!c.sample_times.empty()) {
    for (double t : c.sample_times) {
      if (!(t > 0.0) || t > c.t_end) throw std::invalid_argument("sample_times must lie in (0, t_end]");
    }
    stops = c.sample_times;
    std::sort(stops.begin(), stops.end());
    stops.erase(std::unique(stops.begin(), stops.end()), stops.end());
    if (stops.back() < c.t_end) stops.push_back(c.t_end);
    return stops;
  }
  const std::size_t stride = std::max<std::size_t>(c.stride, 1);
  const double every = dt * static_cast<double>(stride);
  const auto count = static_cast<std::size_t>(std::floor(c.t_end / every * (1.0 + 1e-12)));
  for (std::size_t k = 1; k <= count; ++k) stops.push_back(std::min(c.t_end, static_cast<double>(k) * every));
  if (stops.empty() || stops.back() < c.t_end * (1.0 - 1e-12)) stops.push_back(c.t_end);
  return stops;
}

MacroTrajectory run(const System& sys, const TraitGrid& grid, std::vector<double> y, double t0,
                    const SolverConfig& config, double dt_bound, double max_tail) {
  if (!(config.t_end > 0.0)) throw std::invalid_argument("SolverConfig: t_end must be positive");
  if (config.dt < 0.0 || !std::isfinite(config.dt)) throw std::invalid_argument("SolverConfig: dt must be >= 0");
  const std::size_t n = sys.n;
  MacroTrajectory traj;
  auto& d = traj.diagnostics;
  d.dt_bound = dt_bound;
  d.dt_used = config.dt > 0.0 ? config.dt : dt_bound;
  d.dt_exceeds_bound = d.dt_used > dt_bound * (1.0 + 1e-12);
  d.max_tail_mass = max_tail;
  Positivity pos = config.positivity;
  if (pos == Positivity::automatic) pos = sys.normalized ? Positivity::clip_renormalize : Positivity::clip;

  auto snapshot = [&](double t) {
    MacroState s{GridMeasure(grid, std::vector<double>(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n))),
                 GridMeasure(grid, std::vector<double>(y.begin() + static_cast<std::ptrdiff_t>(n), y.end())), t};
    traj.snapshots.push_back(std::move(s));
  };
  snapshot(t0);

  StepperScratch scratch(y.size());
  std::vector<double> trial(y.size());
  // Unit mass is an unstable equilibrium of the normalized mass dynamics, so rounding
  // drift is removed after every step.
  const double unit_masses[2] = {sum(std::span(y).first(n)), sum(std::span(y).last(n))};
  auto project = [&] {
    if (!sys.normalized) return;
    for (std::size_t half = 0; half < 2; ++half) {
      const std::span<double> w = std::span(y).subspan(half * n, n);
      const double mass = sum(w);
      if (!(mass > 0.0)) continue;
      d.max_mass_correction = std::max(d.max_mass_correction, std::abs(mass - unit_masses[half]));
      const double scale = unit_masses[half] / mass;
      for (double& v : w) v *= scale;
    }
  };
  double elapsed = 0.0;
  for (double stop : stop_times(config, d.dt_used)) {
    const double interval = stop - elapsed;
    if (!(interval > 0.0)) continue;
    const auto k = static_cast<std::size_t>(std::max(1.0, std::ceil(interval / d.dt_used * (1.0 - 1e-12))));
    const double h = interval / static_cast<double>(k);
    for (std::size_t s = 0; s < k; ++s) {
      const double t = t0 + elapsed + h * static_cast<double>(s);
      const double masses[2] = {sum(std::span(y).first(n)), sum(std::span(y).last(n))};
      if (pos == Positivity::reject_step) {
        std::size_t pieces = 1;
        for (int halvings = 0;; ++halvings) {
          trial = y;
          const double hh = h / static_cast<double>(pieces);
          bool ok = true;
          for (std::size_t p = 0; p < pieces && ok; ++p) {
            if (!advance(sys, config.scheme, t + hh * static_cast<double>(p), hh, trial, scratch)) ++d.empty_sex_steps;
            ok = !any_negative(trial);
          }
          if (ok) break;
          ++d.rejected_steps;
          if (halvings == 20) throw StepRejected("reject-step: no stable step after 20 halvings");
          pieces *= 2;
        }
        y.swap(trial);
      } else {
        if (!advance(sys, config.scheme, t, h, y, scratch)) ++d.empty_sex_steps;
        if (any_negative(y)) {
          ++d.clip_events;
          d.clipped_mass += clip(y, n, pos == Positivity::clip_renormalize ? masses : nullptr);
        }
      }
      project();
      ++d.steps;
    }
    elapsed = stop;
    snapshot(t0 + stop);
  }
  return traj;
}

}  // namespace

MacroModel::MacroModel(RateSet rates, InheritanceKernel kernel, const TraitGrid& grid)
    : rates_(std::move(rates)), op_(std::move(kernel), grid) {
  constant_ = rates_.all_constant();
  constant_u_ = rates_.U_ff.is_constant() && rates_.U_fm.is_constant() && rates_.U_mf.is_constant() &&
                rates_.U_mm.is_constant();
  p_f_ = tabulate(rates_.p_f, grid);
  p_m_ = tabulate(rates_.p_m, grid);
  D_f_ = tabulate(rates_.D_f, grid);
  D_m_ = tabulate(rates_.D_m, grid);
  if (constant_u_) {
    u_ff_ = *rates_.U_ff.constant();
    u_fm_ = *rates_.U_fm.constant();
    u_mf_ = *rates_.U_mf.constant();
    u_mm_ = *rates_.U_mm.constant();
  } else {
    U_ff_ = tabulate(rates_.U_ff, grid);
    U_fm_ = tabulate(rates_.U_fm, grid);
    U_mf_ = tabulate(rates_.U_mf, grid);
    U_mm_ = tabulate(rates_.U_mm, grid);
  }
}

bool MacroModel::birth_density(std::span<const double> m, std::span<const double> f, std::span<double> out) const {
  const std::size_t n = grid().size();
  const double M = sum(m);
  const double F = sum(f);
  if (!(M > 0.0) || !(F > 0.0)) {
    std::fill(out.begin(), out.end(), 0.0);
    return false;
  }
  const double Pm = dot(p_m_, m);
  const double Pf = dot(p_f_, f);
  if (!(Pm > 0.0) && !(Pf > 0.0)) {
    std::fill(out.begin(), out.end(), 0.0);
    return false;
  }
  // B = 1/2 [P(p_f f, pi_m) + P(pi_f, p_m m)] with pi the partner law of each sex
  // (proportional to p, or to mass when that sex has no mating capability at all).
  std::vector<double> a(n), b(n);
  double coeff = 0.0;
  if (Pm > 0.0 && Pf > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = p_f_[i] * f[i];
      b[i] = p_m_[i] * m[i];
    }
    coeff = 0.5 * (1.0 / Pm + 1.0 / Pf);
  } else if (Pf > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = p_f_[i] * f[i];
      b[i] = m[i];
    }
    coeff = 0.5 / M;
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = f[i];
      b[i] = p_m_[i] * m[i];
    }
    coeff = 0.5 / F;
  }
  op_.apply_into(a, b, out);
  for (double& v : out) v *= coeff;
  return true;
}

void MacroModel::death_rates(std::span<const double> m, std::span<const double> f, bool male,
                             std::span<double> out) const {
  const std::size_t n = grid().size();
  const auto& D = male ? D_m_ : D_f_;
  if (constant_u_) {
    const double M = sum(m), F = sum(f);
    const double load = male ? u_mm_ * M + u_mf_ * F : u_fm_ * M + u_ff_ * F;
    for (std::size_t i = 0; i < n; ++i) out[i] = D[i] + load;
    return;
  }
  const auto& Um = male ? U_mm_ : U_fm_;
  const auto& Uf = male ? U_mf_ : U_ff_;
  for (std::size_t i = 0; i < n; ++i) {
    double load = 0.0;
    const double* rm = Um.data() + i * n;
    const double* rf = Uf.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) load += rm[j] * m[j] + rf[j] * f[j];
    out[i] = D[i] + load;
  }
}

bool MacroModel::rhs(std::span<const double> m, std::span<const double> f, std::span<double> dm,
                     std::span<double> df) const {
  const std::size_t n = grid().size();
  const bool births = birth_density(m, f, dm);
  std::copy(dm.begin(), dm.end(), df.begin());
  std::vector<double> death(n);
  death_rates(m, f, true, death);
  for (std::size_t i = 0; i < n; ++i) dm[i] -= death[i] * m[i];
  death_rates(m, f, false, death);
  for (std::size_t i = 0; i < n; ++i) df[i] -= death[i] * f[i];
  return births;
}

double MacroModel::max_per_capita_rate(std::span<const double> m, std::span<const double> f) const {
  const std::size_t n = grid().size();
  std::vector<double> death(n);
  double rate = 0.0;
  death_rates(m, f, true, death);
  rate = std::max(rate, *std::max_element(death.begin(), death.end()));
  death_rates(m, f, false, death);
  rate = std::max(rate, *std::max_element(death.begin(), death.end()));
  const double M = sum(m), F = sum(f);
  if (M > 0.0 && F > 0.0) {
    std::vector<double> birth(n);
    birth_density(m, f, birth);
    const double B = sum(birth);
    rate = std::max({rate, B / M, B / F});
  }
  return rate;
}

std::pair<GridMeasure, GridMeasure> rhs_general(const MacroState& state, const RateSet& rates,
                                                const InheritanceKernel& kernel) {
  if (!(state.m.grid() == state.f.grid())) throw GridMismatch("rhs_general: male and female grids differ");
  const MacroModel model(rates, kernel, state.m.grid());
  GridMeasure dm(state.m.grid()), df(state.m.grid());
  // Derivatives may be negative, so fill raw vectors rather than validated measures.
  std::vector<double> a(state.m.size()), b(state.m.size());
  model.rhs(state.m.weights(), state.f.weights(), a, b);
  dm.mutable_weights() = std::move(a);
  df.mutable_weights() = std::move(b);
  return {std::move(dm), std::move(df)};
}

MacroTrajectory integrate(const MacroState& state0, const MacroModel& model, const SolverConfig& config) {
  if (!(state0.m.grid() == model.grid()) || !(state0.f.grid() == model.grid())) {
    throw GridMismatch("integrate: state grid differs from model grid");
  }
  const std::size_t n = model.grid().size();
  std::vector<double> y(2 * n);
  std::copy(state0.m.weights().begin(), state0.m.weights().end(), y.begin());
  std::copy(state0.f.weights().begin(), state0.f.weights().end(), y.begin() + static_cast<std::ptrdiff_t>(n));
  const double rate = model.max_per_capita_rate(state0.m.weights(), state0.f.weights());
  const double bound = rate > 0.0 ? 0.1 / rate : config.t_end;
  System sys{n,
             [&model, n](double, std::span<const double> v, std::span<double> dv) {
               return model.rhs(v.first(n), v.last(n), dv.first(n), dv.last(n));
             },
             false};
  return run(sys, model.grid(), std::move(y), state0.t, config, bound, model.birth_operator().max_tail_mass());
}

MacroTrajectory integrate(const MacroState& state0, const RateSet& rates, const InheritanceKernel& kernel,
                          const SolverConfig& config) {
  const MacroModel model(rates, kernel, state0.m.grid());
  return integrate(state0, model, config);
}

MacroTrajectory integrate_normalized(const GridMeasure& mu0, const GridMeasure& nu0, const SexRatio& A,
                                     const InheritanceKernel& kernel, const SolverConfig& config) {
  if (!(mu0.grid() == nu0.grid())) throw GridMismatch("integrate_normalized: measures live on different grids");
  for (const GridMeasure* g : {&mu0, &nu0}) {
    if (std::abs(total_mass(*g) - 1.0) > 1e-9) {
      throw std::invalid_argument("integrate_normalized: initial measures must be probability measures");
    }
  }
  auto ratio = [&A](double t) {
    return std::holds_alternative<double>(A) ? std::get<double>(A) : std::get<std::function<double(double)>>(A)(t);
  };
  const double a0 = ratio(0.0);
  if (!(a0 > 0.0) || !std::isfinite(a0)) throw std::invalid_argument("integrate_normalized: A must be positive");
  const TraitGrid& grid = mu0.grid();
  const std::size_t n = grid.size();
  const BirthOperator op(kernel, grid);
  std::vector<double> y(2 * n);
  std::copy(mu0.weights().begin(), mu0.weights().end(), y.begin());
  std::copy(nu0.weights().begin(), nu0.weights().end(), y.begin() + static_cast<std::ptrdiff_t>(n));
  std::vector<double> birth(n);
  System sys{n,
             [&](double t, std::span<const double> v, std::span<double> dv) {
               const double a = ratio(t);
               if (!(a > 0.0)) throw std::invalid_argument("integrate_normalized: A(t) must stay positive");
               op.apply_into(v.first(n), v.last(n), birth);
               for (std::size_t i = 0; i < n; ++i) {
                 dv[i] = birth[i] - v[i];
                 dv[n + i] = a * (birth[i] - v[n + i]);
               }
               return true;
             },
             true};
  return run(sys, grid, std::move(y), 0.0, config, 0.1 / std::max(1.0, a0), op.max_tail_mass());
}

CoupledRun coupled_full_run(const GridMeasure& m0, const GridMeasure& f0, const RateSet& rates,
                            const InheritanceKernel& kernel, const SolverConfig& config,
                            const GridMeasure& mu_star) {
  if (!(mu_star.grid() == m0.grid())) throw GridMismatch("coupled_full_run: mu_star lives on a different grid");
  const ConstantRates c = constant_rates(rates);
  validate_for_totals(c);
  CoupledRun out;
  out.raw = integrate(MacroState{m0, f0, 0.0}, rates, kernel, config);
  for (const MacroState& s : out.raw.snapshots) {
    const double M = total_mass(s.m);
    const double F = total_mass(s.f);
    if (M < 1e-8 || F < 1e-8) {
      throw ExtinctionDetected("coupled_full_run: total mass fell below 1e-8 at t = " + std::to_string(s.t));
    }
    MacroState norm{s.m.scaled(1.0 / M), s.f.scaled(1.0 / F), s.t};
    out.times.push_back(s.t);
    out.sex_ratio.push_back(M / F);
    out.dist_male_to_star.push_back(wasserstein1(norm.m, mu_star, 1e-6));
    out.dist_female_to_star.push_back(wasserstein1(norm.f, mu_star, 1e-6));
    out.normalized.push_back(std::move(norm));
  }
  return out;
}

}  // namespace dimorph
