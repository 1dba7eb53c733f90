#include "acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <stdexcept>

#include "csv.hpp"
#include "dimorph/error.hpp"
#include "dimorph/ibm.hpp"
#include "dimorph/kernels.hpp"
#include "dimorph/macro_solver.hpp"
#include "dimorph/measures.hpp"
#include "dimorph/stability.hpp"
#include "dimorph/totals.hpp"
#include "parallel.hpp"

namespace dimorph::cli {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string mark(bool ok) { return ok ? "ok" : "FAIL"; }

constexpr ConstantRates kPersistent{2.0, 2.0, 1.0, 1.0, 0.25, 0.25, 0.25, 0.25};
constexpr ConstantRates kBoundary{1.0, 1.0, 1.0, 1.0, 0.25, 0.25, 0.25, 0.25};
constexpr ConstantRates kAsymmetric{1.0, 3.0, 1.0, 2.0, 0.1, 0.7, 0.3, 0.5};

RateSet rate_set(const ConstantRates& c) {
  return RateSet{c.p_f, c.p_m, c.D_f, c.D_m, c.U_ff, c.U_fm, c.U_mf, c.U_mm};
}

// Threshold classification, persistent convergence and the boundary run.
CriterionResult persistence_threshold() {
  CriterionResult r{1, "persistence threshold", false, "", 0.0, json::object()};
  struct Example {
    ConstantRates rates;
    Regime expected;
  };
  const Example examples[] = {
      {kBoundary, Regime::extinction},
      {kPersistent, Regime::persistence},
      {{3.0, 0.0, 1.0, 0.5, 0.25, 0.25, 0.25, 0.25}, Regime::persistence},
      {{3.0, 0.0, 1.0, 7.0, 0.25, 0.25, 0.25, 0.25}, Regime::persistence},
  };
  bool labels_ok = true;
  json labels = json::array();
  for (const Example& e : examples) {
    const Regime got = classify(e.rates);
    labels_ok = labels_ok && got == e.expected;
    labels.push_back({{"adaptation_sum", adaptation_sum(e.rates)}, {"label", to_string(got)}});
  }

  const auto t0 = Clock::now();
  const auto series = integrate_totals({1.0, 1.0}, kPersistent, 60.0, 0.01, 100);
  const double run_seconds = seconds_since(t0);
  const double err = std::max(std::abs(series.back().M - 2.0), std::abs(series.back().F - 2.0));
  const bool converge_ok = err <= 1e-6 && run_seconds < 1.0;

  const auto boundary = integrate_totals({1.0, 1.0}, kBoundary, 100.0, 0.01, 1000);
  const double bM = boundary.back().M, bF = boundary.back().F;
  const bool boundary_ok = bM < 1e-6 && bF < 1e-6;

  r.pass = labels_ok && converge_ok && boundary_ok;
  r.detail = "labels " + mark(labels_ok) + "; (1,1)->(2,2) err " + num(err) + " <= 1e-6 in " + num(run_seconds) +
             " s " + mark(converge_ok) + "; boundary p=D=1 at t=100: M=" + num(bM) + " F=" + num(bF) +
             " < 1e-6 " + mark(boundary_ok);
  r.metrics = {{"labels", labels},           {"terminal_error", err}, {"runtime_s", run_seconds},
               {"boundary_M_t100", bM},      {"boundary_F_t100", bF}, {"labels_ok", labels_ok},
               {"converge_ok", converge_ok}, {"boundary_ok", boundary_ok}};
  return r;
}

CriterionResult stationary_uniqueness(std::uint64_t seed) {
  CriterionResult r{2, "stationary uniqueness", false, "", 0.0, json::object()};
  bool ok = true;
  std::string detail;
  json cases = json::array();
  for (const ConstantRates& rates : {kPersistent, kAsymmetric}) {
    const auto t0 = Clock::now();
    const StationaryResult s = stationary_point(rates);
    const UniquenessProbe probe = probe_uniqueness(rates, 100, seed);
    const double secs = seconds_since(t0);
    const bool case_ok = probe.converged == 100 && probe.max_deviation <= 1e-8 &&
                         std::max(probe.max_residual, s.residual) < 1e-10 && secs < 1.0;
    ok = ok && case_ok;
    if (!detail.empty()) detail += "; ";
    detail += "(" + num(s.M_bar) + ", " + num(s.F_bar) + ") " + std::to_string(probe.converged) +
              "/100 spread " + num(probe.max_deviation) + " residual " +
              num(std::max(probe.max_residual, s.residual)) + " in " + num(secs) + " s " + mark(case_ok);
    cases.push_back({{"M_bar", s.M_bar},
                     {"F_bar", s.F_bar},
                     {"converged", probe.converged},
                     {"max_deviation", probe.max_deviation},
                     {"max_residual", std::max(probe.max_residual, s.residual)},
                     {"runtime_s", secs}});
  }
  r.pass = ok;
  r.detail = detail;
  r.metrics = {{"cases", cases}};
  return r;
}

struct MeanDynamicsRun {
  MacroTrajectory traj;
  double seconds = 0.0;
};

// A = 2, mu0 = N(1, 0.5^2), nu0 = N(4, 0.5^2); shared by criteria 3 and 4.
const MeanDynamicsRun& mean_dynamics_run() {
  static std::once_flag once;
  static MeanDynamicsRun run;
  std::call_once(once, [] {
    const TraitGrid grid(-3.0, 8.0, 128);
    const auto kernel = InheritanceKernel::additive(NoiseDensity::gaussian(0.5));
    SolverConfig config;
    config.dt = 1e-3;
    config.t_end = 10.0;
    config.stride = 10;
    const auto t0 = Clock::now();
    run.traj = integrate_normalized(gaussian_measure(grid, 1.0, 0.5), gaussian_measure(grid, 4.0, 0.5), 2.0,
                                    kernel, config);
    run.seconds = seconds_since(t0);
  });
  return run;
}

CriterionResult mean_dynamics() {
  CriterionResult r{3, "mean dynamics", false, "", 0.0, json::object()};
  const MeanDynamicsRun& run = mean_dynamics_run();
  const double A = 2.0, m0 = 1.0, n0 = 4.0;
  double gap_err = 0.0, cons_err = 0.0;
  for (const MacroState& s : run.traj.snapshots) {
    const double m = mean(s.m), n = mean(s.f);
    gap_err = std::max(gap_err, std::abs((m - n) - (m0 - n0) * std::exp(-(A + 1.0) / 2.0 * s.t)));
    cons_err = std::max(cons_err, std::abs(A * m + n - (A * m0 + n0)));
  }
  const bool ok = gap_err <= 1e-4 && cons_err <= 1e-6 && run.seconds < 10.0;
  r.pass = ok;
  r.detail = "gap error " + num(gap_err) + " <= 1e-4, |A m + n - 6| " + num(cons_err) + " <= 1e-6, " +
             std::to_string(run.traj.snapshots.size()) + " snapshots in " + num(run.seconds) + " s (< 10 s)";
  r.metrics = {{"gap_error", gap_err},
               {"conservation_error", cons_err},
               {"runtime_s", run.seconds},
               {"clipped_mass", run.traj.diagnostics.clipped_mass},
               {"max_mass_correction", run.traj.diagnostics.max_mass_correction}};
  return r;
}

CriterionResult limiting_mean_check() {
  CriterionResult r{4, "limiting mean", false, "", 0.0, json::object()};
  const MeanDynamicsRun& run = mean_dynamics_run();
  const double target = limiting_mean(2.0, 1.0, 4.0);
  const MacroState& last = run.traj.snapshots.back();
  const double mm = mean(last.m), mn = mean(last.f);
  const double err = std::max(std::abs(mm - target), std::abs(mn - target));
  r.pass = err <= 1e-3;
  r.detail = "terminal means " + num(mm) + ", " + num(mn) + " vs " + num(target) + ": error " + num(err) +
             " <= 1e-3";
  r.metrics = {{"target", target}, {"mean_mu", mm}, {"mean_nu", mn}, {"error", err}};
  return r;
}

CriterionResult gaussian_stationary_law() {
  CriterionResult r{5, "gaussian stationary law", false, "", 0.0, json::object()};
  const auto t0 = Clock::now();
  const TraitGrid grid(-8.0, 8.0, 512);
  const double sigma = 0.5;
  const auto kernel = InheritanceKernel::additive(NoiseDensity::gaussian(sigma));

  const FixedPointResult fp = fixed_point(kernel, gaussian_measure(grid, 0.3, 1.0));
  const double var_rel = std::abs(fp.variance - 2.0 * sigma * sigma) / (2.0 * sigma * sigma);
  const double mean_err = std::abs(fp.mean - 0.3);
  const bool fp_ok = var_rel <= 0.02 && mean_err <= 1e-3;

  // Both macro runs below keep mean 0, so their limit is the fixed point of mean 0.
  const GridMeasure mu_star = fixed_point(kernel, gaussian_measure(grid, 0.0, 1.0)).mu_star;
  const double limit = 5.0 * grid.dx();
  SolverConfig config;
  config.dt = 0.05;
  config.t_end = 30.0;
  config.stride = 20;
  const GridMeasure mu0 = gaussian_measure(grid, 0.0, 1.0);
  const GridMeasure nu0 = uniform_measure(grid, -2.0, 2.0);

  const MacroTrajectory normalized = integrate_normalized(mu0, nu0, 2.0, kernel, config);
  const ConvergenceReport rep = convergence_report(normalized, mu_star, FixedPointOptions{}.tol);
  const double d_norm = rep.dist_max.back();

  const CoupledRun coupled = coupled_full_run(mu0, nu0, rate_set(kPersistent), kernel, config, mu_star);
  const double d_raw = std::max(coupled.dist_male_to_star.back(), coupled.dist_female_to_star.back());

  const double secs = seconds_since(t0);
  const bool macro_ok = d_norm < limit && d_raw < limit;
  r.pass = fp_ok && macro_ok && secs < 60.0;
  r.detail = "mu* variance " + num(fp.variance) + " (rel err " + num(var_rel) + " <= 2%), mean err " +
             num(mean_err) + " <= 1e-3; d(., mu*) at t=30: normalized A=2 " + num(d_norm) + ", full system " +
             num(d_raw) + " < " + num(limit) + "; " + num(secs) + " s (< 60 s)";
  r.metrics = {{"iterations", fp.iterations},
               {"variance", fp.variance},
               {"variance_rel_error", var_rel},
               {"mean_error", mean_err},
               {"dist_normalized_t30", d_norm},
               {"dist_full_t30", d_raw},
               {"limit", limit},
               {"max_distance_non_increasing", rep.max_non_increasing},
               {"runtime_s", secs}};
  return r;
}

CriterionResult contraction(std::uint64_t seed) {
  CriterionResult r{6, "contraction probe", false, "", 0.0, json::object()};
  const ContractionProbe add = contraction_probe(InheritanceKernel::additive(NoiseDensity::gaussian(1.0)),
                                                 TraitGrid(-8.0, 8.0, 128), -4.0, 4.0, 200, seed);
  const ContractionProbe mul = contraction_probe(InheritanceKernel::multiplicative(NoiseDensity::uniform(0.0, 1.0)),
                                                 TraitGrid(0.0, 16.0, 128), 0.0, 8.0, 200, seed + 1);
  r.pass = add.violations == 0 && mul.violations == 0 && add.samples.size() == 200 && mul.samples.size() == 200;
  r.detail = "additive " + std::to_string(add.violations) + "/200 violations (max ratio " + num(add.max_ratio) +
             "), multiplicative " + std::to_string(mul.violations) + "/200 (max ratio " + num(mul.max_ratio) + ")";
  r.metrics = {{"additive", {{"violations", add.violations}, {"max_ratio", add.max_ratio}, {"min_margin", add.min_margin}}},
               {"multiplicative",
                {{"violations", mul.violations}, {"max_ratio", mul.max_ratio}, {"min_margin", mul.min_margin}}}};
  return r;
}

CriterionResult hypotheses() {
  CriterionResult r{7, "hypothesis checkers", false, "", 0.0, json::object()};
  HypothesisConfig ac;
  ac.mean_lo = -1.0;
  ac.mean_hi = 1.0;
  ac.support_lo = -4.0;
  ac.support_hi = 4.0;
  const HypothesisReport add =
      check_hypotheses(InheritanceKernel::additive(NoiseDensity::gaussian(1.0)), TraitGrid(-8.0, 8.0, 256), ac);
  HypothesisConfig mc;
  mc.mean_lo = 1.0;
  mc.mean_hi = 2.0;
  mc.support_lo = 0.0;
  mc.support_hi = 8.0;
  const HypothesisReport mul = check_hypotheses(InheritanceKernel::multiplicative(NoiseDensity::uniform(0.0, 1.0)),
                                                TraitGrid(0.0, 16.0, 128), mc);
  const bool add_ok = add.condition_i_max < 1.0 && add.condition_ii.l_est <= 0.55;
  const bool mul_ok = mul.condition_i_max < 1.0 && mul.condition_ii.l_est < 1.0;
  r.pass = add_ok && mul_ok;
  r.detail = "additive: (i) " + num(add.condition_i_max) + " < 1, L " + num(add.condition_ii.l_est) +
             " <= 0.55; multiplicative: (i) " + num(mul.condition_i_max) + " < 1, L " +
             num(mul.condition_ii.l_est) + " < 1";
  r.metrics = {{"additive",
                {{"condition_i", add.condition_i_max}, {"L", add.condition_ii.l_est}, {"C", add.condition_ii.c_est}}},
               {"multiplicative",
                {{"condition_i", mul.condition_i_max}, {"L", mul.condition_ii.l_est}, {"C", mul.condition_ii.c_est}}}};
  return r;
}

CriterionResult law_of_large_numbers(std::uint64_t seed, std::size_t jobs) {
  CriterionResult r{8, "law of large numbers", false, "", 0.0, json::object()};
  const auto t0 = Clock::now();
  const TraitGrid grid(-6.0, 6.0, 256);
  const auto kernel = InheritanceKernel::additive(NoiseDensity::gaussian(0.5));
  const RateSet rates = rate_set(kPersistent);
  const GridMeasure male0 = gaussian_measure(grid, -1.0, 0.5, 1.0);
  const GridMeasure female0 = gaussian_measure(grid, 1.0, 0.5, 1.0);
  const std::vector<double> checkpoints{1.0, 3.0};
  const std::vector<std::size_t> scales{100, 1000, 10000};
  const std::size_t replicas = 10;

  SolverConfig config;
  config.dt = 0.01;
  config.t_end = checkpoints.back();
  config.sample_times = checkpoints;
  const MacroTrajectory macro = integrate(MacroState{male0, female0, 0.0}, rates, kernel, config);

  std::vector<std::vector<IbmTrajectory>> runs(scales.size(), std::vector<IbmTrajectory>(replicas));
  parallel_for(scales.size() * replicas, jobs, [&](std::size_t k) {
    const std::size_t i = k / replicas, j = k % replicas;
    IbmParams p{rates, kernel, grid, scales[i], checkpoints.back(), checkpoints,
                replica_seed(seed, scales[i], j), male0, female0, InitMode::quantile};
    runs[i][j] = simulate(p);
  });
  const LlnTable table = lln_compare(scales, runs, macro, checkpoints);

  bool decreasing = true;
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    for (std::size_t i = 1; i < scales.size(); ++i) {
      if (!(table.at(i, c).mean_error < table.at(i - 1, c).mean_error)) decreasing = false;
    }
  }
  bool ratio_ok = true;
  double worst_z = 0.0;
  std::uint64_t births = 0, clamped = 0;
  for (const auto& reps : runs) {
    for (const IbmTrajectory& run : reps) {
      births += run.births;
      clamped += run.clamped;
      if (run.births == 0) continue;
      const double b = static_cast<double>(run.births);
      const double frac = static_cast<double>(run.births_female) / b;
      const double z = std::abs(frac - 0.5) / std::sqrt(0.25 / b);
      worst_z = std::max(worst_z, z);
      if (!(std::abs(frac - 0.5) <= 4.0 * std::sqrt(0.25 / b))) ratio_ok = false;
    }
  }
  const double clamp_fraction = births > 0 ? static_cast<double>(clamped) / static_cast<double>(births) : 0.0;
  const double secs = seconds_since(t0);
  r.pass = decreasing && ratio_ok && clamp_fraction < 1e-3 && secs < 300.0;

  std::string errs;
  json cells = json::array();
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    errs += (c > 0 ? "; t=" : "t=") + num(checkpoints[c]) + ":";
    for (std::size_t i = 0; i < scales.size(); ++i) errs += " " + num(table.at(i, c).mean_error);
  }
  for (const LlnCell& cell : table.cells) {
    cells.push_back({{"N", cell.N}, {"t", cell.t}, {"mean_error", cell.mean_error}, {"std_error", cell.std_error}});
  }
  r.detail = "errors by N=100,1e3,1e4 " + errs + " (strictly decreasing " + mark(decreasing) +
             "); birth sex ratio worst |z| " + num(worst_z) + " <= 4; clamped " + num(clamp_fraction) + " < 1e-3; " +
             num(secs) + " s (< 300 s)";
  r.metrics = {{"cells", cells},
               {"decreasing", decreasing},
               {"sex_ratio_ok", ratio_ok},
               {"worst_sex_ratio_z", worst_z},
               {"clamp_fraction", clamp_fraction},
               {"runtime_s", secs}};
  return r;
}

struct CacheRun {
  double max_relative_error = 0.0;
  bool accounting_ok = true;
};

CacheRun cache_run(const RateSet& rates, std::size_t N, std::uint64_t seed) {
  const TraitGrid grid(-6.0, 6.0, 128);
  const auto kernel = InheritanceKernel::additive(NoiseDensity::gaussian(0.5));
  ScaledPopulation pop(rates, N);
  Rng rng(seed);
  for (double x : initial_traits(gaussian_measure(grid, -1.0, 0.5), N, InitMode::sample, rng)) pop.add(Sex::male, x);
  for (double x : initial_traits(gaussian_measure(grid, 1.0, 0.5), N, InitMode::sample, rng)) pop.add(Sex::female, x);
  const std::size_t start = pop.size();
  std::size_t births = 0, deaths = 0;
  CacheRun out;
  for (int e = 0; e < 10000; ++e) {
    const std::size_t before = pop.size();
    const auto [dt, ev] = step(pop, kernel, grid, rng);
    if (ev.kind == Event::Kind::mating) {
      ++births;
      out.accounting_ok = out.accounting_ok && pop.size() == before + 1;
    } else {
      ++deaths;
      out.accounting_ok = out.accounting_ok && pop.size() == before - 1;
    }
    out.accounting_ok = out.accounting_ok && dt > 0.0;
  }
  out.accounting_ok = out.accounting_ok && pop.size() == start + births - deaths && births + deaths == 10000;
  out.max_relative_error = pop.verify_caches(1e-6).max_relative_error;
  return out;
}

CriterionResult ibm_exactness(std::uint64_t seed) {
  CriterionResult r{9, "IBM internal exactness", false, "", 0.0, json::object()};
  const CacheRun constant = cache_run(rate_set(kPersistent), 500, seed);
  RateSet varying = rate_set(kPersistent);
  varying.p_f = TraitRate([](double x) { return 2.0 + 0.5 * std::tanh(x); });
  varying.D_m = TraitRate([](double x) { return 1.0 + 0.1 * x * x; });
  varying.U_ff = CompetitionRate([](double x, double y) { return 0.25 * (1.0 + 0.5 * std::exp(-(x - y) * (x - y))); });
  varying.U_mf = CompetitionRate([](double x, double y) { return 0.2 + 0.05 * std::abs(x - y); });
  const CacheRun general = cache_run(varying, 300, seed + 1);

  const TraitGrid grid(-6.0, 6.0, 128);
  const IbmParams params{rate_set(kPersistent), InheritanceKernel::additive(NoiseDensity::gaussian(0.5)), grid, 1000,
                         2.0, {0.0, 1.0, 2.0}, seed + 2, gaussian_measure(grid, -1.0, 0.5),
                         gaussian_measure(grid, 1.0, 0.5), InitMode::quantile};
  const IbmTrajectory a = simulate(params);
  const IbmTrajectory b = simulate(params);
  const bool replay_ok = distribution_csv(frames_of(a.snapshots)) == distribution_csv(frames_of(b.snapshots)) &&
                         a.events == b.events && a.births == b.births && a.clamped == b.clamped;
  const bool traj_accounting = a.events == a.births + a.deaths && a.final_count + a.deaths == a.initial_count + a.births;

  const double cache_err = std::max(constant.max_relative_error, general.max_relative_error);
  const bool accounting = constant.accounting_ok && general.accounting_ok && traj_accounting;
  r.pass = cache_err <= 1e-6 && accounting && replay_ok;
  r.detail = "cache error after 1e4 events: constant U " + num(constant.max_relative_error) + ", trait-dependent U " +
             num(general.max_relative_error) + " <= 1e-6; accounting " + mark(accounting) + "; replay (" +
             std::to_string(a.events) + " events) byte-identical " + mark(replay_ok);
  r.metrics = {{"cache_error_constant", constant.max_relative_error},
               {"cache_error_general", general.max_relative_error},
               {"accounting_ok", accounting},
               {"replay_identical", replay_ok},
               {"replay_events", a.events}};
  return r;
}

CriterionResult cross_module() {
  CriterionResult r{10, "macro vs totals consistency", false, "", 0.0, json::object()};
  const TraitGrid grid(-6.0, 6.0, 128);
  const auto kernel = InheritanceKernel::additive(NoiseDensity::gaussian(0.5));
  SolverConfig config;
  config.dt = 0.01;
  config.t_end = 20.0;
  config.stride = 10;
  struct Case {
    ConstantRates rates;
    double M0, F0;
  };
  double worst = 0.0;
  json cases = json::array();
  for (const Case& c : {Case{kPersistent, 1.0, 1.0}, Case{kAsymmetric, 0.5, 1.5}}) {
    const MacroTrajectory macro = integrate(
        MacroState{gaussian_measure(grid, -1.0, 0.5, c.M0), gaussian_measure(grid, 1.0, 0.5, c.F0), 0.0},
        rate_set(c.rates), kernel, config);
    const auto totals = integrate_totals({c.M0, c.F0}, c.rates, config.t_end, config.dt, config.stride);
    if (totals.size() != macro.snapshots.size()) throw std::logic_error("criterion 10: snapshot count mismatch");
    double err = 0.0;
    for (std::size_t i = 0; i < totals.size(); ++i) {
      err = std::max({err, std::abs(total_mass(macro.snapshots[i].m) - totals[i].M),
                      std::abs(total_mass(macro.snapshots[i].f) - totals[i].F)});
    }
    worst = std::max(worst, err);
    cases.push_back({{"M0", c.M0}, {"F0", c.F0}, {"max_error", err}, {"snapshots", totals.size()}});
  }
  r.pass = worst <= 1e-6;
  r.detail = "max |mass difference| over t <= 20 (2 rate sets): " + num(worst) + " <= 1e-6";
  r.metrics = {{"cases", cases}, {"max_error", worst}};
  return r;
}

}  // namespace

CriterionResult run_criterion(int id, const AcceptanceOptions& options) {
  const auto t0 = Clock::now();
  CriterionResult r;
  try {
    switch (id) {
      case 1: r = persistence_threshold(); break;
      case 2: r = stationary_uniqueness(options.seed); break;
      case 3: r = mean_dynamics(); break;
      case 4: r = limiting_mean_check(); break;
      case 5: r = gaussian_stationary_law(); break;
      case 6: r = contraction(options.seed); break;
      case 7: r = hypotheses(); break;
      case 8: r = law_of_large_numbers(options.seed, options.jobs); break;
      case 9: r = ibm_exactness(options.seed); break;
      case 10: r = cross_module(); break;
      default: throw std::invalid_argument("unknown criterion " + std::to_string(id));
    }
  } catch (const Error& e) {
    r = CriterionResult{id, "criterion " + std::to_string(id), false, std::string("error: ") + e.what(), 0.0,
                        json::object()};
  }
  r.seconds = seconds_since(t0);
  return r;
}

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options) {
  std::vector<int> ids = options.criteria;
  if (ids.empty()) {
    for (int i = 1; i <= kCriterionCount; ++i) ids.push_back(i);
  }
  std::vector<CriterionResult> out;
  for (int id : ids) {
    out.push_back(run_criterion(id, options));
    if (options.on_result) options.on_result(out.back());
  }
  return out;
}

std::string verdict_line(const CriterionResult& r) {
  char secs[32];
  std::snprintf(secs, sizeof secs, "%.2f", r.seconds);
  return std::string(r.pass ? "[PASS]" : "[FAIL]") + " C" + std::to_string(r.id) + " " + r.title + ": " + r.detail +
         " (" + secs + " s)";
}

json to_json(const std::vector<CriterionResult>& results) {
  json list = json::array();
  std::size_t passed = 0;
  for (const CriterionResult& r : results) {
    passed += r.pass ? 1 : 0;
    list.push_back({{"id", r.id}, {"title", r.title}, {"pass", r.pass}, {"detail", r.detail}, {"metrics", r.metrics}});
  }
  return {{"criteria", list}, {"passed", passed}, {"total", results.size()}};
}

}  // namespace dimorph::cli
