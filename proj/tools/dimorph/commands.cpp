#include "commands.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <stdexcept>

#include "acceptance.hpp"
#include "artifacts.hpp"
#include "csv.hpp"
#include "dimorph/error.hpp"
#include "dimorph/fit.hpp"
#include "dimorph/ibm.hpp"
#include "dimorph/macro_solver.hpp"
#include "dimorph/stability.hpp"
#include "dimorph/totals.hpp"
#include "parallel.hpp"

namespace dimorph::cli {

namespace {

using nlohmann::json;

json describe_rates(const ConstantRates& r) {
  return {{"p_f", r.p_f},   {"p_m", r.p_m},   {"D_f", r.D_f},   {"D_m", r.D_m},
          {"U_ff", r.U_ff}, {"U_fm", r.U_fm}, {"U_mf", r.U_mf}, {"U_mm", r.U_mm}};
}

json describe_grid(const GridSpec& g) { return {{"x_min", g.x_min}, {"x_max", g.x_max}, {"n_cells", g.n_cells}}; }

json describe_kernel(const KernelSpec& k) {
  if (k.family == "tabulated") return {{"family", k.family}, {"path", k.path}};
  json noise{{"kind", k.noise.kind}};
  if (k.noise.kind == "gaussian") {
    noise["sigma"] = k.noise.sigma;
  } else {
    noise["lo"] = k.noise.lo;
    noise["hi"] = k.noise.hi;
  }
  return {{"family", k.family}, {"noise", noise}};
}

// Mean of a measure, or null when it carries no mass.
json mean_or_null(const GridMeasure& m) {
  if (!(total_mass(m) > 0.0)) return nullptr;
  return mean(m);
}

json distance_or_null(const GridMeasure& a, const GridMeasure& b) {
  if (!(total_mass(a) > 0.0) || !(total_mass(b) > 0.0)) return nullptr;
  return wasserstein1(normalize(a).first, normalize(b).first, 1e-6);
}

std::string measure_csv(const GridMeasure& m) {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < m.size(); ++i) rows.push_back({m.grid().center(i), m[i]});
  return numeric_csv({"cell_center", "weight"}, rows);
}

json diagnostics_json(const MacroDiagnostics& d) {
  return {{"steps", d.steps},
          {"dt_used", d.dt_used},
          {"dt_bound", d.dt_bound},
          {"dt_exceeds_bound", d.dt_exceeds_bound},
          {"clipped_mass", d.clipped_mass},
          {"clip_events", d.clip_events},
          {"rejected_steps", d.rejected_steps},
          {"empty_sex_steps", d.empty_sex_steps},
          {"max_tail_mass", d.max_tail_mass},
          {"max_mass_correction", d.max_mass_correction}};
}

json run_json(const IbmTrajectory& t, std::uint64_t seed) {
  return {{"seed", seed},
          {"events", t.events},
          {"births", t.births},
          {"births_female", t.births_female},
          {"deaths", t.deaths},
          {"clamped", t.clamped},
          {"initial_count", t.initial_count},
          {"final_count", t.final_count},
          {"extinct", t.extinct},
          {"extinction_time", t.extinction_time ? json(*t.extinction_time) : json(nullptr)},
          {"final_time", t.final_time}};
}

struct Context {
  const ScenarioConfig& config;
  const RunOptions& options;
  std::uint64_t seed;
  ArtifactSet& out;
  std::ostream& log;
};

int cmd_totals(Context& c) {
  const ConstantRates& r = c.config.rates;
  const Regime regime = classify(r);
  json result{{"classification", to_string(regime)}, {"adaptation_sum", adaptation_sum(r)}, {"rates", describe_rates(r)}};
  double M_bar = 0.0, F_bar = 0.0;
  if (regime == Regime::persistence) {
    const StationaryResult s = stationary_point(r);
    M_bar = s.M_bar;
    F_bar = s.F_bar;
    result["residual"] = s.residual;
    result["A"] = s.M_bar / s.F_bar;
  } else {
    result["residual"] = poly_residual(r, 0.0, 0.0);
    result["A"] = nullptr;
  }
  result["M_bar"] = M_bar;
  result["F_bar"] = F_bar;

  const TotalsSpec& ts = c.config.totals;
  const auto series = integrate_totals({ts.M0, ts.F0}, r, ts.t_end, ts.dt, ts.stride);
  std::vector<double> t, dist;
  std::vector<std::vector<double>> rows;
  for (const TotalsSample& s : series) {
    rows.push_back({s.t, s.M, s.F});
    t.push_back(s.t);
    dist.push_back(std::hypot(s.M - M_bar, s.F - F_bar));
  }
  // The tail: distances small enough to be in the linear regime, large enough to be above round-off.
  try {
    const LinearFit fit = fit_log_tail(t, dist, 1e-10, 1e-2);
    result["fit_slope"] = fit.slope;
    result["fit_r2"] = fit.r2;
  } catch (const std::invalid_argument&) {
    result["fit_slope"] = nullptr;
    result["fit_r2"] = nullptr;
  }
  result["initial"] = {{"M0", ts.M0}, {"F0", ts.F0}};
  result["terminal"] = {{"t", series.back().t}, {"M", series.back().M}, {"F", series.back().F}};
  c.out.write("totals.csv", numeric_csv({"time", "M", "F"}, rows));
  c.out.write_json("totals.json", result);
  c.log << "classification " << to_string(regime) << ", (M_bar, F_bar) = (" << format_double(M_bar) << ", "
        << format_double(F_bar) << ")\n";
  return 0;
}

int cmd_stationary(Context& c) {
  const ConstantRates& r = c.config.rates;
  const StationaryResult s = stationary_point(r);
  json result{{"classification", to_string(classify(r))},
              {"kind", s.kind == StationaryResult::Kind::persistent ? "persistent" : "extinct_only"},
              {"M_bar", s.M_bar},
              {"F_bar", s.F_bar},
              {"residual", s.residual},
              {"starts", s.starts},
              {"starts_converged", s.starts_converged},
              {"start_spread", s.start_spread},
              {"rates", describe_rates(r)}};
  if (s.kind == StationaryResult::Kind::persistent) {
    result["A"] = s.M_bar / s.F_bar;
    const UniquenessProbe p = probe_uniqueness(r, 100, c.seed);
    result["uniqueness_probe"] = {{"starts", p.starts},
                                  {"converged", p.converged},
                                  {"max_deviation", p.max_deviation},
                                  {"max_residual", p.max_residual},
                                  {"seed", c.seed}};
  }
  c.out.write_json("stationary.json", result);
  c.log << "stationary point (" << format_double(s.M_bar) << ", " << format_double(s.F_bar) << ")\n";
  return 0;
}

IbmParams ibm_params(const ScenarioConfig& cfg, std::size_t N, double t_end, std::vector<double> samples,
                     std::uint64_t seed) {
  return IbmParams{cfg.make_rates(),
                   cfg.make_kernel(),
                   cfg.make_grid(),
                   N,
                   t_end,
                   std::move(samples),
                   seed,
                   cfg.make_initial(cfg.male0),
                   cfg.make_initial(cfg.female0),
                   cfg.ibm.init};
}

int cmd_ibm(Context& c) {
  const IbmSpec& spec = c.config.ibm;
  const std::size_t R = spec.replicas;
  std::vector<IbmTrajectory> runs(R);
  std::vector<std::uint64_t> seeds(R);
  for (std::size_t j = 0; j < R; ++j) seeds[j] = R == 1 ? c.seed : replica_seed(c.seed, spec.N, j);
  parallel_for(R, c.options.jobs, [&](std::size_t j) {
    runs[j] = simulate(ibm_params(c.config, spec.N, spec.t_end, spec.sample_times, seeds[j]));
  });
  json reps = json::array();
  for (std::size_t j = 0; j < R; ++j) {
    const std::string file = R == 1 ? "ibm.csv" : "ibm_replica_" + std::to_string(j) + ".csv";
    c.out.write(file, distribution_csv(frames_of(runs[j].snapshots)));
    json rj = run_json(runs[j], seeds[j]);
    rj["csv"] = file;
    reps.push_back(rj);
  }
  c.out.write_json("ibm_summary.json", {{"seed", c.seed},
                                        {"N", spec.N},
                                        {"t_end", spec.t_end},
                                        {"sample_times", spec.sample_times},
                                        {"rates", describe_rates(c.config.rates)},
                                        {"grid", describe_grid(c.config.grid)},
                                        {"kernel", describe_kernel(c.config.kernel)},
                                        {"replicas", reps}});
  c.log << R << " replica(s) at N = " << spec.N << ", " << runs[0].events << " events in replica 0\n";
  return 0;
}

int cmd_macro(Context& c) {
  const InheritanceKernel kernel = c.config.make_kernel();
  const GridMeasure m0 = c.config.make_initial(c.config.male0);
  const GridMeasure f0 = c.config.make_initial(c.config.female0);
  MacroTrajectory traj;
  std::string first = "male", second = "female";
  if (c.config.normalized_A) {
    first = "mu";
    second = "nu";
    traj = integrate_normalized(normalize(m0).first, normalize(f0).first, *c.config.normalized_A, kernel,
                                c.config.solver);
  } else {
    traj = integrate(MacroState{m0, f0, 0.0}, c.config.make_rates(), kernel, c.config.solver);
  }
  json snaps = json::array();
  for (const MacroState& s : traj.snapshots) {
    snaps.push_back({{"t", s.t},
                     {"mass_" + first, total_mass(s.m)},
                     {"mass_" + second, total_mass(s.f)},
                     {"mean_" + first, mean_or_null(s.m)},
                     {"mean_" + second, mean_or_null(s.f)},
                     {"distance", distance_or_null(s.m, s.f)}});
  }
  json summary{{"system", c.config.normalized_A ? "normalized" : "full"},
               {"grid", describe_grid(c.config.grid)},
               {"kernel", describe_kernel(c.config.kernel)},
               {"rates", describe_rates(c.config.rates)},
               {"diagnostics", diagnostics_json(traj.diagnostics)},
               {"snapshots", snaps}};
  if (c.config.normalized_A) summary["A"] = *c.config.normalized_A;
  c.out.write("macro.csv", distribution_csv(frames_of(traj.snapshots, first, second)));
  c.out.write_json("macro_summary.json", summary);
  c.log << traj.snapshots.size() << " snapshots, " << traj.diagnostics.steps << " steps\n";
  return 0;
}

int cmd_fixed_point(Context& c) {
  const InheritanceKernel kernel = c.config.make_kernel();
  const TraitGrid grid = c.config.make_grid();
  const double A = c.config.normalized_A.value_or(1.0);
  const GridMeasure mu0 = normalize(c.config.make_initial(c.config.male0)).first;
  const GridMeasure nu0 = normalize(c.config.make_initial(c.config.female0)).first;
  // Start from (A mu0 + nu0) / (A + 1), whose mean is the limiting mean of the flow.
  std::vector<double> w(grid.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = (A * mu0[i] + nu0[i]) / (A + 1.0);
  const GridMeasure start(grid, w);

  json result{{"kernel", describe_kernel(c.config.kernel)}, {"grid", describe_grid(c.config.grid)}, {"A", A}};
  if (c.config.fixed_point.check_hypotheses) {
    HypothesisConfig hc;
    hc.mean_lo = std::min(mean(mu0), mean(nu0));
    hc.mean_hi = std::max(mean(mu0), mean(nu0));
    hc.seed = c.seed;
    const HypothesisReport h = check_hypotheses(kernel, grid, hc);
    result["hypotheses"] = {{"condition_i_max", h.condition_i_max},
                            {"condition_ii_L", h.condition_ii.l_est},
                            {"condition_ii_C", h.condition_ii.c_est},
                            {"condition_ii_holds", h.condition_ii.holds},
                            {"mean_condition_error", h.mean_condition_max_error}};
  }
  FixedPointOptions fo;
  fo.tol = c.config.fixed_point.tol;
  fo.max_iter = c.config.fixed_point.max_iter;
  const FixedPointResult fp = fixed_point(kernel, start, fo);
  result["fixed_point"] = {{"iterations", fp.iterations},
                           {"final_step_distance", fp.final_step_distance},
                           {"mean", fp.mean},
                           {"variance", fp.variance},
                           {"damped", fp.damped},
                           {"limiting_mean", limiting_mean(A, mean(mu0), mean(nu0))}};

  const MacroTrajectory traj = integrate_normalized(mu0, nu0, A, kernel, c.config.solver);
  // mu_star is only accurate to about tol, so smaller increases are not significant.
  const ConvergenceReport rep = convergence_report(traj, fp.mu_star, fo.tol);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < rep.times.size(); ++i) {
    rows.push_back({rep.times[i], rep.dist_mu_nu[i], rep.dist_mu_star[i], rep.dist_nu_star[i], rep.dist_max[i],
                    rep.mean_mu[i], rep.mean_nu[i]});
  }
  result["convergence"] = {{"final_dist_max", rep.dist_max.back()},
                           {"final_dist_mu_nu", rep.dist_mu_nu.back()},
                           {"max_distance_non_increasing", rep.max_non_increasing},
                           {"gap_non_increasing", rep.gap_non_increasing},
                           {"fit_slope", rep.fit_valid ? json(rep.fit.slope) : json(nullptr)},
                           {"fit_r2", rep.fit_valid ? json(rep.fit.r2) : json(nullptr)},
                           {"diagnostics", diagnostics_json(traj.diagnostics)}};
  c.out.write("mu_star.csv", measure_csv(fp.mu_star));
  c.out.write("convergence.csv",
              numeric_csv({"time", "d_mu_nu", "d_mu_star", "d_nu_star", "d_max", "mean_mu", "mean_nu"}, rows));
  c.out.write_json("fixed_point.json", result);
  c.log << "fixed point after " << fp.iterations << " iterations, variance " << format_double(fp.variance) << "\n";
  return 0;
}

int cmd_lln(Context& c) {
  const LlnSpec& spec = c.config.lln;
  const double t_end = spec.checkpoints.back();
  SolverConfig sc = c.config.solver;
  sc.t_end = t_end;
  sc.sample_times = spec.checkpoints;
  const MacroTrajectory macro = integrate(MacroState{c.config.make_initial(c.config.male0),
                                                     c.config.make_initial(c.config.female0), 0.0},
                                          c.config.make_rates(), c.config.make_kernel(), sc);
  const std::size_t R = spec.replicas;
  std::vector<std::vector<IbmTrajectory>> runs(spec.scales.size(), std::vector<IbmTrajectory>(R));
  parallel_for(spec.scales.size() * R, c.options.jobs, [&](std::size_t k) {
    const std::size_t i = k / R, j = k % R;
    runs[i][j] = simulate(
        ibm_params(c.config, spec.scales[i], t_end, spec.checkpoints, replica_seed(c.seed, spec.scales[i], j)));
  });
  const LlnTable table = lln_compare(spec.scales, runs, macro, spec.checkpoints);

  std::vector<std::vector<double>> rows;
  json cells = json::array();
  for (const LlnCell& cell : table.cells) {
    rows.push_back({static_cast<double>(cell.N), cell.t, cell.mean_error, cell.std_error,
                    static_cast<double>(cell.replicas)});
    cells.push_back({{"N", cell.N}, {"t", cell.t}, {"mean_error", cell.mean_error}, {"std_error", cell.std_error},
                     {"replicas", cell.replicas}});
  }
  json run_list = json::array();
  for (std::size_t i = 0; i < spec.scales.size(); ++i) {
    for (std::size_t j = 0; j < R; ++j) {
      json rj = run_json(runs[i][j], replica_seed(c.seed, spec.scales[i], j));
      rj["N"] = spec.scales[i];
      rj["female_birth_fraction"] =
          runs[i][j].births > 0 ? json(static_cast<double>(runs[i][j].births_female) / runs[i][j].births)
                                : json(nullptr);
      run_list.push_back(rj);
    }
  }
  c.out.write("lln.csv", numeric_csv({"N", "time", "mean_error", "std_error", "replicas"}, rows));
  c.out.write_json("lln.json", {{"seed", c.seed},
                                {"scales", spec.scales},
                                {"checkpoints", spec.checkpoints},
                                {"replicas", R},
                                {"table", cells},
                                {"runs", run_list}});
  for (const LlnCell& cell : table.cells) {
    c.log << "N = " << cell.N << ", t = " << format_double(cell.t) << ": error " << format_double(cell.mean_error)
          << " +- " << format_double(cell.std_error) << "\n";
  }
  return 0;
}

int cmd_acceptance(Context& c) {
  AcceptanceOptions ao;
  ao.criteria = c.config.acceptance.criteria;
  ao.jobs = c.options.jobs;
  ao.seed = c.seed;
  ao.on_result = [&](const CriterionResult& r) { c.log << verdict_line(r) << std::endl; };
  const auto results = run_acceptance(ao);
  const json report = to_json(results);
  c.out.write_json("acceptance.json", report);
  c.log << report["passed"].get<std::size_t>() << "/" << results.size() << " criteria passed\n";
  return 0;
}

}  // namespace

std::string resolve_out_dir(const RunOptions& options, const ScenarioConfig& config) {
  if (!options.out_dir.empty()) return options.out_dir;
  if (!config.out_dir.empty()) return config.out_dir;
  if (const char* env = std::getenv(kOutEnv); env != nullptr && *env != '\0') return env;
  return kDefaultOut;
}

int run_subcommand(const std::string& name, const ScenarioConfig& config, const RunOptions& options,
                   std::ostream& log) {
  using Handler = int (*)(Context&);
  static const std::map<std::string, Handler> handlers{
      {"totals", cmd_totals}, {"stationary", cmd_stationary},   {"ibm", cmd_ibm},
      {"macro", cmd_macro},   {"fixed-point", cmd_fixed_point}, {"lln", cmd_lln},
      {"acceptance", cmd_acceptance}};
  const auto it = handlers.find(name);
  if (it == handlers.end()) throw ConfigError("subcommand", "unknown subcommand '" + name + "'");
  if (!config.scenario.empty() && config.scenario != name) {
    throw ConfigError("scenario", "config is for '" + config.scenario + "', not '" + name + "'");
  }
  ArtifactSet out(resolve_out_dir(options, config));
  const std::uint64_t seed = options.seed.value_or(config.seed);
  Context ctx{config, options, seed, out, log};
  const int status = it->second(ctx);
  json run{{"subcommand", name}, {"seed", seed}, {"schema_version", config.schema_version}};
  if (!options.config_path.empty()) run["config_sha256"] = sha256_file(options.config_path);
  out.write_manifest(run);
  log << "wrote " << out.entries().size() + 1 << " files to " << out.dir() << "\n";
  return status;
}

}  // namespace dimorph::cli
