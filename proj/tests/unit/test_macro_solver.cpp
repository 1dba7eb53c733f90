#include <cmath>

#include "doctest.h"
#include "dimorph/error.hpp"
#include "dimorph/macro_solver.hpp"
#include "dimorph/totals.hpp"

using namespace dimorph;

namespace {

const TraitGrid kGrid(-6.0, 6.0, 64);

InheritanceKernel gauss(double s) { return InheritanceKernel::additive(NoiseDensity::gaussian(s)); }

}  // namespace

TEST_CASE("constant-rate right-hand side against a direct evaluation") {
  // With constant p the birth density reduces to lambda * P(f / F, m / M) with
  // lambda = (p_f F + p_m M) / 2.
  const ConstantRates c{1.5, 2.5, 1.0, 0.7, 0.2, 0.3, 0.4, 0.1};
  const RateSet rates{c.p_f, c.p_m, c.D_f, c.D_m, c.U_ff, c.U_fm, c.U_mf, c.U_mm};
  const auto k = gauss(0.4);
  const auto m = gaussian_measure(kGrid, -1.0, 0.6, 0.8);
  const auto f = uniform_measure(kGrid, 0.0, 2.0, 1.4);
  const double M = total_mass(m), F = total_mass(f);
  const auto P = birth_operator_tensor(k, normalize(f).first, normalize(m).first);
  const double lambda = 0.5 * (c.p_f * F + c.p_m * M);
  const auto [dm, df] = rhs_general(MacroState{m, f, 0.0}, rates, k);
  for (std::size_t i = 0; i < kGrid.size(); ++i) {
    const double em = lambda * P[i] - (c.D_m + c.U_mm * M + c.U_mf * F) * m[i];
    const double ef = lambda * P[i] - (c.D_f + c.U_fm * M + c.U_ff * F) * f[i];
    CHECK(dm.weights()[i] == doctest::Approx(em).epsilon(1e-10));
    CHECK(df.weights()[i] == doctest::Approx(ef).epsilon(1e-10));
  }
}

TEST_CASE("trait-dependent right-hand side against a direct evaluation") {
  RateSet rates = RateSet::symmetric(2.0, 1.0, 0.25);
  rates.p_f = TraitRate([](double x) { return 1.0 + 0.5 * std::tanh(x); });
  rates.p_m = TraitRate([](double x) { return 2.0 + 0.1 * x; });
  rates.U_mf = CompetitionRate([](double x, double y) { return 0.2 + 0.05 * (x - y) * (x - y); });
  const auto k = gauss(0.5);
  const TraitGrid g(-3.0, 3.0, 24);
  const auto m = gaussian_measure(g, -0.5, 0.7, 1.1);
  const auto f = gaussian_measure(g, 0.8, 0.5, 0.6);
  std::vector<double> pf(g.size()), pm(g.size());
  double Pf = 0.0, Pm = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    pf[i] = rates.p_f(g.center(i)) * f[i];
    pm[i] = rates.p_m(g.center(i)) * m[i];
    Pf += pf[i];
    Pm += pm[i];
  }
  const auto P = birth_operator_tensor(k, GridMeasure(g, pf), GridMeasure(g, pm));
  const auto [dm, df] = rhs_general(MacroState{m, f, 0.0}, rates, k);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double B = 0.5 * (1.0 / Pm + 1.0 / Pf) * P[i];
    double comp_m = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      comp_m += rates.U_mm(g.center(i), g.center(j)) * m[j] + rates.U_mf(g.center(i), g.center(j)) * f[j];
    }
    CHECK(dm.weights()[i] == doctest::Approx(B - (rates.D_m(g.center(i)) + comp_m) * m[i]).epsilon(1e-10));
  }
}

TEST_CASE("no births when one sex is absent") {
  const auto m = gaussian_measure(kGrid, 0.0, 1.0, 2.0);
  const GridMeasure f(kGrid);
  const auto [dm, df] = rhs_general(MacroState{m, f, 0.0}, RateSet::symmetric(2.0, 1.0, 0.25), gauss(0.5));
  for (std::size_t i = 0; i < kGrid.size(); ++i) {
    CHECK(dm.weights()[i] == doctest::Approx(-(1.0 + 0.25 * 2.0) * m[i]));
    CHECK(df.weights()[i] == 0.0);
  }
  SolverConfig c;
  c.dt = 0.01;
  c.t_end = 1.0;
  c.stride = 100;
  const auto traj = integrate(MacroState{m, f, 0.0}, RateSet::symmetric(2.0, 1.0, 0.25), gauss(0.5), c);
  CHECK(traj.diagnostics.empty_sex_steps > 0);
  CHECK(total_mass(traj.snapshots.back().f) == 0.0);
}

TEST_CASE("grid mismatch") {
  const TraitGrid other(-6.0, 6.0, 32);
  CHECK_THROWS_AS(rhs_general(MacroState{gaussian_measure(kGrid, 0, 1), gaussian_measure(other, 0, 1), 0.0},
                              RateSet::symmetric(2.0, 1.0, 0.25), gauss(0.5)),
                  GridMismatch);
}

TEST_CASE("masses follow the total-mass system") {
  const ConstantRates c{1.0, 3.0, 1.0, 2.0, 0.1, 0.7, 0.3, 0.5};
  SolverConfig cfg;
  cfg.dt = 0.01;
  cfg.t_end = 5.0;
  cfg.stride = 50;
  const auto traj =
      integrate(MacroState{gaussian_measure(kGrid, -1.0, 0.5, 0.3), gaussian_measure(kGrid, 1.0, 0.5, 2.0), 0.0},
                RateSet{c.p_f, c.p_m, c.D_f, c.D_m, c.U_ff, c.U_fm, c.U_mf, c.U_mm}, gauss(0.5), cfg);
  const auto totals = integrate_totals({0.3, 2.0}, c, 5.0, 0.01, 50);
  REQUIRE(totals.size() == traj.snapshots.size());
  for (std::size_t i = 0; i < totals.size(); ++i) {
    CHECK(traj.snapshots[i].t == doctest::Approx(totals[i].t));
    CHECK(total_mass(traj.snapshots[i].m) == doctest::Approx(totals[i].M).epsilon(1e-10));
    CHECK(total_mass(traj.snapshots[i].f) == doctest::Approx(totals[i].F).epsilon(1e-10));
  }
}

TEST_CASE("euler and rk4 agree for small steps") {
  SolverConfig a;
  a.dt = 1e-3;
  a.t_end = 1.0;
  a.stride = 1000;
  SolverConfig b = a;
  b.scheme = Scheme::euler;
  const MacroState s0{gaussian_measure(kGrid, -1.0, 0.5), gaussian_measure(kGrid, 1.0, 0.5), 0.0};
  const auto ra = integrate(s0, RateSet::symmetric(2.0, 1.0, 0.25), gauss(0.5), a);
  const auto rb = integrate(s0, RateSet::symmetric(2.0, 1.0, 0.25), gauss(0.5), b);
  CHECK(total_mass(ra.snapshots.back().m) == doctest::Approx(total_mass(rb.snapshots.back().m)).epsilon(1e-3));
}

TEST_CASE("sample times are hit exactly") {
  SolverConfig c;
  c.dt = 0.03;
  c.t_end = 1.0;
  c.sample_times = {0.1, 0.55, 1.0};
  const auto traj = integrate(MacroState{gaussian_measure(kGrid, 0, 1), gaussian_measure(kGrid, 0, 1), 0.0},
                              RateSet::symmetric(2.0, 1.0, 0.25), gauss(0.5), c);
  REQUIRE(traj.snapshots.size() == 4);
  CHECK(traj.snapshots[0].t == 0.0);
  CHECK(traj.snapshots[2].t == doctest::Approx(0.55).epsilon(1e-14));
  CHECK(traj.snapshots[3].t == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("automatic step size") {
  SolverConfig c;
  c.t_end = 0.5;
  const auto traj = integrate(MacroState{gaussian_measure(kGrid, 0, 1), gaussian_measure(kGrid, 0, 1), 0.0},
                              RateSet::symmetric(2.0, 1.0, 0.25), gauss(0.5), c);
  CHECK(traj.diagnostics.dt_used > 0.0);
  CHECK(traj.diagnostics.dt_used <= traj.diagnostics.dt_bound + 1e-15);
  CHECK_FALSE(traj.diagnostics.dt_exceeds_bound);
}

TEST_CASE("weights stay non-negative under an aggressive euler step") {
  SolverConfig c;
  c.dt = 0.9;
  c.t_end = 9.0;
  c.scheme = Scheme::euler;
  for (Positivity mode : {Positivity::clip, Positivity::reject_step}) {
    c.positivity = mode;
    const auto traj = integrate(
        MacroState{gaussian_measure(kGrid, 0, 1, 20.0), gaussian_measure(kGrid, 0, 1, 20.0), 0.0},
        RateSet::symmetric(2.0, 1.0, 0.25), gauss(0.5), c);
    for (const auto& s : traj.snapshots) {
      for (double w : s.m.weights()) CHECK(w >= 0.0);
    }
    if (mode == Positivity::clip) CHECK(traj.diagnostics.clip_events > 0);
    if (mode == Positivity::reject_step) CHECK(traj.diagnostics.rejected_steps > 0);
  }
}

TEST_CASE("normalized system: mean dynamics") {
  // m' = n' - ... gives m - n = (m0 - n0) exp(-(A + 1) t / 2) and A m + n constant.
  const TraitGrid g(-3.0, 8.0, 96);
  SolverConfig c;
  c.dt = 1e-2;
  c.t_end = 4.0;
  c.stride = 20;
  for (double A : {0.5, 1.0, 3.0}) {
    const auto mu0 = gaussian_measure(g, 1.0, 0.5), nu0 = gaussian_measure(g, 4.0, 0.5);
    const double m0 = mean(mu0), n0 = mean(nu0);
    const auto traj = integrate_normalized(mu0, nu0, A, gauss(0.5), c);
    for (const auto& s : traj.snapshots) {
      CHECK(total_mass(s.m) == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(mean(s.m) - mean(s.f) == doctest::Approx((m0 - n0) * std::exp(-(A + 1.0) * s.t / 2.0)).epsilon(1e-6));
      CHECK(A * mean(s.m) + mean(s.f) == doctest::Approx(A * m0 + n0).epsilon(1e-8));
    }
  }
}

TEST_CASE("normalized system with a time-dependent ratio") {
  const TraitGrid g(-4.0, 6.0, 64);
  SolverConfig c;
  c.dt = 1e-2;
  c.t_end = 2.0;
  c.stride = 50;
  const SexRatio ratio = std::function<double(double)>([](double t) { return 1.0 + 0.5 * std::sin(t); });
  const auto traj = integrate_normalized(gaussian_measure(g, 0.0, 0.5), gaussian_measure(g, 2.0, 0.5), ratio,
                                         gauss(0.5), c);
  // (m - n)' = -(1 + A(t)) (m - n) / 2, integrated in closed form.
  for (const auto& s : traj.snapshots) {
    const double integral = 2.0 * s.t + 0.5 * (1.0 - std::cos(s.t));
    CHECK(mean(s.m) - mean(s.f) == doctest::Approx(-2.0 * std::exp(-0.5 * integral)).epsilon(1e-5));
  }
}

TEST_CASE("full run detects extinction") {
  SolverConfig c;
  c.dt = 0.05;
  c.t_end = 200.0;
  c.stride = 20;
  const auto m0 = gaussian_measure(kGrid, 0.0, 1.0);
  CHECK_THROWS_AS(coupled_full_run(m0, m0, RateSet::symmetric(0.5, 1.0, 0.25), gauss(0.5), c, normalize(m0).first),
                  ExtinctionDetected);
}

TEST_CASE("full run extracts the sex ratio") {
  SolverConfig c;
  c.dt = 0.05;
  c.t_end = 20.0;
  c.stride = 20;
  const auto m0 = gaussian_measure(kGrid, 0.0, 1.0, 0.5);
  const auto f0 = gaussian_measure(kGrid, 0.0, 1.0, 1.5);
  const auto run = coupled_full_run(m0, f0, RateSet::symmetric(2.0, 1.0, 0.25), gauss(0.5), c, normalize(m0).first);
  CHECK(run.sex_ratio.front() == doctest::Approx(1.0 / 3.0));
  CHECK(run.sex_ratio.back() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(run.normalized.size() == run.times.size());
  CHECK(total_mass(run.normalized.back().f) == doctest::Approx(1.0));
}
