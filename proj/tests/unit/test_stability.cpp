#include <cmath>

#include "doctest.h"
#include "dimorph/error.hpp"
#include "dimorph/stability.hpp"

using namespace dimorph;

namespace {

InheritanceKernel gauss(double s) { return InheritanceKernel::additive(NoiseDensity::gaussian(s)); }

}  // namespace

TEST_CASE("gaussian fixed point has variance 2 sigma^2") {
  const TraitGrid g(-8.0, 8.0, 256);
  for (double sigma : {0.5, 0.8}) {
    const auto fp = fixed_point(gauss(sigma), gaussian_measure(g, 0.4, 1.2));
    CHECK(fp.variance == doctest::Approx(2.0 * sigma * sigma).epsilon(0.02));
    CHECK(fp.mean == doctest::Approx(0.4).epsilon(1e-8));
    CHECK(fp.final_step_distance < 1e-8);
    CHECK(wasserstein1(birth_operator(gauss(sigma), fp.mu_star, fp.mu_star), fp.mu_star, 1e-6) <= 2e-8);
    CHECK(fp.steps.size() == fp.iterations);
  }
}

TEST_CASE("fixed point is independent of the start given the mean") {
  const TraitGrid g(-8.0, 8.0, 256);
  const auto a = fixed_point(gauss(0.5), gaussian_measure(g, 0.0, 1.0));
  const auto b = fixed_point(gauss(0.5), uniform_measure(g, -2.0, 2.0));
  CHECK(wasserstein1(a.mu_star, b.mu_star, 1e-6) <= 2e-8);
}

TEST_CASE("multiplicative fixed point is exponential") {
  // Z ~ U(0, 1): if X1, X2 are Exp(mean c) then (X1 + X2) Z is again Exp(mean c),
  // so the stationary law has variance equal to its squared mean.
  const TraitGrid g(0.0, 40.0, 512);
  const auto mu0 = uniform_measure(g, 1.0, 2.0);
  const auto fp = fixed_point(InheritanceKernel::multiplicative(NoiseDensity::uniform(0.0, 1.0)), mu0);
  CHECK(fp.mean == doctest::Approx(mean(mu0)).epsilon(1e-6));
  CHECK(fp.variance == doctest::Approx(fp.mean * fp.mean).epsilon(0.02));
}

TEST_CASE("fixed point errors") {
  const TraitGrid g(-4.0, 4.0, 32);
  const auto sampler = InheritanceKernel::sampling_only([](double x, double y, Rng&) { return 0.5 * (x + y); }, "mid");
  CHECK_THROWS_AS(fixed_point(sampler, gaussian_measure(g, 0, 1)), UnsupportedKernel);
  // Offspring pulled towards +1 break the mean condition.
  const auto biased = InheritanceKernel::from_density(
      [](double x, double y, double z) {
        const double c = 0.5 * (x + y) + 1.0;
        return std::exp(-2.0 * (z - c) * (z - c));
      },
      g, "biased");
  CHECK_THROWS_AS(fixed_point(biased, gaussian_measure(g, 0, 1)), UnsupportedKernel);
  FixedPointOptions o;
  o.max_iter = 2;
  CHECK_THROWS_AS(fixed_point(gauss(0.5), gaussian_measure(g, 0, 1), o), NoConvergence);
}

TEST_CASE("limiting mean") {
  CHECK(limiting_mean(1.0, 0.0, 1.0) == doctest::Approx(0.5));
  CHECK(limiting_mean(2.0, 1.0, 4.0) == doctest::Approx(2.0));
  for (double A : {0.1, 1.0, 7.0}) {
    CHECK(limiting_mean(A, 3.0, 3.0) == doctest::Approx(3.0));
    CHECK((A + 1.0) * limiting_mean(A, 1.0, -2.0) == doctest::Approx(A * 1.0 - 2.0));
  }
  CHECK_THROWS_AS(limiting_mean(0.0, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("convergence report from the fixed point") {
  const TraitGrid g(-8.0, 8.0, 128);
  const auto fp = fixed_point(gauss(0.5), gaussian_measure(g, 0.0, 1.0));
  SolverConfig c;
  c.dt = 0.05;
  c.t_end = 5.0;
  c.stride = 10;
  const auto traj = integrate_normalized(fp.mu_star, fp.mu_star, 1.0, gauss(0.5), c);
  const auto rep = convergence_report(traj, fp.mu_star);
  CHECK(rep.times.size() == traj.snapshots.size());
  CHECK(rep.dist_mu_nu.size() == traj.snapshots.size());
  for (double d : rep.dist_max) CHECK(d < 1e-7);
}

TEST_CASE("convergence report of a gaussian scenario") {
  const TraitGrid g(-8.0, 8.0, 128);
  const auto fp = fixed_point(gauss(0.5), gaussian_measure(g, 0.0, 1.0));
  SolverConfig c;
  c.dt = 0.05;
  c.t_end = 20.0;
  c.stride = 10;
  const auto traj = integrate_normalized(gaussian_measure(g, 0.0, 1.0), uniform_measure(g, -2.0, 2.0), 1.0,
                                         gauss(0.5), c);
  const auto rep = convergence_report(traj, fp.mu_star, 1e-8);
  CHECK(rep.dist_max.back() < 1e-4);
  CHECK(rep.dist_mu_nu.back() < 1e-4);
  CHECK(rep.max_non_increasing);
  REQUIRE(rep.fit_valid);
  CHECK(rep.fit.slope < 0.0);
  CHECK(std::abs(rep.mean_mu.back()) < 1e-3);
}

TEST_CASE("lln comparison bookkeeping") {
  const TraitGrid g(-6.0, 6.0, 64);
  const RateSet rates = RateSet::symmetric(2.0, 1.0, 0.25);
  const auto m0 = gaussian_measure(g, -1.0, 0.5), f0 = gaussian_measure(g, 1.0, 0.5);
  SolverConfig c;
  c.dt = 0.01;
  c.t_end = 1.0;
  c.sample_times = {1.0};
  const auto macro = integrate(MacroState{m0, f0, 0.0}, rates, gauss(0.5), c);
  std::vector<std::vector<IbmTrajectory>> runs(2);
  const std::vector<std::size_t> scales{50, 2000};
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      runs[i].push_back(simulate(
          IbmParams{rates, gauss(0.5), g, scales[i], 1.0, {0.0, 1.0}, replica_seed(3, scales[i], j), m0, f0}));
    }
  }
  const auto table = lln_compare(scales, runs, macro, {0.0, 1.0});
  REQUIRE(table.cells.size() == 4);
  CHECK(table.at(1, 0).N == 2000);
  CHECK(table.at(0, 1).t == 1.0);
  CHECK(table.at(1, 1).mean_error < table.at(0, 1).mean_error);
  // At t = 0 only the quantile placement differs from the macro initial data.
  CHECK(table.at(1, 0).mean_error < 0.5 * g.dx());
  runs[0].resize(2);
  CHECK_THROWS_AS(lln_compare(scales, runs, macro, {1.0}), InsufficientReplicas);
}

TEST_CASE("contraction probe") {
  const auto probe = contraction_probe(gauss(1.0), TraitGrid(-8.0, 8.0, 96), -4.0, 4.0, 40, 2);
  CHECK(probe.samples.size() == 40);
  CHECK(probe.violations == 0);
  CHECK(probe.min_margin > 0.0);
  CHECK(probe.max_ratio < 1.0);
  for (const auto& s : probe.samples) CHECK(s.lhs < s.rhs);
}
