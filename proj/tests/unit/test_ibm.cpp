#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "dimorph/error.hpp"
#include "dimorph/fenwick.hpp"
#include "dimorph/ibm.hpp"

using namespace dimorph;

namespace {

const TraitGrid kGrid(-6.0, 6.0, 128);

InheritanceKernel gauss(double s) { return InheritanceKernel::additive(NoiseDensity::gaussian(s)); }

// Kolmogorov statistic of a sample against U(0, 1).
double ks_uniform(std::vector<double> u) {
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - u[i], u[i] - static_cast<double>(i) / n});
  }
  return d;
}

}  // namespace

TEST_CASE("fenwick tree against naive sums") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FenwickTree t(37);
  std::vector<double> v(37, 0.0);
  for (int step = 0; step < 2000; ++step) {
    const auto i = static_cast<std::size_t>(u(rng) * 37.0);
    v[i] = u(rng) < 0.2 ? 0.0 : u(rng);
    t.set(i, v[i]);
    const auto k = static_cast<std::size_t>(u(rng) * 38.0);
    CHECK(t.prefix(k) == doctest::Approx(std::accumulate(v.begin(), v.begin() + k, 0.0)).epsilon(1e-12));
    const double total = std::accumulate(v.begin(), v.end(), 0.0);
    CHECK(t.total() == doctest::Approx(total).epsilon(1e-12));
    if (total > 0.0) {
      const double target = u(rng) * total;
      const std::size_t got = t.find(target);
      // find returns the first index whose inclusive prefix exceeds target.
      double run = 0.0;
      std::size_t expect = 0;
      for (; expect < v.size(); ++expect) {
        run += v[expect];
        if (run > target) break;
      }
      CHECK(got == std::min(expect, v.size() - 1));
    }
  }
  for (std::size_t i = 0; i < v.size(); ++i) t.assign_raw(i, 1.0);
  t.rebuild(40);
  CHECK(t.capacity() == 40);
  CHECK(t.total() == doctest::Approx(37.0));
  CHECK(t.prefix(10) == doctest::Approx(10.0));
}

TEST_CASE("event rates of a small population") {
  ScaledPopulation pop(RateSet::symmetric(2.0, 1.0, 0.25), 10);
  for (double x : {-1.0, 0.0}) pop.add(Sex::male, x);
  for (double x : {0.5, 1.0, 1.5}) pop.add(Sex::female, x);
  const RateSummary r = event_rates(pop);
  CHECK(r.mating_female == doctest::Approx(6.0));
  CHECK(r.mating_male == doctest::Approx(4.0));
  CHECK(r.natural_death_female == doctest::Approx(3.0));
  CHECK(r.natural_death_male == doctest::Approx(2.0));
  // Each individual's competition load is (u n_f + u n_m) / N = 0.125.
  CHECK(r.competition_female == doctest::Approx(3.0 * 0.125));
  CHECK(r.competition_male == doctest::Approx(2.0 * 0.125));
  CHECK(pop.death_rate(Sex::male, 0) == doctest::Approx(1.125));
}

TEST_CASE("no mating without both sexes") {
  ScaledPopulation pop(RateSet::symmetric(2.0, 1.0, 0.25), 10);
  pop.add(Sex::female, 0.0);
  pop.add(Sex::female, 0.1);
  const RateSummary r = event_rates(pop);
  CHECK(r.mating() == 0.0);
  CHECK(r.death() > 0.0);
}

TEST_CASE("empty population cannot step") {
  ScaledPopulation pop(RateSet::symmetric(2.0, 1.0, 0.25), 10);
  Rng rng(1);
  CHECK_THROWS_AS(step(pop, gauss(0.5), kGrid, rng), ExtinctPopulation);
}

TEST_CASE("partners are drawn proportionally to mating capability") {
  RateSet r = RateSet::symmetric(1.0, 1.0, 0.25);
  r.p_m = TraitRate([](double x) { return x; });
  ScaledPopulation pop(r, 10);
  pop.add(Sex::male, 1.0);
  pop.add(Sex::male, 3.0);
  Rng rng(4);
  const int n = 40000;
  int second = 0;
  for (int i = 0; i < n; ++i) second += pop.draw_partner(Sex::male, rng) == 1 ? 1 : 0;
  const double frac = static_cast<double>(second) / n;
  CHECK(std::abs(frac - 0.75) < 4.0 * std::sqrt(0.75 * 0.25 / n));
}

TEST_CASE("uniform partner choice when the sex has no mating capability") {
  RateSet r = RateSet::symmetric(1.0, 1.0, 0.25);
  r.p_m = TraitRate(0.0);
  ScaledPopulation pop(r, 10);
  for (double x : {0.0, 1.0, 2.0, 3.0}) pop.add(Sex::male, x);
  Rng rng(5);
  std::vector<int> hits(4, 0);
  for (int i = 0; i < 20000; ++i) ++hits[pop.draw_partner(Sex::male, rng)];
  for (int h : hits) CHECK(std::abs(h - 5000) < 4.0 * std::sqrt(20000 * 0.25 * 0.75));
}

TEST_CASE("waiting times are exponential with the total rate") {
  ScaledPopulation pop(RateSet::symmetric(2.0, 1.0, 0.25), 200);
  Rng rng(8);
  for (int i = 0; i < 200; ++i) pop.add(i % 2 == 0 ? Sex::male : Sex::female, -1.0 + 0.01 * i);
  std::vector<double> u;
  int female_births = 0, births = 0;
  for (int i = 0; i < 5000; ++i) {
    const double rate = event_rates(pop).total();
    const auto [dt, ev] = step(pop, gauss(0.5), kGrid, rng);
    u.push_back(1.0 - std::exp(-rate * dt));
    if (ev.kind == Event::Kind::mating) {
      ++births;
      female_births += ev.newborn.sex == Sex::female ? 1 : 0;
    }
  }
  // Critical value of the Kolmogorov distribution at level 0.001.
  CHECK(ks_uniform(u) < 1.95 / std::sqrt(static_cast<double>(u.size())));
  CHECK(std::abs(female_births - 0.5 * births) < 4.0 * std::sqrt(0.25 * births));
}

TEST_CASE("caches match recomputation with trait-dependent rates") {
  RateSet r = RateSet::symmetric(2.0, 1.0, 0.25);
  r.p_f = TraitRate([](double x) { return 2.0 + std::tanh(x); });
  r.D_f = TraitRate([](double x) { return 1.0 + 0.1 * x * x; });
  r.U_mm = CompetitionRate([](double x, double y) { return 0.2 + 0.1 * std::exp(-(x - y) * (x - y)); });
  r.U_fm = CompetitionRate([](double x, double y) { return 0.3 / (1.0 + std::abs(x - y)); });
  ScaledPopulation pop(r, 150);
  CHECK_FALSE(pop.constant_competition());
  Rng rng(12);
  for (int i = 0; i < 150; ++i) pop.add(i % 3 == 0 ? Sex::male : Sex::female, std::normal_distribution<>(0.0, 1.0)(rng));
  for (int i = 0; i < 20000 && pop.size() > 0; ++i) step(pop, gauss(0.5), kGrid, rng);
  const CacheCheck c = pop.verify_caches(1e-6);
  CHECK(c.ok);
  CHECK(c.max_relative_error < 1e-6);
  // Loads recomputed here from their definition.
  for (Sex s : {Sex::female, Sex::male}) {
    for (std::size_t i = 0; i < std::min<std::size_t>(pop.count(s), 20); ++i) {
      double load = 0.0;
      for (Sex o : {Sex::female, Sex::male}) {
        const CompetitionRate& U = s == Sex::female ? (o == Sex::female ? r.U_ff : r.U_fm)
                                                    : (o == Sex::female ? r.U_mf : r.U_mm);
        for (double y : pop.traits(o)) load += U(pop.trait(s, i), y);
      }
      CHECK(pop.competition_load(s, i) == doctest::Approx(load / 150.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("out-of-grid newborns are clamped and counted") {
  const TraitGrid narrow(-0.5, 0.5, 16);
  IbmParams p{RateSet::symmetric(3.0, 1.0, 0.25), gauss(2.0), narrow, 200, 1.0, {1.0}, 3,
              uniform_measure(narrow, -0.5, 0.5), uniform_measure(narrow, -0.5, 0.5), InitMode::quantile};
  const IbmTrajectory t = simulate(p);
  CHECK(t.clamped > 0);
  CHECK(t.clamped <= t.births);
  CHECK(total_mass(t.snapshots.back().male) + total_mass(t.snapshots.back().female) ==
        doctest::Approx(static_cast<double>(t.final_count) / 200.0));
}

TEST_CASE("initial placement") {
  Rng rng(1);
  const auto m = gaussian_measure(kGrid, 0.0, 1.0, 0.5);
  const auto q = initial_traits(m, 1000, InitMode::quantile, rng);
  CHECK(q.size() == 500);
  CHECK(std::is_sorted(q.begin(), q.end()));
  double s = 0.0;
  for (double x : q) s += x;
  CHECK(std::abs(s / 500.0) < 0.01);
  const auto r = initial_traits(m, 1000, InitMode::sample, rng);
  CHECK(r.size() == 500);
}

TEST_CASE("simulation accounting and determinism") {
  IbmParams p{RateSet::symmetric(2.0, 1.0, 0.25), gauss(0.5), kGrid, 500, 2.0, {0.0, 1.0, 2.0}, 77,
              gaussian_measure(kGrid, -1.0, 0.5), gaussian_measure(kGrid, 1.0, 0.5), InitMode::quantile};
  const IbmTrajectory a = simulate(p);
  const IbmTrajectory b = simulate(p);
  CHECK(a.events == a.births + a.deaths);
  CHECK(a.final_count + a.deaths == a.initial_count + a.births);
  CHECK(a.initial_count == 1000);
  REQUIRE(a.snapshots.size() == 3);
  CHECK(a.snapshots[0].n_male == 500);
  for (std::size_t i = 0; i < a.snapshots.size(); ++i) {
    CHECK(a.snapshots[i].male == b.snapshots[i].male);
    CHECK(a.snapshots[i].female == b.snapshots[i].female);
  }
  p.seed = 78;
  const IbmTrajectory c = simulate(p);
  CHECK_FALSE(c.snapshots.back().male == a.snapshots.back().male);
}

TEST_CASE("populations without births die out") {
  RateSet r = RateSet::symmetric(0.0, 2.0, 0.25);
  IbmParams p{r, gauss(0.5), kGrid, 100, 50.0, {1.0, 50.0}, 5,
              gaussian_measure(kGrid, 0.0, 0.5), gaussian_measure(kGrid, 0.0, 0.5), InitMode::quantile};
  const IbmTrajectory t = simulate(p);
  CHECK(t.extinct);
  REQUIRE(t.extinction_time.has_value());
  CHECK(*t.extinction_time < 50.0);
  CHECK(t.births == 0);
  CHECK(t.final_count == 0);
}

TEST_CASE("replica seeds are distinct") {
  std::set<std::uint64_t> seen;
  for (std::size_t N : {100, 1000}) {
    for (std::size_t j = 0; j < 50; ++j) seen.insert(replica_seed(7, N, j));
  }
  CHECK(seen.size() == 100);
  CHECK(replica_seed(7, 100, 3) == replica_seed(7, 100, 3));
}
