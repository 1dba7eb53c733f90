#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "dimorph/error.hpp"
#include "dimorph/measures.hpp"

using namespace dimorph;

namespace {

// W1 through quantile functions: integral over u in (0, 1) of |Qa(u) - Qb(u)|, for
// atoms at cell centers. Independent of the CDF-difference formula under test.
double quantile_w1(const GridMeasure& a, const GridMeasure& b) {
  const TraitGrid& g = a.grid();
  std::vector<double> ca(a.size()), cb(b.size());
  double sa = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
    ca[i] = sa;
    cb[i] = sb;
  }
  std::vector<double> breaks;
  for (std::size_t i = 0; i < a.size(); ++i) {
    breaks.push_back(ca[i] / sa);
    breaks.push_back(cb[i] / sb);
  }
  breaks.push_back(0.0);
  std::sort(breaks.begin(), breaks.end());
  double w = 0.0;
  for (std::size_t k = 1; k < breaks.size(); ++k) {
    const double lo = breaks[k - 1], hi = breaks[k];
    if (hi <= lo) continue;
    const double u = 0.5 * (lo + hi);
    const auto qa = std::lower_bound(ca.begin(), ca.end(), u * sa) - ca.begin();
    const auto qb = std::lower_bound(cb.begin(), cb.end(), u * sb) - cb.begin();
    w += (hi - lo) * std::abs(g.center(static_cast<std::size_t>(qa)) - g.center(static_cast<std::size_t>(qb)));
  }
  return w * sa;
}

GridMeasure random_measure(const TraitGrid& g, std::mt19937_64& rng, double mass) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> w(g.size());
  double s = 0.0;
  for (double& v : w) {
    v = u(rng) < 0.3 ? 0.0 : u(rng);
    s += v;
  }
  for (double& v : w) v *= mass / s;
  return GridMeasure(g, w);
}

}  // namespace

TEST_CASE("grid geometry") {
  const TraitGrid g(-1.0, 1.0, 4);
  CHECK(g.dx() == doctest::Approx(0.5));
  CHECK(g.center(0) == doctest::Approx(-0.75));
  CHECK(g.edge(4) == doctest::Approx(1.0));
  CHECK(g.cell_of(-5.0) == 0);
  CHECK(g.cell_of(5.0) == 3);
  CHECK(g.cell_of(0.1) == 2);
  CHECK_THROWS_AS(TraitGrid(1.0, 1.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(TraitGrid(0.0, 1.0, 1), std::invalid_argument);
}

TEST_CASE("measures reject negative weights") {
  const TraitGrid g(0.0, 1.0, 3);
  CHECK_THROWS_AS(GridMeasure(g, {0.1, -0.1, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(GridMeasure(g, {0.1, 0.1}), std::invalid_argument);
}

TEST_CASE("wasserstein between point masses is their distance") {
  const TraitGrid g(0.0, 10.0, 100);
  const auto a = point_mass(g, 2.05);
  const auto b = point_mass(g, 7.35);
  CHECK(wasserstein1(a, b) == doctest::Approx(g.center(g.cell_of(7.35)) - g.center(g.cell_of(2.05))));
  CHECK(wasserstein1(a, a) == 0.0);
}

TEST_CASE("wasserstein of a shifted measure is the shift") {
  const TraitGrid g(-10.0, 10.0, 200);
  std::vector<double> w(g.size(), 0.0), v(g.size(), 0.0);
  for (std::size_t i = 50; i < 80; ++i) w[i] = 1.0 / 30.0;
  for (std::size_t i = 57; i < 87; ++i) v[i] = 1.0 / 30.0;
  CHECK(wasserstein1(GridMeasure(g, w), GridMeasure(g, v)) == doctest::Approx(7 * g.dx()).epsilon(1e-12));
}

TEST_CASE("wasserstein agrees with the quantile formula on random measures") {
  std::mt19937_64 rng(3);
  const TraitGrid g(-3.0, 5.0, 37);
  for (int k = 0; k < 50; ++k) {
    const double mass = 0.5 + k * 0.1;
    const auto a = random_measure(g, rng, mass);
    const auto b = random_measure(g, rng, mass);
    CHECK(wasserstein1(a, b) == doctest::Approx(quantile_w1(a, b)).epsilon(1e-10));
  }
}

TEST_CASE("wasserstein is a metric on samples") {
  std::mt19937_64 rng(5);
  const TraitGrid g(0.0, 1.0, 20);
  for (int k = 0; k < 30; ++k) {
    const auto a = random_measure(g, rng, 1.0), b = random_measure(g, rng, 1.0), c = random_measure(g, rng, 1.0);
    CHECK(wasserstein1(a, b) == doctest::Approx(wasserstein1(b, a)));
    CHECK(wasserstein1(a, c) <= wasserstein1(a, b) + wasserstein1(b, c) + 1e-14);
  }
}

TEST_CASE("wasserstein preconditions") {
  const TraitGrid g(0.0, 1.0, 10), h(0.0, 2.0, 10);
  CHECK_THROWS_AS(wasserstein1(point_mass(g, 0.5, 1.0), point_mass(g, 0.5, 1.1)), MassMismatch);
  CHECK_THROWS_AS(wasserstein1(point_mass(g, 0.5), point_mass(h, 0.5)), GridMismatch);
  CHECK_NOTHROW(wasserstein1(point_mass(g, 0.5, 1.0), point_mass(g, 0.5, 1.0 + 1e-12)));
}

TEST_CASE("gaussian builder matches cell probabilities") {
  const TraitGrid g(-8.0, 8.0, 512);
  const auto m = gaussian_measure(g, 0.3, 1.0, 2.0);
  CHECK(total_mass(m) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(mean(m) == doctest::Approx(0.3).epsilon(1e-9));
  // Midpoint discretization adds dx^2 / 12 to the variance (Sheppard).
  CHECK(variance(m) == doctest::Approx(1.0 + g.dx() * g.dx() / 12.0).epsilon(1e-6));
  const double p = 0.5 * (std::erf((g.edge(257) - 0.3) / std::sqrt(2.0)) - std::erf((g.edge(256) - 0.3) / std::sqrt(2.0)));
  CHECK(m[256] == doctest::Approx(2.0 * p).epsilon(1e-9));
}

TEST_CASE("uniform builder and moments") {
  const TraitGrid g(0.0, 4.0, 40);
  const auto m = uniform_measure(g, 1.0, 3.0);
  CHECK(mean(m) == doctest::Approx(2.0));
  CHECK(variance(m) == doctest::Approx(4.0 / 12.0).epsilon(1e-2));
  CHECK(moment(m, 0) == doctest::Approx(1.0));
  CHECK(abs_moment(m, 1.0) == doctest::Approx(2.0));
}

TEST_CASE("normalize returns the probability and the mass") {
  const TraitGrid g(0.0, 1.0, 5);
  const auto [p, mass] = normalize(GridMeasure(g, {0.0, 1.0, 2.0, 1.0, 0.0}));
  CHECK(mass == doctest::Approx(4.0));
  CHECK(total_mass(p) == doctest::Approx(1.0));
  CHECK(p[2] == doctest::Approx(0.5));
  CHECK_THROWS_AS(normalize(GridMeasure(g)), ZeroMass);
  CHECK_THROWS_AS(mean(GridMeasure(g)), ZeroMass);
}

TEST_CASE("bin_points puts weight in the containing cell") {
  const TraitGrid g(0.0, 1.0, 4);
  const std::vector<double> x{0.1, 0.2, 0.9, 1.0};
  const std::vector<double> w{1.0, 2.0, 3.0, 4.0};
  const auto m = bin_points(g, x, w);
  CHECK(m[0] == doctest::Approx(3.0));
  CHECK(m[3] == doctest::Approx(7.0));
}

TEST_CASE("total variation") {
  const TraitGrid g(0.0, 1.0, 4);
  CHECK(total_variation(GridMeasure(g, {1, 0, 0, 0}), GridMeasure(g, {0, 0, 0, 1})) == doctest::Approx(2.0));
}
