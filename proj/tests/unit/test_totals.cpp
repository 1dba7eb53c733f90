#include <cmath>
#include <random>

#include "doctest.h"
#include "dimorph/error.hpp"
#include "dimorph/fit.hpp"
#include "dimorph/totals.hpp"

using namespace dimorph;

namespace {

ConstantRates symmetric(double p, double D, double u) { return {p, p, D, D, u, u, u, u}; }

// Stationary equations written out directly: births equal deaths for each sex.
std::pair<double, double> balance(const ConstantRates& r, double M, double F) {
  const double births = 0.5 * (r.p_f * F + r.p_m * M);
  return {births - r.D_m * M - r.U_mm * M * M - r.U_mf * M * F, births - r.D_f * F - r.U_fm * M * F - r.U_ff * F * F};
}

}  // namespace

TEST_CASE("classification examples") {
  CHECK(classify(symmetric(1.0, 1.0, 0.25)) == Regime::extinction);
  CHECK(classify(symmetric(2.0, 1.0, 0.25)) == Regime::persistence);
  for (double Dm : {0.1, 1.0, 50.0}) {
    CHECK(classify({3.0, 0.0, 1.0, Dm, 0.25, 0.25, 0.25, 0.25}) == Regime::persistence);
  }
  CHECK(std::string(to_string(Regime::persistence)) == "Persistence");
  CHECK(std::string(to_string(Regime::extinction)) == "Extinction");
}

TEST_CASE("classification is invariant under rescaling p and D together") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.05, 4.0);
  for (int k = 0; k < 200; ++k) {
    ConstantRates r{u(rng), u(rng), u(rng), u(rng), 0.3, 0.3, 0.3, 0.3};
    const double c = u(rng);
    ConstantRates s = r;
    s.p_f *= c;
    s.p_m *= c;
    s.D_f *= c;
    s.D_m *= c;
    // Skip cases so close to the threshold that rounding decides.
    if (std::abs(adaptation_sum(r) - 2.0) < 1e-9) continue;
    CHECK(classify(r) == classify(s));
  }
}

TEST_CASE("invalid rates are rejected") {
  CHECK_THROWS_AS(classify({1.0, 1.0, -1.0, 1.0, 0.1, 0.1, 0.1, 0.1}), std::invalid_argument);
  CHECK_THROWS_AS(classify({1.0, 1.0, 1.0, 1.0, 0.0, 0.1, 0.1, 0.1}), std::invalid_argument);
  CHECK_THROWS_AS(classify({0.0, 0.0, 1.0, 1.0, 0.1, 0.1, 0.1, 0.1}), std::invalid_argument);
  const auto v = totals_violations({1.0, 1.0, -1.0, 1.0, 0.1, 0.1, 0.1, 0.1});
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("D_f") != std::string::npos);
}

TEST_CASE("right-hand side") {
  const auto r = symmetric(2.0, 1.0, 0.25);
  const auto [dM0, dF0] = totals_rhs({0.0, 0.0}, r);
  CHECK(dM0 == 0.0);
  CHECK(dF0 == 0.0);
  const auto [dM, dF] = totals_rhs({1.3, 1.3}, r);
  CHECK(dM == doctest::Approx(dF));
  const ConstantRates a{1.0, 3.0, 1.0, 2.0, 0.1, 0.7, 0.3, 0.5};
  const auto [x, y] = totals_rhs({0.4, 0.9}, a);
  const auto [ex, ey] = balance(a, 0.4, 0.9);
  CHECK(x == doctest::Approx(ex));
  CHECK(y == doctest::Approx(ey));
}

TEST_CASE("symmetric stationary point") {
  // M = F reduces to (p - D) M = 2 u M^2.
  for (const auto& [p, D, u] : {std::tuple{2.0, 1.0, 0.25}, std::tuple{5.0, 2.0, 0.1}, std::tuple{1.2, 0.5, 3.0}}) {
    const auto s = stationary_point(symmetric(p, D, u));
    REQUIRE(s.kind == StationaryResult::Kind::persistent);
    CHECK(s.M_bar == doctest::Approx((p - D) / (2.0 * u)).epsilon(1e-10));
    CHECK(s.F_bar == doctest::Approx((p - D) / (2.0 * u)).epsilon(1e-10));
  }
}

TEST_CASE("asymmetric stationary point balances both sexes") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.05, 3.0);
  int tested = 0;
  while (tested < 50) {
    const ConstantRates r{u(rng), u(rng), u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)};
    if (classify(r) != Regime::persistence) continue;
    ++tested;
    const auto s = stationary_point(r);
    CHECK(s.M_bar > 0.0);
    CHECK(s.F_bar > 0.0);
    const auto [bm, bf] = balance(r, s.M_bar, s.F_bar);
    const double scale = 0.5 * (r.p_f * s.F_bar + r.p_m * s.M_bar);
    CHECK(std::abs(bm) <= 1e-10 * scale);
    CHECK(std::abs(bf) <= 1e-10 * scale);
    CHECK(s.residual < 1e-10);
  }
}

TEST_CASE("one-sided mating capability") {
  // p_m = 0: the stationary point still exists when p_f / D_f > 2.
  const ConstantRates r{3.0, 0.0, 1.0, 0.5, 0.25, 0.25, 0.25, 0.25};
  const auto s = stationary_point(r);
  REQUIRE(s.kind == StationaryResult::Kind::persistent);
  const auto [bm, bf] = balance(r, s.M_bar, s.F_bar);
  CHECK(std::abs(bm) < 1e-9);
  CHECK(std::abs(bf) < 1e-9);
}

TEST_CASE("extinction regime has only the trivial root") {
  const auto s = stationary_point(symmetric(1.0, 1.0, 0.25));
  CHECK(s.kind == StationaryResult::Kind::extinct_only);
  CHECK(s.M_bar == 0.0);
}

TEST_CASE("uniqueness probe") {
  const ConstantRates r{1.0, 3.0, 1.0, 2.0, 0.1, 0.7, 0.3, 0.5};
  const auto p = probe_uniqueness(r, 100, 4);
  CHECK(p.converged == 100);
  CHECK(p.max_deviation < 1e-8);
  CHECK(p.max_residual < 1e-10);
}

TEST_CASE("integration from the stationary point stays put") {
  const auto r = symmetric(2.0, 1.0, 0.25);
  const auto series = integrate_totals({2.0, 2.0}, r, 100.0, 0.01, 100);
  for (const auto& s : series) {
    CHECK(std::abs(s.M - 2.0) < 1e-8);
    CHECK(std::abs(s.F - 2.0) < 1e-8);
  }
  CHECK(series.front().t == 0.0);
  CHECK(series.back().t == doctest::Approx(100.0));
}

TEST_CASE("opposite starts reach the same point with an exponential tail") {
  const ConstantRates r{1.0, 3.0, 1.0, 2.0, 0.1, 0.7, 0.3, 0.5};
  const auto s = stationary_point(r);
  const auto a = integrate_totals({0.1, 5.0}, r, 200.0, 0.01, 50);
  const auto b = integrate_totals({5.0, 0.1}, r, 200.0, 0.01, 50);
  CHECK(a.back().M == doctest::Approx(b.back().M).epsilon(1e-9));
  CHECK(a.back().F == doctest::Approx(b.back().F).epsilon(1e-9));
  CHECK(a.back().M == doctest::Approx(s.M_bar).epsilon(1e-9));
  std::vector<double> t, d;
  for (const auto& x : a) {
    t.push_back(x.t);
    d.push_back(std::hypot(x.M - s.M_bar, x.F - s.F_bar));
  }
  const auto fit = fit_log_tail(t, d, 1e-10, 1e-3);
  CHECK(fit.slope < 0.0);
  CHECK(fit.r2 > 0.99);
}

TEST_CASE("boundary case decays like 1 / (1 + t / 2)") {
  // p = D = 1, u = 1/4 and M = F: M' = -2 u M^2, so M(t) = 1 / (1 + t / 2).
  const auto series = integrate_totals({1.0, 1.0}, symmetric(1.0, 1.0, 0.25), 100.0, 0.01, 100);
  for (const auto& s : series) CHECK(s.M == doctest::Approx(1.0 / (1.0 + 0.5 * s.t)).epsilon(1e-8));
}

TEST_CASE("extinction regime decays to zero") {
  const auto series = integrate_totals({1.0, 1.0}, symmetric(0.5, 1.0, 0.25), 100.0, 0.01, 1000);
  CHECK(series.back().M < 1e-10);
  CHECK(series.back().F < 1e-10);
}

TEST_CASE("birth rate and sex ratio helpers") {
  const TotalsState s{2.0, 4.0};
  CHECK(s.birth_rate(symmetric(3.0, 1.0, 1.0)) == doctest::Approx(9.0));
  CHECK(*s.sex_ratio() == doctest::Approx(0.5));
  CHECK_FALSE(TotalsState{1.0, 0.0}.sex_ratio().has_value());
}

TEST_CASE("line fits") {
  const std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
  const auto f = fit_line(x, y);
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.r2 == doctest::Approx(1.0));
  CHECK_THROWS_AS(fit_line(std::vector<double>{1, 1}, std::vector<double>{1, 2}), std::invalid_argument);
}
