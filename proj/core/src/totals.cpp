#include "dimorph/totals.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <stdexcept>

#include "dimorph/error.hpp"

namespace dimorph {

const char* to_string(Regime r) { return r == Regime::persistence ? "Persistence" : "Extinction"; }

std::pair<double, double> totals_rhs(const TotalsState& s, const ConstantRates& r) {
  const double lambda = s.birth_rate(r);
  const double dM = lambda - (r.D_m + r.U_mm * s.M + r.U_mf * s.F) * s.M;
  const double dF = lambda - (r.D_f + r.U_fm * s.M + r.U_ff * s.F) * s.F;
  return {dM, dF};
}

double adaptation_sum(const ConstantRates& r) { return r.p_m / r.D_m + r.p_f / r.D_f; }

Regime classify(const ConstantRates& r) {
  validate_for_totals(r);
  return adaptation_sum(r) > 2.0 ? Regime::persistence : Regime::extinction;
}

double poly_residual(const ConstantRates& r, double M, double F) {
  const std::array<double, 5> t1 = {r.p_m * M, r.p_f * F, -2.0 * r.D_m * M, -2.0 * r.U_mm * M * M,
                                    -2.0 * r.U_mf * F * M};
  const std::array<double, 5> t2 = {r.p_m * M, r.p_f * F, -2.0 * r.D_f * F, -2.0 * r.U_fm * M * F,
                                    -2.0 * r.U_ff * F * F};
  auto rel = [](const std::array<double, 5>& t) {
    double sum = 0.0, scale = 0.0;
    for (double v : t) {
      sum += v;
      scale += std::abs(v);
    }
    return scale > 0.0 ? std::abs(sum) / scale : 0.0;
  };
  return std::max(rel(t1), rel(t2));
}

namespace {

// Per-capita residuals G1/M, G2/F and their Jacobian with respect to (log M, log F).
struct Deflated {
  std::array<double, 2> R;
  std::array<std::array<double, 2>, 2> J;
};

Deflated deflated(const ConstantRates& r, double M, double F) {
  Deflated d{};
  d.R[0] = r.p_m - 2.0 * r.D_m - 2.0 * r.U_mm * M - 2.0 * r.U_mf * F + r.p_f * F / M;
  d.R[1] = r.p_f - 2.0 * r.D_f - 2.0 * r.U_ff * F - 2.0 * r.U_fm * M + r.p_m * M / F;
  const double dR0_dM = -2.0 * r.U_mm - r.p_f * F / (M * M);
  const double dR0_dF = -2.0 * r.U_mf + r.p_f / M;
  const double dR1_dM = -2.0 * r.U_fm + r.p_m / F;
  const double dR1_dF = -2.0 * r.U_ff - r.p_m * M / (F * F);
  d.J = {{{dR0_dM * M, dR0_dF * F}, {dR1_dM * M, dR1_dF * F}}};
  return d;
}

double norm2(const std::array<double, 2>& v) { return std::hypot(v[0], v[1]); }

struct NewtonOutcome {
  bool converged;
  double M;
  double F;
  std::size_t iterations;
};

NewtonOutcome newton(const ConstantRates& r, double M, double F) {
  double u = std::log(M);
  double v = std::log(F);
  std::size_t polish = 0;
  for (std::size_t it = 0; it < 200; ++it) {
    M = std::exp(u);
    F = std::exp(v);
    if (poly_residual(r, M, F) < 1e-14) {
      // A couple of extra steps once converged only tighten the root.
      if (++polish > 2) return {true, M, F, it};
    }
    const Deflated d = deflated(r, M, F);
    const double det = d.J[0][0] * d.J[1][1] - d.J[0][1] * d.J[1][0];
    if (!std::isfinite(det) || std::abs(det) < 1e-300) break;
    double du = -(d.J[1][1] * d.R[0] - d.J[0][1] * d.R[1]) / det;
    double dv = -(-d.J[1][0] * d.R[0] + d.J[0][0] * d.R[1]) / det;
    const double cap = 2.0;
    const double big = std::max(std::abs(du), std::abs(dv));
    if (big > cap) {
      du *= cap / big;
      dv *= cap / big;
    }
    const double r0 = norm2(d.R);
    double step = 1.0;
    bool accepted = false;
    for (int k = 0; k < 40; ++k, step *= 0.5) {
      const double tu = u + step * du;
      const double tv = v + step * dv;
      const double r1 = norm2(deflated(r, std::exp(tu), std::exp(tv)).R);
      if (std::isfinite(r1) && r1 <= (1.0 - 1e-4 * step) * r0) {
        u = tu;
        v = tv;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      M = std::exp(u);
      F = std::exp(v);
      return {poly_residual(r, M, F) < 1e-12, M, F, it};
    }
  }
  M = std::exp(u);
  F = std::exp(v);
  return {poly_residual(r, M, F) < 1e-12, M, F, 200};
}

double max_per_capita_rate(const ConstantRates& r, double M, double F) {
  const double births = 0.5 * (r.p_f + r.p_m) * (1.0 + std::max(M / F, F / M));
  const double deaths = std::max(r.D_m + r.U_mm * M + r.U_mf * F, r.D_f + r.U_fm * M + r.U_ff * F);
  return births + deaths;
}

}  // namespace

RootAttempt find_positive_root(const ConstantRates& r, double M0, double F0) {
  if (!(M0 > 0.0) || !(F0 > 0.0)) throw std::invalid_argument("find_positive_root: start must be positive");
  RootAttempt out;
  NewtonOutcome n = newton(r, M0, F0);
  out.newton_iterations = n.iterations;
  if (!n.converged) {
    // The persistence-regime flow is globally attracted to the positive root; use it to
    // carry the start into Newton's basin.
    out.used_flow = true;
    TotalsState s{M0, F0};
    const double dt = 0.05 / max_per_capita_rate(r, M0, F0);
    const auto series = integrate_totals(s, r, 2000.0 * dt, dt, 2000);
    const auto& last = series.back();
    if (last.M > 0.0 && last.F > 0.0) {
      n = newton(r, last.M, last.F);
      out.newton_iterations += n.iterations;
    }
  }
  out.converged = n.converged;
  out.M = n.M;
  out.F = n.F;
  out.residual = poly_residual(r, n.M, n.F);
  return out;
}

StationaryResult stationary_point(const ConstantRates& r) {
  StationaryResult res;
  if (classify(r) == Regime::extinction) {
    res.kind = StationaryResult::Kind::extinct_only;
    return res;
  }
  const double box = std::max(r.p_m, r.p_f) / std::min({r.U_ff, r.U_fm, r.U_mf, r.U_mm});
  std::vector<RootAttempt> found;
  RootAttempt best;
  best.residual = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const double M0 = (i + 0.5) / 4.0 * box;
      const double F0 = (j + 0.5) / 4.0 * box;
      const RootAttempt a = find_positive_root(r, M0, F0);
      ++res.starts;
      if (a.residual < best.residual) best = a;
      if (a.converged && a.residual < 1e-10) found.push_back(a);
    }
  }
  if (found.empty()) {
    throw ConvergenceFailure("stationary_point: no start reached residual < 1e-10", best.M, best.F, best.residual);
  }
  res.kind = StationaryResult::Kind::persistent;
  res.starts_converged = found.size();
  res.M_bar = best.M;
  res.F_bar = best.F;
  res.residual = best.residual;
  for (const auto& a : found) {
    res.start_spread = std::max(res.start_spread, std::abs(a.M - best.M) / best.M);
    res.start_spread = std::max(res.start_spread, std::abs(a.F - best.F) / best.F);
  }
  return res;
}

UniquenessProbe probe_uniqueness(const ConstantRates& r, std::size_t n_starts, std::uint64_t seed, double box) {
  const StationaryResult ref = stationary_point(r);
  if (ref.kind != StationaryResult::Kind::persistent) {
    throw std::invalid_argument("probe_uniqueness: rates are in the extinction regime");
  }
  UniquenessProbe probe;
  probe.M_ref = ref.M_bar;
  probe.F_ref = ref.F_bar;
  if (!(box > 0.0)) box = 10.0 * std::max(ref.M_bar, ref.F_bar);
  std::mt19937_64 rng(seed);
  // Open interval (0, box]: draw from (0, 1] by flipping [0, 1).
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t k = 0; k < n_starts; ++k) {
    const double M0 = (1.0 - unit(rng)) * box;
    const double F0 = (1.0 - unit(rng)) * box;
    const RootAttempt a = find_positive_root(r, M0, F0);
    ++probe.starts;
    if (!a.converged) continue;
    ++probe.converged;
    probe.max_deviation = std::max({probe.max_deviation, std::abs(a.M - ref.M_bar), std::abs(a.F - ref.F_bar)});
    probe.max_residual = std::max(probe.max_residual, a.residual);
  }
  return probe;
}

std::vector<TotalsSample> integrate_totals(const TotalsState& s0, const ConstantRates& r, double t_end, double dt,
                                           std::size_t stride) {
  if (!(dt > 0.0) || !(t_end >= 0.0)) throw std::invalid_argument("integrate_totals: need dt > 0 and t_end >= 0");
  if (!(s0.M >= 0.0) || !(s0.F >= 0.0)) throw std::invalid_argument("integrate_totals: masses must be non-negative");
  stride = std::max<std::size_t>(stride, 1);
  const auto steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
  std::vector<TotalsSample> out;
  out.reserve(steps / stride + 2);
  double M = s0.M, F = s0.F;
  out.push_back({0.0, M, F});
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const double h = std::min(dt, t_end - t);
    auto f = [&](double m, double fm) { return totals_rhs({m, fm}, r); };
    const auto [k1m, k1f] = f(M, F);
    const auto [k2m, k2f] = f(M + 0.5 * h * k1m, F + 0.5 * h * k1f);
    const auto [k3m, k3f] = f(M + 0.5 * h * k2m, F + 0.5 * h * k2f);
    const auto [k4m, k4f] = f(M + h * k3m, F + h * k3f);
    M += h / 6.0 * (k1m + 2.0 * k2m + 2.0 * k3m + k4m);
    F += h / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f);
    M = std::max(M, 0.0);
    F = std::max(F, 0.0);
    if ((k + 1) % stride == 0 || k + 1 == steps) out.push_back({t + h, M, F});
  }
  return out;
}

}  // namespace dimorph
