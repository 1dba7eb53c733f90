#include "dimorph/ibm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dimorph/error.hpp"

namespace dimorph {

namespace {

constexpr std::size_t kRebuildEvery = 1u << 16;

Sex other(Sex s) { return s == Sex::female ? Sex::male : Sex::female; }

double rel_err(double cached, double exact) {
  const double scale = std::max({std::abs(cached), std::abs(exact), 1e-300});
  return std::abs(cached - exact) / scale;
}

}  // namespace

const char* to_string(Sex s) { return s == Sex::female ? "female" : "male"; }

ScaledPopulation::ScaledPopulation(RateSet rates, std::size_t N) : rates_(std::move(rates)), N_(N) {
  if (N_ == 0) throw std::invalid_argument("ScaledPopulation: N must be positive");
  constant_u_ = rates_.U_ff.is_constant() && rates_.U_fm.is_constant() && rates_.U_mf.is_constant() &&
                rates_.U_mm.is_constant();
  if (constant_u_) {
    for (Sex a : {Sex::female, Sex::male}) {
      for (Sex b : {Sex::female, Sex::male}) {
        u_const_[static_cast<int>(a)][static_cast<int>(b)] = *U(a, b).constant();
      }
    }
  }
  for (auto& g : groups_) {
    g.p_tree.reset(16);
    g.death_tree.reset(16);
  }
}

const CompetitionRate& ScaledPopulation::U(Sex a, Sex b) const {
  if (a == Sex::female) return b == Sex::female ? rates_.U_ff : rates_.U_fm;
  return b == Sex::female ? rates_.U_mf : rates_.U_mm;
}

double ScaledPopulation::constant_load(Sex s) const {
  const int i = static_cast<int>(s);
  return (u_const_[i][0] * static_cast<double>(count(Sex::female)) +
          u_const_[i][1] * static_cast<double>(count(Sex::male))) /
         static_cast<double>(N_);
}

std::vector<Individual> ScaledPopulation::individuals() const {
  std::vector<Individual> out;
  out.reserve(size());
  for (Sex s : {Sex::female, Sex::male}) {
    for (double x : group(s).trait) out.push_back({x, s});
  }
  return out;
}

void ScaledPopulation::ensure_capacity(Group& g) {
  if (g.trait.size() < g.p_tree.capacity()) return;
  const std::size_t cap = std::max<std::size_t>(16, 2 * g.p_tree.capacity());
  g.p_tree.rebuild(cap);
  g.death_tree.rebuild(cap);
}

void ScaledPopulation::refresh_death_tree(Group& g) {
  for (std::size_t i = 0; i < g.trait.size(); ++i) g.death_tree.assign_raw(i, g.D[i] + g.load[i]);
  g.death_tree.rebuild(g.death_tree.capacity());
}

void ScaledPopulation::add(Sex s, double trait) {
  Group& g = group(s);
  ensure_capacity(g);
  const std::size_t i = g.trait.size();
  const double p = s == Sex::female ? rates_.p_f(trait) : rates_.p_m(trait);
  const double D = s == Sex::female ? rates_.D_f(trait) : rates_.D_m(trait);
  if (!(p >= 0.0) || !(D >= 0.0) || !std::isfinite(p) || !std::isfinite(D)) {
    throw std::invalid_argument("ScaledPopulation: rates must be finite and non-negative");
  }
  g.trait.push_back(trait);
  g.p.push_back(p);
  g.D.push_back(D);
  g.p_tree.set(i, p);
  ++g.mutations;
  if (constant_u_) {
    g.load.push_back(0.0);
    g.death_tree.set(i, D);
    return;
  }
  const double invN = 1.0 / static_cast<double>(N_);
  double own = 0.0;
  for (Sex t : {Sex::female, Sex::male}) {
    Group& h = group(t);
    const CompetitionRate& into = U(t, s);
    const CompetitionRate& from = U(s, t);
    for (std::size_t j = 0; j < h.trait.size(); ++j) {
      if (t == s && j == i) continue;
      h.load[j] += into(h.trait[j], trait) * invN;
      own += from(trait, h.trait[j]) * invN;
    }
  }
  own += U(s, s)(trait, trait) * invN;
  g.load.push_back(own);
  refresh_death_tree(group(Sex::female));
  refresh_death_tree(group(Sex::male));
}

void ScaledPopulation::remove(Sex s, std::size_t i) {
  Group& g = group(s);
  if (i >= g.trait.size()) throw std::out_of_range("ScaledPopulation::remove: index out of range");
  const double trait = g.trait[i];
  const std::size_t last = g.trait.size() - 1;
  if (i != last) {
    g.trait[i] = g.trait[last];
    g.p[i] = g.p[last];
    g.D[i] = g.D[last];
    g.load[i] = g.load[last];
    g.p_tree.set(i, g.p[i]);
    g.death_tree.set(i, g.D[i] + (constant_u_ ? 0.0 : g.load[i]));
  }
  g.p_tree.set(last, 0.0);
  g.death_tree.set(last, 0.0);
  g.trait.pop_back();
  g.p.pop_back();
  g.D.pop_back();
  g.load.pop_back();
  ++g.mutations;

  if (!constant_u_) {
    const double invN = 1.0 / static_cast<double>(N_);
    for (Sex t : {Sex::female, Sex::male}) {
      Group& h = group(t);
      const CompetitionRate& into = U(t, s);
      for (std::size_t j = 0; j < h.trait.size(); ++j) h.load[j] -= into(h.trait[j], trait) * invN;
    }
    refresh_death_tree(group(Sex::female));
    refresh_death_tree(group(Sex::male));
  }

  // Cancellation in running sums is bounded by periodic rebuilds and by clearing empty groups.
  if (g.trait.empty()) {
    g.p_tree.reset(g.p_tree.capacity());
    g.death_tree.reset(g.death_tree.capacity());
  } else if (g.mutations % kRebuildEvery == 0) {
    g.p_tree.rebuild(g.p_tree.capacity());
    g.death_tree.rebuild(g.death_tree.capacity());
  }
}

double ScaledPopulation::competition_load(Sex s, std::size_t i) const {
  return constant_u_ ? constant_load(s) : group(s).load[i];
}

double ScaledPopulation::death_rate(Sex s, std::size_t i) const { return group(s).D[i] + competition_load(s, i); }

RateSummary ScaledPopulation::event_rates() const {
  RateSummary r;
  const bool both = count(Sex::female) > 0 && count(Sex::male) > 0;
  if (both) {
    r.mating_female = sum_p(Sex::female);
    r.mating_male = sum_p(Sex::male);
  }
  if (constant_u_) {
    r.natural_death_female = group(Sex::female).death_tree.total();
    r.natural_death_male = group(Sex::male).death_tree.total();
    r.competition_female = static_cast<double>(count(Sex::female)) * constant_load(Sex::female);
    r.competition_male = static_cast<double>(count(Sex::male)) * constant_load(Sex::male);
  } else {
    // The death trees hold D + load; split them for reporting.
    double df = 0.0, dm = 0.0;
    for (double d : group(Sex::female).D) df += d;
    for (double d : group(Sex::male).D) dm += d;
    r.natural_death_female = df;
    r.natural_death_male = dm;
    r.competition_female = std::max(0.0, group(Sex::female).death_tree.total() - df);
    r.competition_male = std::max(0.0, group(Sex::male).death_tree.total() - dm);
  }
  return r;
}

RateSummary event_rates(const ScaledPopulation& pop) { return pop.event_rates(); }

std::size_t ScaledPopulation::draw_partner(Sex s, Rng& rng) const {
  const Group& g = group(s);
  const std::size_t n = g.trait.size();
  if (n == 0) throw std::logic_error("draw_partner: empty sex class");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double total = g.p_tree.total();
  if (!(total > 0.0)) {
    return std::min(n - 1, static_cast<std::size_t>(unit(rng) * static_cast<double>(n)));
  }
  for (;;) {
    const std::size_t i = g.p_tree.find(unit(rng) * total);
    if (i < n && g.p[i] > 0.0) return i;
  }
}

std::size_t ScaledPopulation::draw_death_tree(Sex s, Rng& rng) const {
  const Group& g = group(s);
  const std::size_t n = g.trait.size();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double total = g.death_tree.total();
  for (;;) {
    const std::size_t i = g.death_tree.find(unit(rng) * total);
    if (i < n && g.death_tree.value(i) > 0.0) return i;
  }
}

CacheCheck ScaledPopulation::verify_caches(double rel_tol) const {
  CacheCheck c;
  auto note = [&](double cached, double exact) {
    const double e = rel_err(cached, exact);
    c.max_relative_error = std::max(c.max_relative_error, e);
  };
  const double invN = 1.0 / static_cast<double>(N_);
  for (Sex s : {Sex::female, Sex::male}) {
    const Group& g = group(s);
    double p_sum = 0.0, d_sum = 0.0;
    double prefix = 0.0;
    for (std::size_t i = 0; i < g.trait.size(); ++i) {
      const double p = s == Sex::female ? rates_.p_f(g.trait[i]) : rates_.p_m(g.trait[i]);
      const double D = s == Sex::female ? rates_.D_f(g.trait[i]) : rates_.D_m(g.trait[i]);
      note(g.p[i], p);
      note(g.D[i], D);
      double load = 0.0;
      if (!constant_u_) {
        for (Sex t : {Sex::female, Sex::male}) {
          const CompetitionRate& u = U(s, t);
          for (double y : group(t).trait) load += u(g.trait[i], y) * invN;
        }
        note(g.load[i], load);
      }
      p_sum += p;
      d_sum += D + load;
      prefix += p;
      if ((i & 63) == 0 || i + 1 == g.trait.size()) note(g.p_tree.prefix(i + 1), prefix);
    }
    note(g.p_tree.total(), p_sum);
    note(g.death_tree.total(), d_sum);
    if (g.trait.size() > 0) note(g.p_tree.prefix(g.p_tree.capacity()), p_sum);
  }
  c.ok = c.max_relative_error <= rel_tol;
  return c;
}

GridMeasure ScaledPopulation::binned(Sex s, const TraitGrid& grid) const {
  GridMeasure m(grid);
  auto& w = m.mutable_weights();
  const double invN = 1.0 / static_cast<double>(N_);
  for (double x : group(s).trait) w[grid.cell_of(x)] += invN;
  return m;
}

std::pair<double, Event> step(ScaledPopulation& pop, const InheritanceKernel& kernel, const TraitGrid& grid,
                              Rng& rng) {
  const RateSummary r = pop.event_rates();
  const double total = r.total();
  if (!(total > 0.0)) throw ExtinctPopulation("step: total event rate is zero");
  std::exponential_distribution<double> wait(total);
  const double dt = wait(rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double u = unit(rng) * total;

  Event ev;
  const double classes[6] = {r.mating_female,        r.mating_male,       r.natural_death_female,
                             r.natural_death_male,   r.competition_female, r.competition_male};
  std::size_t cls = 0;
  for (; cls < 5; ++cls) {
    if (u < classes[cls] && classes[cls] > 0.0) break;
    u -= classes[cls];
  }
  while (!(classes[cls] > 0.0)) --cls;  // rounding at the top end

  if (cls <= 1) {
    const Sex initiator = cls == 0 ? Sex::female : Sex::male;
    const Sex partner = other(initiator);
    ev.kind = Event::Kind::mating;
    ev.sex = initiator;
    ev.index = pop.draw_partner(initiator, rng);
    ev.partner = pop.draw_partner(partner, rng);
    const double x = pop.trait(initiator, ev.index);
    const double y = pop.trait(partner, ev.partner);
    const double xf = initiator == Sex::female ? x : y;
    const double xm = initiator == Sex::female ? y : x;
    double z = kernel.sample(xf, xm, rng);
    if (z < grid.x_min() || z > grid.x_max() || !std::isfinite(z)) {
      z = std::clamp(std::isfinite(z) ? z : (xf + xm) / 2, grid.x_min(), grid.x_max());
      ev.clamped = true;
    }
    const Sex child = unit(rng) < 0.5 ? Sex::female : Sex::male;
    ev.newborn = {z, child};
    pop.add(child, z);
  } else {
    ev.kind = Event::Kind::death;
    const Sex s = (cls == 2 || cls == 4) ? Sex::female : Sex::male;
    ev.sex = s;
    if (cls <= 3) {
      ev.index = pop.draw_death_tree(s, rng);
    } else {
      const std::size_t n = pop.count(s);
      ev.index = std::min(n - 1, static_cast<std::size_t>(unit(rng) * static_cast<double>(n)));
    }
    pop.remove(s, ev.index);
  }
  return {dt, ev};
}

std::vector<double> initial_traits(const GridMeasure& m, std::size_t N, InitMode mode, Rng& rng) {
  const double mass = total_mass(m);
  const auto n = static_cast<std::size_t>(std::llround(static_cast<double>(N) * mass));
  std::vector<double> out;
  if (n == 0) return out;
  out.reserve(n);
  const auto& grid = m.grid();
  const auto w = m.weights();
  std::vector<double> cum(w.size() + 1, 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) cum[i + 1] = cum[i] + w[i];
  auto quantile = [&](double q) {
    const double target = q * cum.back();
    auto it = std::upper_bound(cum.begin() + 1, cum.end(), target);
    std::size_t cell = static_cast<std::size_t>(std::distance(cum.begin() + 1, it));
    cell = std::min(cell, w.size() - 1);
    while (w[cell] <= 0.0 && cell > 0) --cell;
    const double frac = w[cell] > 0.0 ? std::clamp((target - cum[cell]) / w[cell], 0.0, 1.0) : 0.5;
    return grid.edge(cell) + frac * grid.dx();
  };
  if (mode == InitMode::quantile) {
    for (std::size_t k = 0; k < n; ++k) out.push_back(quantile((static_cast<double>(k) + 0.5) / static_cast<double>(n)));
  } else {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t k = 0; k < n; ++k) out.push_back(quantile(unit(rng)));
  }
  return out;
}

std::uint64_t replica_seed(std::uint64_t base, std::size_t N, std::size_t replica) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(N), static_cast<std::uint32_t>(replica)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

IbmTrajectory simulate(const IbmParams& params) {
  if (!(params.t_end > 0.0)) throw std::invalid_argument("simulate: t_end must be positive");
  if (!std::is_sorted(params.sample_times.begin(), params.sample_times.end())) {
    throw std::invalid_argument("simulate: sample_times must be sorted");
  }
  for (double t : params.sample_times) {
    if (t < 0.0 || t > params.t_end) throw std::invalid_argument("simulate: sample_times must lie in [0, t_end]");
  }
  if (!(params.male0.grid() == params.grid) || !(params.female0.grid() == params.grid)) {
    throw GridMismatch("simulate: initial measures must live on the simulation grid");
  }

  Rng rng(params.seed);
  ScaledPopulation pop(params.rates, params.N);
  for (double x : initial_traits(params.female0, params.N, params.init, rng)) pop.add(Sex::female, x);
  for (double x : initial_traits(params.male0, params.N, params.init, rng)) pop.add(Sex::male, x);
  if (pop.size() == 0) throw std::invalid_argument("simulate: initial population is empty");

  IbmTrajectory traj;
  traj.initial_count = pop.size();
  std::size_t next_sample = 0;
  auto record_until = [&](double t_limit, bool inclusive) {
    while (next_sample < params.sample_times.size() &&
           (inclusive ? params.sample_times[next_sample] <= t_limit : params.sample_times[next_sample] < t_limit)) {
      traj.snapshots.push_back({params.sample_times[next_sample], pop.binned(Sex::male, params.grid),
                                pop.binned(Sex::female, params.grid), pop.count(Sex::male),
                                pop.count(Sex::female)});
      ++next_sample;
    }
  };

  double t = 0.0;
  for (;;) {
    if (pop.size() == 0) {
      traj.extinct = true;
      traj.extinction_time = t;
      record_until(t, true);  // samples at exactly the extinction time still see the empty state
      break;
    }
    if (!(pop.event_rates().total() > 0.0)) {
      record_until(params.t_end, true);
      t = params.t_end;
      break;
    }
    // Peek the waiting time without applying the event if it overshoots t_end.
    Rng probe = rng;
    std::exponential_distribution<double> wait(pop.event_rates().total());
    const double dt = wait(probe);
    if (t + dt > params.t_end) {
      record_until(params.t_end, true);
      t = params.t_end;
      break;
    }
    record_until(t + dt, false);
    const auto [dt_taken, ev] = step(pop, params.kernel, params.grid, rng);
    t += dt_taken;
    ++traj.events;
    if (ev.kind == Event::Kind::mating) {
      ++traj.births;
      if (ev.newborn.sex == Sex::female) ++traj.births_female;
      if (ev.clamped) ++traj.clamped;
    } else {
      ++traj.deaths;
    }
  }
  traj.final_count = pop.size();
  traj.final_time = t;
  return traj;
}

}  // namespace dimorph
