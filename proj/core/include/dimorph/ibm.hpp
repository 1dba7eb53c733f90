#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "dimorph/fenwick.hpp"
#include "dimorph/kernels.hpp"
#include "dimorph/measures.hpp"
#include "dimorph/rates.hpp"

namespace dimorph {

enum class Sex : std::uint8_t { female = 0, male = 1 };

const char* to_string(Sex s);

struct Individual {
  double trait = 0.0;
  Sex sex = Sex::female;
};

/// Rates of every event class of the generator at the current state.
struct RateSummary {
  double mating_female = 0.0;  // sum of p_f over females, 0 unless both sexes are present
  double mating_male = 0.0;    // sum of p_m over males, same convention
  double natural_death_female = 0.0;
  double natural_death_male = 0.0;
  double competition_female = 0.0;
  double competition_male = 0.0;

  double mating() const { return mating_female + mating_male; }
  double death() const {
    return natural_death_female + natural_death_male + competition_female + competition_male;
  }
  double total() const { return mating() + death(); }
};

struct CacheCheck {
  /// Largest relative disagreement between cached and recomputed quantities.
  double max_relative_error = 0.0;
  bool ok = true;
};

/// Finite population at scale N: the empirical measure is (1/N) sum of unit atoms.
/// Keeps Fenwick trees of mating capability and death rate per sex so that event
/// selection is O(log n). Competition is (1/N) sum_j U(x_i, w_j) with the self term
/// included. When every U is constant the competition part is carried per sex in closed
/// form; otherwise each individual's load is maintained incrementally.
class ScaledPopulation {
 public:
  ScaledPopulation(RateSet rates, std::size_t N);

  std::size_t scale() const { return N_; }
  const RateSet& rates() const { return rates_; }
  bool constant_competition() const { return constant_u_; }

  std::size_t count(Sex s) const { return group(s).trait.size(); }
  std::size_t size() const { return count(Sex::female) + count(Sex::male); }
  double trait(Sex s, std::size_t i) const { return group(s).trait[i]; }
  std::span<const double> traits(Sex s) const { return group(s).trait; }
  std::vector<Individual> individuals() const;

  void add(Sex s, double trait);
  void remove(Sex s, std::size_t i);

  double sum_p(Sex s) const { return group(s).p_tree.total(); }
  /// Death rate of individual i: D(x_i) + competition load.
  double death_rate(Sex s, std::size_t i) const;
  /// Competition load (1/N) sum_j U(x_i, w_j) of individual i.
  double competition_load(Sex s, std::size_t i) const;

  RateSummary event_rates() const;

  /// Index drawn with probability proportional to p within sex s; uniform when all p are 0.
  std::size_t draw_partner(Sex s, Rng& rng) const;
  /// Index drawn proportionally to the natural-death part (constant competition) or to
  /// the full death rate (general competition).
  std::size_t draw_death_tree(Sex s, Rng& rng) const;

  /// Compares every cached sum and load with a full recomputation.
  CacheCheck verify_caches(double rel_tol = 1e-9) const;

  /// Empirical measures (1/N per individual) binned onto grid.
  GridMeasure binned(Sex s, const TraitGrid& grid) const;

 private:
  struct Group {
    std::vector<double> trait;
    std::vector<double> p;
    std::vector<double> D;
    std::vector<double> load;  // used only for trait-dependent competition
    FenwickTree p_tree;
    FenwickTree death_tree;
    std::size_t mutations = 0;
  };

  Group& group(Sex s) { return groups_[static_cast<int>(s)]; }
  const Group& group(Sex s) const { return groups_[static_cast<int>(s)]; }
  const CompetitionRate& U(Sex a, Sex b) const;
  double constant_load(Sex s) const;
  void ensure_capacity(Group& g);
  void refresh_death_tree(Group& g);

  RateSet rates_;
  std::size_t N_;
  bool constant_u_;
  double u_const_[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
  Group groups_[2];
};

RateSummary event_rates(const ScaledPopulation& pop);

struct Event {
  enum class Kind { mating, death };
  Kind kind = Kind::death;
  /// Death: the sex and index removed. Mating: the initiating parent.
  Sex sex = Sex::female;
  std::size_t index = 0;
  /// Mating only: partner index (opposite sex), newborn and clamping flag.
  std::size_t partner = 0;
  Individual newborn;
  bool clamped = false;
};

/// One Gillespie step: draws the waiting time and the event, and applies it.
/// Newborn traits are clamped into [grid.x_min(), grid.x_max()].
/// Throws ExtinctPopulation when the total rate is 0.
std::pair<double, Event> step(ScaledPopulation& pop, const InheritanceKernel& kernel, const TraitGrid& grid,
                              Rng& rng);

enum class InitMode { quantile, sample };

struct IbmParams {
  RateSet rates;
  InheritanceKernel kernel;
  TraitGrid grid;
  std::size_t N = 1000;
  double t_end = 1.0;
  std::vector<double> sample_times;
  std::uint64_t seed = 1;
  /// Initial male and female measures; round(N * mass) individuals of each sex.
  GridMeasure male0;
  GridMeasure female0;
  InitMode init = InitMode::quantile;
};

struct IbmSnapshot {
  double t = 0.0;
  GridMeasure male;
  GridMeasure female;
  std::size_t n_male = 0;
  std::size_t n_female = 0;
};

struct IbmTrajectory {
  std::vector<IbmSnapshot> snapshots;
  std::uint64_t events = 0;
  std::uint64_t births = 0;
  std::uint64_t births_female = 0;
  std::uint64_t deaths = 0;
  std::uint64_t clamped = 0;
  std::size_t initial_count = 0;
  std::size_t final_count = 0;
  bool extinct = false;
  std::optional<double> extinction_time;
  double final_time = 0.0;
};

/// Places round(N * mass(m)) individuals of one sex. Quantile mode puts the k-th
/// individual at the (k + 1/2)/n quantile of m (uniform within cells); sample mode
/// draws positions from m.
std::vector<double> initial_traits(const GridMeasure& m, std::size_t N, InitMode mode, Rng& rng);

/// Runs the event loop to t_end, recording binned snapshots at sample_times.
/// An empty population ends the run with an extinction marker; a non-empty population
/// with no possible event is frozen for the remaining samples.
IbmTrajectory simulate(const IbmParams& params);

/// Seed of replica `replica` at scale N, derived from a base seed.
std::uint64_t replica_seed(std::uint64_t base, std::size_t N, std::size_t replica);

}  // namespace dimorph
