#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace dimorph {

/// A per-capita rate that is either a constant or a function of the trait.
class TraitRate {
 public:
  TraitRate(double value = 0.0) : constant_(value) {}  // NOLINT(google-explicit-constructor)
  explicit TraitRate(std::function<double(double)> fn) : fn_(std::move(fn)) {}

  double operator()(double x) const { return fn_ ? fn_(x) : constant_; }
  bool is_constant() const { return !fn_; }
  /// Value of a constant rate; nullopt for trait-dependent ones.
  std::optional<double> constant() const {
    if (fn_) return std::nullopt;
    return constant_;
  }

 private:
  double constant_ = 0.0;
  std::function<double(double)> fn_;
};

/// Competition kernel U(x, y): rate at which an individual of trait x loses against one of trait y.
class CompetitionRate {
 public:
  CompetitionRate(double value = 0.0) : constant_(value) {}  // NOLINT(google-explicit-constructor)
  explicit CompetitionRate(std::function<double(double, double)> fn) : fn_(std::move(fn)) {}

  double operator()(double x, double y) const { return fn_ ? fn_(x, y) : constant_; }
  bool is_constant() const { return !fn_; }
  std::optional<double> constant() const {
    if (fn_) return std::nullopt;
    return constant_;
  }

 private:
  double constant_ = 0.0;
  std::function<double(double, double)> fn_;
};

/// Demographic rates of both sexes. U_ab is the loss rate of sex a against sex b
/// (U_mf: males losing to females).
struct RateSet {
  TraitRate p_f;
  TraitRate p_m;
  TraitRate D_f;
  TraitRate D_m;
  CompetitionRate U_ff;
  CompetitionRate U_fm;
  CompetitionRate U_mf;
  CompetitionRate U_mm;

  bool all_constant() const;

  /// Symmetric constant rates: p for both sexes, death D, every competition kernel u.
  static RateSet symmetric(double p, double D, double u);
};

/// Plain-number view of a constant RateSet.
struct ConstantRates {
  double p_f, p_m, D_f, D_m, U_ff, U_fm, U_mf, U_mm;
};

/// Throws std::invalid_argument when any rate is trait-dependent.
ConstantRates constant_rates(const RateSet& r);

/// Names of the fields violating D > 0, U > 0, p >= 0, p_f + p_m > 0 (empty when valid).
std::vector<std::string> totals_violations(const ConstantRates& r);

/// Throws std::invalid_argument naming the first violation of totals_violations.
void validate_for_totals(const ConstantRates& r);

}  // namespace dimorph
