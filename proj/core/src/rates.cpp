#include "dimorph/rates.hpp"

#include <cmath>
#include <stdexcept>

namespace dimorph {

bool RateSet::all_constant() const {
  return p_f.is_constant() && p_m.is_constant() && D_f.is_constant() && D_m.is_constant() && U_ff.is_constant() &&
         U_fm.is_constant() && U_mf.is_constant() && U_mm.is_constant();
}

RateSet RateSet::symmetric(double p, double D, double u) {
  return RateSet{p, p, D, D, u, u, u, u};
}

ConstantRates constant_rates(const RateSet& r) {
  if (!r.all_constant()) throw std::invalid_argument("constant rates required; got trait-dependent rates");
  return ConstantRates{*r.p_f.constant(),  *r.p_m.constant(),  *r.D_f.constant(),  *r.D_m.constant(),
                       *r.U_ff.constant(), *r.U_fm.constant(), *r.U_mf.constant(), *r.U_mm.constant()};
}

std::vector<std::string> totals_violations(const ConstantRates& r) {
  std::vector<std::string> bad;
  auto positive = [&](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) bad.emplace_back(name);
  };
  auto non_negative = [&](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) bad.emplace_back(name);
  };
  non_negative(r.p_f, "p_f");
  non_negative(r.p_m, "p_m");
  positive(r.D_f, "D_f");
  positive(r.D_m, "D_m");
  positive(r.U_ff, "U_ff");
  positive(r.U_fm, "U_fm");
  positive(r.U_mf, "U_mf");
  positive(r.U_mm, "U_mm");
  if (bad.empty() && !(r.p_f + r.p_m > 0.0)) bad.emplace_back("p_f + p_m");
  return bad;
}

void validate_for_totals(const ConstantRates& r) {
  const auto bad = totals_violations(r);
  if (!bad.empty()) {
    throw std::invalid_argument("invalid rate " + bad.front() +
                                ": need D > 0, U > 0, p >= 0 and p_f + p_m > 0");
  }
}

}  // namespace dimorph
