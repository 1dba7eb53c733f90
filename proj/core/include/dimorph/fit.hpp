#pragma once

#include <cstddef>
#include <span>

namespace dimorph {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t n = 0;
};

/// Ordinary least squares y = intercept + slope * x. Needs at least two distinct x.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

/// Fits log(values) against t using only entries with value in (floor, ceiling].
/// Used to read exponential rates off convergence tails.
LinearFit fit_log_tail(std::span<const double> t, std::span<const double> values, double floor, double ceiling);

}  // namespace dimorph
