#include "dimorph/kernels.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "dimorph/error.hpp"

namespace dimorph {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Probability of (lo, hi] under h, keeping precision in both Gaussian tails.
double interval_prob(const NoiseDensity& h, double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  if (const auto* g = std::get_if<NoiseDensity::Gaussian>(&h.law())) {
    const double a = lo / (g->sigma * kSqrt2);
    const double b = hi / (g->sigma * kSqrt2);
    const double p = (a >= 0.0) ? 0.5 * (std::erfc(a) - std::erfc(b)) : 0.5 * (std::erfc(-b) - std::erfc(-a));
    return std::max(p, 0.0);
  }
  return std::max(h.cdf(hi) - h.cdf(lo), 0.0);
}

KernelRow finish_row(const TraitGrid& grid, std::vector<double> w, const char* what) {
  double sum = 0.0;
  for (double v : w) sum += v;
  if (!(sum > 1e-300)) {
    throw DegenerateRow(std::string(what) + ": offspring law puts no mass on the grid");
  }
  for (double& v : w) v /= sum;
  return KernelRow{GridMeasure(grid, std::move(w)), std::max(0.0, 1.0 - sum)};
}

}  // namespace

// ---------------------------------------------------------------------------
// NoiseDensity

NoiseDensity NoiseDensity::gaussian(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("gaussian noise: sigma must be > 0");
  return NoiseDensity(Gaussian{sigma});
}

NoiseDensity NoiseDensity::uniform(double lo, double hi) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw std::invalid_argument("uniform noise: need finite lo < hi");
  }
  return NoiseDensity(Uniform{lo, hi});
}

NoiseDensity NoiseDensity::tabulated(std::vector<double> z, std::vector<double> density) {
  if (z.size() < 2 || z.size() != density.size()) {
    throw std::invalid_argument("tabulated noise: need at least two (z, density) nodes");
  }
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!(density[i] >= 0.0) || !std::isfinite(density[i])) {
      throw std::invalid_argument("tabulated noise: densities must be finite and non-negative");
    }
    if (i > 0 && !(z[i] > z[i - 1])) throw std::invalid_argument("tabulated noise: z must be strictly increasing");
  }
  std::vector<double> cdf(z.size(), 0.0);
  for (std::size_t i = 1; i < z.size(); ++i) {
    cdf[i] = cdf[i - 1] + 0.5 * (density[i] + density[i - 1]) * (z[i] - z[i - 1]);
  }
  const double total = cdf.back();
  if (!(total > 0.0)) throw std::invalid_argument("tabulated noise: density integrates to zero");
  for (auto& d : density) d /= total;
  for (auto& c : cdf) c /= total;
  return NoiseDensity(Tabulated{std::move(z), std::move(density), std::move(cdf)});
}

double NoiseDensity::pdf(double z) const {
  return std::visit(overloaded{
                        [z](const Gaussian& g) {
                          const double u = z / g.sigma;
                          return std::exp(-0.5 * u * u) / (g.sigma * std::sqrt(2.0 * M_PI));
                        },
                        [z](const Uniform& u) { return (z >= u.lo && z <= u.hi) ? 1.0 / (u.hi - u.lo) : 0.0; },
                        [z](const Tabulated& t) {
                          if (z < t.z.front() || z > t.z.back()) return 0.0;
                          const auto it = std::upper_bound(t.z.begin(), t.z.end(), z);
                          const std::size_t k = std::min<std::size_t>(it - t.z.begin(), t.z.size() - 1) - 1;
                          const double s = (z - t.z[k]) / (t.z[k + 1] - t.z[k]);
                          return t.density[k] + s * (t.density[k + 1] - t.density[k]);
                        },
                    },
                    law_);
}

double NoiseDensity::cdf(double z) const {
  return std::visit(overloaded{
                        [z](const Gaussian& g) { return 0.5 * std::erfc(-z / (g.sigma * kSqrt2)); },
                        [z](const Uniform& u) { return std::clamp((z - u.lo) / (u.hi - u.lo), 0.0, 1.0); },
                        [z](const Tabulated& t) {
                          if (z <= t.z.front()) return 0.0;
                          if (z >= t.z.back()) return 1.0;
                          const auto it = std::upper_bound(t.z.begin(), t.z.end(), z);
                          const std::size_t k = static_cast<std::size_t>(it - t.z.begin()) - 1;
                          const double h = t.z[k + 1] - t.z[k];
                          const double u = z - t.z[k];
                          const double slope = (t.density[k + 1] - t.density[k]) / h;
                          return t.cdf[k] + t.density[k] * u + 0.5 * slope * u * u;
                        },
                    },
                    law_);
}

double NoiseDensity::mean() const {
  return std::visit(overloaded{
                        [](const Gaussian&) { return 0.0; },
                        [](const Uniform& u) { return 0.5 * (u.lo + u.hi); },
                        [](const Tabulated& t) {
                          double acc = 0.0;
                          for (std::size_t k = 0; k + 1 < t.z.size(); ++k) {
                            const double h = t.z[k + 1] - t.z[k];
                            const double s = (t.density[k + 1] - t.density[k]) / h;
                            const double a = t.z[k];
                            const double d = t.density[k];
                            acc += a * d * h + a * s * h * h / 2 + d * h * h / 2 + s * h * h * h / 3;
                          }
                          return acc;
                        },
                    },
                    law_);
}

double NoiseDensity::second_moment() const {
  return std::visit(overloaded{
                        [](const Gaussian& g) { return g.sigma * g.sigma; },
                        [](const Uniform& u) { return (u.lo * u.lo + u.lo * u.hi + u.hi * u.hi) / 3.0; },
                        [](const Tabulated& t) {
                          double acc = 0.0;
                          for (std::size_t k = 0; k + 1 < t.z.size(); ++k) {
                            const double h = t.z[k + 1] - t.z[k];
                            const double s = (t.density[k + 1] - t.density[k]) / h;
                            const double a = t.z[k];
                            const double d = t.density[k];
                            acc += d * (a * a * h + a * h * h + h * h * h / 3) +
                                   s * (a * a * h * h / 2 + 2 * a * h * h * h / 3 + h * h * h * h / 4);
                          }
                          return acc;
                        },
                    },
                    law_);
}

double NoiseDensity::support_lo() const {
  return std::visit(overloaded{
                        [](const Gaussian&) { return -std::numeric_limits<double>::infinity(); },
                        [](const Uniform& u) { return u.lo; },
                        [](const Tabulated& t) { return t.z.front(); },
                    },
                    law_);
}

double NoiseDensity::support_hi() const {
  return std::visit(overloaded{
                        [](const Gaussian&) { return std::numeric_limits<double>::infinity(); },
                        [](const Uniform& u) { return u.hi; },
                        [](const Tabulated& t) { return t.z.back(); },
                    },
                    law_);
}

double NoiseDensity::sample(Rng& rng) const {
  return std::visit(overloaded{
                        [&rng](const Gaussian& g) { return std::normal_distribution<double>(0.0, g.sigma)(rng); },
                        [&rng](const Uniform& u) { return std::uniform_real_distribution<double>(u.lo, u.hi)(rng); },
                        [&rng](const Tabulated& t) {
                          const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
                          auto it = std::upper_bound(t.cdf.begin(), t.cdf.end(), u);
                          std::size_t k = static_cast<std::size_t>(it - t.cdf.begin());
                          k = std::clamp<std::size_t>(k, 1, t.z.size() - 1) - 1;
                          const double h = t.z[k + 1] - t.z[k];
                          const double slope = (t.density[k + 1] - t.density[k]) / h;
                          const double r = u - t.cdf[k];
                          const double d = t.density[k];
                          // Solve d*s + slope*s^2/2 = r for s in [0, h].
                          const double disc = std::max(d * d + 2.0 * slope * r, 0.0);
                          const double denom = d + std::sqrt(disc);
                          const double s = denom > 0.0 ? 2.0 * r / denom : 0.0;
                          return t.z[k] + std::clamp(s, 0.0, h);
                        },
                    },
                    law_);
}

std::string NoiseDensity::describe() const {
  std::ostringstream os;
  std::visit(overloaded{
                 [&os](const Gaussian& g) { os << "gaussian(sigma=" << g.sigma << ")"; },
                 [&os](const Uniform& u) { os << "uniform(" << u.lo << ", " << u.hi << ")"; },
                 [&os](const Tabulated& t) { os << "tabulated(" << t.z.size() << " nodes)"; },
             },
             law_);
  return os.str();
}

// ---------------------------------------------------------------------------
// InheritanceKernel

InheritanceKernel InheritanceKernel::additive(NoiseDensity h) {
  if (std::abs(h.mean()) > 1e-9) throw std::invalid_argument("additive kernel: noise must have zero mean");
  InheritanceKernel k;
  k.family_ = Family::additive;
  k.name_ = "additive " + h.describe();
  k.noise_ = std::make_shared<const NoiseDensity>(std::move(h));
  return k;
}

InheritanceKernel InheritanceKernel::multiplicative(NoiseDensity h) {
  if (h.support_lo() < -1e-12 || h.support_hi() > 1.0 + 1e-12) {
    throw std::invalid_argument("multiplicative kernel: noise must be supported in [0, 1]");
  }
  if (std::abs(h.mean() - 0.5) > 1e-9) throw std::invalid_argument("multiplicative kernel: noise mean must be 1/2");
  InheritanceKernel k;
  k.family_ = Family::multiplicative;
  k.name_ = "multiplicative " + h.describe();
  k.noise_ = std::make_shared<const NoiseDensity>(std::move(h));
  return k;
}

InheritanceKernel InheritanceKernel::from_density(DensityFn density, TraitGrid resolution, std::string name) {
  if (!density) throw std::invalid_argument("from_density: empty density function");
  InheritanceKernel k;
  k.family_ = Family::density;
  k.name_ = std::move(name);
  k.density_ = std::move(density);
  k.resolution_ = std::make_shared<const TraitGrid>(resolution);
  return k;
}

InheritanceKernel InheritanceKernel::sampling_only(SamplerFn sampler, std::string name) {
  if (!sampler) throw std::invalid_argument("sampling_only: empty sampler");
  InheritanceKernel k;
  k.family_ = Family::sampling_only;
  k.name_ = std::move(name);
  k.sampler_ = std::move(sampler);
  return k;
}

const NoiseDensity& InheritanceKernel::noise() const {
  if (!noise_) throw UnsupportedKernel("kernel '" + name_ + "' has no noise density");
  return *noise_;
}

KernelRow InheritanceKernel::density_row(double x, double y, const TraitGrid& grid) const {
  const std::size_t n = grid.size();
  std::vector<double> w(n, 0.0);
  switch (family_) {
    case Family::additive: {
      const double c = 0.5 * (x + y);
      for (std::size_t i = 0; i < n; ++i) w[i] = interval_prob(*noise_, grid.edge(i) - c, grid.edge(i + 1) - c);
      return finish_row(grid, std::move(w), "density_row");
    }
    case Family::multiplicative: {
      const double s = x + y;
      if (!(s > 0.0)) {
        if (!grid.contains(0.0)) throw DegenerateRow("density_row: offspring trait 0 lies outside the grid");
        w[grid.cell_of(0.0)] = 1.0;
        return KernelRow{GridMeasure(grid, std::move(w)), 0.0};
      }
      for (std::size_t i = 0; i < n; ++i) w[i] = interval_prob(*noise_, grid.edge(i) / s, grid.edge(i + 1) / s);
      return finish_row(grid, std::move(w), "density_row");
    }
    case Family::density: {
      for (std::size_t i = 0; i < n; ++i) w[i] = std::max(0.0, density_(x, y, grid.center(i))) * grid.dx();
      return finish_row(grid, std::move(w), "density_row");
    }
    case Family::sampling_only:
      break;
  }
  throw UnsupportedKernel("density_row: kernel '" + name_ + "' is sampling-only");
}

double InheritanceKernel::cdf(double x, double y, double z) const {
  switch (family_) {
    case Family::additive:
      return noise_->cdf(z - 0.5 * (x + y));
    case Family::multiplicative: {
      const double s = x + y;
      if (!(s > 0.0)) return z >= 0.0 ? 1.0 : 0.0;
      return noise_->cdf(z / s);
    }
    case Family::density: {
      const TraitGrid& g = *resolution_;
      double below = 0.0;
      double total = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double w = std::max(0.0, density_(x, y, g.center(i)));
        total += w;
        if (g.edge(i + 1) <= z) {
          below += w;
        } else if (g.edge(i) < z) {
          below += w * (z - g.edge(i)) / g.dx();
        }
      }
      if (!(total > 0.0)) throw DegenerateRow("cdf: custom density vanishes on its resolution grid");
      return below / total;
    }
    case Family::sampling_only:
      break;
  }
  throw UnsupportedKernel("cdf: kernel '" + name_ + "' is sampling-only");
}

double InheritanceKernel::sample(double x, double y, Rng& rng) const {
  switch (family_) {
    case Family::additive:
      return 0.5 * (x + y) + noise_->sample(rng);
    case Family::multiplicative: {
      const double s = x + y;
      if (!(s > 0.0)) return 0.0;
      return s * noise_->sample(rng);
    }
    case Family::density: {
      const TraitGrid& g = *resolution_;
      std::vector<double> cum(g.size());
      double run = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        run += std::max(0.0, density_(x, y, g.center(i)));
        cum[i] = run;
      }
      if (!(run > 0.0)) throw DegenerateRow("sample: custom density vanishes on its resolution grid");
      const double u = std::uniform_real_distribution<double>(0.0, run)(rng);
      const std::size_t i = std::min<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin(), g.size() - 1);
      return std::uniform_real_distribution<double>(g.edge(i), g.edge(i + 1))(rng);
    }
    case Family::sampling_only:
      return sampler_(x, y, rng);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Tabulated kernels from CSV

namespace {

struct Lattice {
  std::vector<double> axis;    // shared x/y axis
  std::vector<double> z_axis;
  std::vector<double> values;  // [ix][iy][iz]

  double at(std::size_t ix, std::size_t iy, std::size_t iz) const {
    return values[(ix * axis.size() + iy) * z_axis.size() + iz];
  }

  static bool locate(const std::vector<double>& ax, double v, std::size_t& k, double& frac) {
    if (v < ax.front() || v > ax.back()) return false;
    if (ax.size() == 1) {
      k = 0;
      frac = 0.0;
      return true;
    }
    auto it = std::upper_bound(ax.begin(), ax.end(), v);
    k = std::min<std::size_t>(static_cast<std::size_t>(it - ax.begin()), ax.size() - 1) - 1;
    frac = (v - ax[k]) / (ax[k + 1] - ax[k]);
    return true;
  }

  double interpolate(double x, double y, double z) const {
    std::size_t ix, iy, iz;
    double fx, fy, fz;
    if (!locate(axis, x, ix, fx) || !locate(axis, y, iy, fy) || !locate(z_axis, z, iz, fz)) return 0.0;
    const std::size_t jx = std::min(ix + 1, axis.size() - 1);
    const std::size_t jy = std::min(iy + 1, axis.size() - 1);
    const std::size_t jz = std::min(iz + 1, z_axis.size() - 1);
    double acc = 0.0;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 2; ++c) {
          const double w = (a ? fx : 1 - fx) * (b ? fy : 1 - fy) * (c ? fz : 1 - fz);
          if (w == 0.0) continue;
          acc += w * at(a ? jx : ix, b ? jy : iy, c ? jz : iz);
        }
    return acc;
  }
};

}  // namespace

InheritanceKernel load_tabulated_kernel(const std::string& path, const TraitGrid& resolution) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_tabulated_kernel: cannot open " + path);
  std::map<std::tuple<double, double, double>, double> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    ls.imbue(std::locale::classic());
    double x, y, z, d;
    if (!(ls >> x >> y >> z >> d)) {
      if (line_no == 1) continue;  // header
      throw std::runtime_error("load_tabulated_kernel: malformed line " + std::to_string(line_no) + " in " + path);
    }
    if (!(d >= 0.0)) throw std::runtime_error("load_tabulated_kernel: negative density on line " + std::to_string(line_no));
    entries[{x, y, z}] = d;
  }
  std::vector<double> xs, ys, zs;
  for (const auto& [key, _] : entries) {
    xs.push_back(std::get<0>(key));
    ys.push_back(std::get<1>(key));
    zs.push_back(std::get<2>(key));
  }
  auto uniq = [](std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  uniq(xs);
  uniq(ys);
  uniq(zs);
  if (xs.empty() || xs != ys) throw std::runtime_error("load_tabulated_kernel: x and y axes must coincide");
  if (entries.size() != xs.size() * ys.size() * zs.size()) {
    throw std::runtime_error("load_tabulated_kernel: table is not a full (x, y, z) lattice");
  }
  auto lattice = std::make_shared<Lattice>();
  lattice->axis = xs;
  lattice->z_axis = zs;
  lattice->values.reserve(entries.size());
  for (const auto& [key, d] : entries) lattice->values.push_back(d);  // map order is (x, y, z) lexicographic
  auto density = [lattice](double x, double y, double z) {
    return 0.5 * (lattice->interpolate(x, y, z) + lattice->interpolate(y, x, z));
  };
  return InheritanceKernel::from_density(density, resolution, "tabulated:" + path);
}

// ---------------------------------------------------------------------------
// Birth operator

BirthOperator::BirthOperator(InheritanceKernel kernel, const TraitGrid& grid)
    : kernel_(std::move(kernel)), grid_(grid) {
  if (kernel_.family() == InheritanceKernel::Family::sampling_only) {
    throw UnsupportedKernel("BirthOperator: kernel '" + kernel_.name() + "' is sampling-only");
  }
  const std::size_t n = grid_.size();
  auto store = [&](std::size_t r, const KernelRow& row) {
    const auto w = row.measure.weights();
    std::copy(w.begin(), w.end(), rows_.begin() + static_cast<std::ptrdiff_t>(r * n));
    std::size_t lo = 0;
    while (lo < n && w[lo] == 0.0) ++lo;
    std::size_t hi = n;
    while (hi > lo && w[hi - 1] == 0.0) --hi;
    row_lo_[r] = lo;
    row_hi_[r] = hi;
    max_tail_mass_ = std::max(max_tail_mass_, row.tail_mass);
  };
  if (kernel_.depends_on_sum_only()) {
    sum_indexed_ = true;
    const std::size_t n_rows = 2 * n - 1;
    rows_.assign(n_rows * n, 0.0);
    row_lo_.assign(n_rows, 0);
    row_hi_.assign(n_rows, 0);
    for (std::size_t s = 0; s < n_rows; ++s) {
      const std::size_t a = s / 2;
      store(s, kernel_.density_row(grid_.center(a), grid_.center(s - a), grid_));
    }
  } else if (n <= 128) {
    pair_cache_ = true;
    rows_.assign(n * n * n, 0.0);
    row_lo_.assign(n * n, 0);
    row_hi_.assign(n * n, 0);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) store(a * n + b, kernel_.density_row(grid_.center(a), grid_.center(b), grid_));
  }
}

GridMeasure BirthOperator::apply(const GridMeasure& mu, const GridMeasure& nu) const {
  if (!(mu.grid() == grid_) || !(nu.grid() == grid_)) {
    throw GridMismatch("birth_operator: measures and operator use different grids");
  }
  GridMeasure out(grid_);
  apply_into(mu.weights(), nu.weights(), out.mutable_weights());
  return out;
}

void BirthOperator::apply_into(std::span<const double> mu, std::span<const double> nu, std::span<double> out) const {
  const std::size_t n = grid_.size();
  if (mu.size() != n || nu.size() != n || out.size() != n) {
    throw GridMismatch("birth_operator: vector length does not match the grid");
  }
  std::fill(out.begin(), out.end(), 0.0);
  auto add_row = [&](std::size_t r, double coeff) {
    const double* row = rows_.data() + r * n;
    for (std::size_t i = row_lo_[r]; i < row_hi_[r]; ++i) out[i] += coeff * row[i];
  };
  if (sum_indexed_) {
    std::vector<double> conv(2 * n - 1, 0.0);
    for (std::size_t a = 0; a < n; ++a) {
      const double ma = mu[a];
      if (ma == 0.0) continue;
      double* c = conv.data() + a;
      for (std::size_t b = 0; b < n; ++b) c[b] += ma * nu[b];
    }
    for (std::size_t s = 0; s < conv.size(); ++s) {
      if (conv[s] != 0.0) add_row(s, conv[s]);
    }
    return;
  }
  for (std::size_t a = 0; a < n; ++a) {
    if (mu[a] == 0.0) continue;
    for (std::size_t b = 0; b < n; ++b) {
      const double coeff = mu[a] * nu[b];
      if (coeff == 0.0) continue;
      if (pair_cache_) {
        add_row(a * n + b, coeff);
      } else {
        const KernelRow row = kernel_.density_row(grid_.center(a), grid_.center(b), grid_);
        for (std::size_t i = 0; i < n; ++i) out[i] += coeff * row.measure[i];
      }
    }
  }
}

GridMeasure birth_operator(const InheritanceKernel& kernel, const GridMeasure& mu, const GridMeasure& nu) {
  if (!(mu.grid() == nu.grid())) throw GridMismatch("birth_operator: measures live on different grids");
  return BirthOperator(kernel, mu.grid()).apply(mu, nu);
}

GridMeasure birth_operator_tensor(const InheritanceKernel& kernel, const GridMeasure& mu, const GridMeasure& nu) {
  if (!(mu.grid() == nu.grid())) throw GridMismatch("birth_operator_tensor: measures live on different grids");
  const TraitGrid& g = mu.grid();
  GridMeasure out(g);
  auto& w = out.mutable_weights();
  for (std::size_t a = 0; a < g.size(); ++a) {
    for (std::size_t b = 0; b < g.size(); ++b) {
      const double coeff = mu[a] * nu[b];
      if (coeff == 0.0) continue;
      const KernelRow row = kernel.density_row(g.center(a), g.center(b), g);
      for (std::size_t i = 0; i < g.size(); ++i) w[i] += coeff * row.measure[i];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hypothesis checkers

double condition_i_contribution(const InheritanceKernel& kernel, const TraitGrid& grid, double a, double b, double y,
                                std::size_t z_refine) {
  if (kernel.family() == InheritanceKernel::Family::sampling_only) {
    throw UnsupportedKernel("condition (i): kernel '" + kernel.name() + "' is sampling-only");
  }
  z_refine = std::max<std::size_t>(z_refine, 1);
  const double h = 0.5 * grid.dx();
  const double dz = grid.dx() / static_cast<double>(z_refine);
  const std::size_t nz = grid.size() * z_refine;
  double acc = 0.0;
  for (std::size_t k = 0; k < nz; ++k) {
    const double z = grid.x_min() + (static_cast<double>(k) + 0.5) * dz;
    const double da = (kernel.cdf(a + h, y, z) - kernel.cdf(a - h, y, z)) / (2.0 * h);
    const double db = (kernel.cdf(b + h, y, z) - kernel.cdf(b - h, y, z)) / (2.0 * h);
    acc += std::abs(da - db);
  }
  return acc * dz;
}

double mean_condition_error(const InheritanceKernel& kernel, const TraitGrid& grid, std::size_t n_samples,
                            std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, grid.size() - 1);
  double worst = 0.0;
  for (std::size_t k = 0; k < n_samples; ++k) {
    const double x = grid.center(pick(rng));
    const double y = grid.center(pick(rng));
    KernelRow row = [&] {
      try {
        return kernel.density_row(x, y, grid);
      } catch (const DegenerateRow&) {
        return KernelRow{GridMeasure(grid), 1.0};
      }
    }();
    if (row.tail_mass > 1e-6) continue;
    worst = std::max(worst, std::abs(mean(row.measure) - 0.5 * (x + y)));
  }
  return worst;
}

namespace {

struct Point {
  double x;
  double y;
};

// Supporting line of the upper convex hull above x_ref; returns (slope, intercept).
std::pair<double, double> upper_support_line(std::vector<Point> pts, double x_ref) {
  std::sort(pts.begin(), pts.end(), [](const Point& p, const Point& q) { return p.x < q.x || (p.x == q.x && p.y > q.y); });
  std::vector<Point> uniq;
  for (const auto& p : pts) {
    if (uniq.empty() || p.x > uniq.back().x) uniq.push_back(p);
  }
  std::vector<Point> hull;
  for (const auto& p : uniq) {
    while (hull.size() >= 2) {
      const Point& o = hull[hull.size() - 2];
      const Point& a = hull.back();
      const double cross = (a.x - o.x) * (p.y - o.y) - (a.y - o.y) * (p.x - o.x);
      if (cross >= 0.0) {
        hull.pop_back();
      } else {
        break;
      }
    }
    hull.push_back(p);
  }
  if (hull.size() < 2) return {0.0, hull.empty() ? 0.0 : hull.front().y};
  std::size_t seg = 0;
  while (seg + 2 < hull.size() && hull[seg + 1].x <= x_ref) ++seg;
  double slope = (hull[seg + 1].y - hull[seg].y) / (hull[seg + 1].x - hull[seg].x);
  if (slope < 0.0) {
    double ymax = 0.0;
    for (const auto& p : hull) ymax = std::max(ymax, p.y);
    return {0.0, ymax};
  }
  return {slope, hull[seg].y - slope * hull[seg].x};
}

// (1 - theta) delta_m + theta (w_lo delta_lo + w_hi delta_hi), mean preserved.
GridMeasure spread_measure(const TraitGrid& g, std::size_t i_m, std::size_t i_lo, std::size_t i_hi, double theta) {
  GridMeasure out(g);
  auto& w = out.mutable_weights();
  const double zm = g.center(i_m);
  const double zl = g.center(i_lo);
  const double zh = g.center(i_hi);
  const double w_hi = (zm - zl) / (zh - zl);
  w[i_m] += 1.0 - theta;
  w[i_lo] += theta * (1.0 - w_hi);
  w[i_hi] += theta * w_hi;
  return out;
}

// Random probability measure supported in cells [lo, hi] with mean moved to `target`
// by mixing in a point mass at one end of the support.
GridMeasure random_measure_with_mean(const TraitGrid& g, std::size_t lo, std::size_t hi, double target, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(lo, hi);
  std::size_t a = pick(rng);
  std::size_t b = pick(rng);
  if (a > b) std::swap(a, b);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  GridMeasure m(g);
  auto& w = m.mutable_weights();
  double sum = 0.0;
  for (std::size_t i = a; i <= b; ++i) {
    const double u = unit(rng);
    w[i] = u * u * u;
    sum += w[i];
  }
  if (!(sum > 0.0)) w[a] = sum = 1.0;
  for (std::size_t i = a; i <= b; ++i) w[i] /= sum;
  const double current = mean(m);
  const std::size_t end = current < target ? hi : lo;
  const double z_end = g.center(end);
  if (std::abs(z_end - current) > 0.0 && std::abs(target - current) > 0.0) {
    const double theta = std::clamp((target - current) / (z_end - current), 0.0, 1.0);
    for (double& v : w) v *= (1.0 - theta);
    w[end] += theta;
  }
  return m;
}

}  // namespace

HypothesisReport check_hypotheses(const InheritanceKernel& kernel, const TraitGrid& grid, const HypothesisConfig& config) {
  if (kernel.family() == InheritanceKernel::Family::sampling_only) {
    throw UnsupportedKernel("check_hypotheses: kernel '" + kernel.name() + "' is sampling-only");
  }
  if (!(config.gamma >= 1.0)) throw std::invalid_argument("check_hypotheses: gamma must be >= 1");
  HypothesisReport report;
  Rng rng(config.seed);
  const std::size_t n = grid.size();

  // Condition (i): random triples plus the extreme corners of the grid.
  std::vector<std::array<std::size_t, 3>> triples = {
      {0, n - 1, n / 2}, {0, n - 1, 0}, {0, n - 1, n - 1}, {0, 1, 0}, {n - 2, n - 1, n - 1}, {0, n / 2, n / 2}};
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  for (std::size_t k = 0; k < config.n_triples; ++k) triples.push_back({pick(rng), pick(rng), pick(rng)});
  for (const auto& t : triples) {
    const double a = grid.center(t[0]);
    const double b = grid.center(t[1]);
    const double y = grid.center(t[2]);
    const double v = condition_i_contribution(kernel, grid, a, b, y, config.z_refine);
    if (v > report.condition_i_max) {
      report.condition_i_max = v;
      report.condition_i_a = a;
      report.condition_i_b = b;
      report.condition_i_y = y;
    }
  }
  report.triples_used = triples.size();

  // Condition (ii): points (max(m_gamma(mu), m_gamma(nu)), m_gamma(P(mu, nu))).
  double mean_lo = config.mean_lo;
  double mean_hi = config.mean_hi;
  if (!(mean_lo < mean_hi)) {
    const double mid = 0.5 * (grid.x_min() + grid.x_max());
    const double span = grid.x_max() - grid.x_min();
    mean_lo = mid - 0.1 * span;
    mean_hi = mid + 0.1 * span;
  }
  double sup_lo = config.support_lo;
  double sup_hi = config.support_hi;
  if (!(sup_lo < sup_hi)) {
    sup_lo = grid.x_min();
    sup_hi = grid.x_max();
  }
  const std::size_t c_lo = grid.cell_of(sup_lo);
  const std::size_t c_hi = grid.cell_of(sup_hi);
  auto inner_cell = [&](double m) {
    std::size_t i = grid.cell_of(m);
    if (grid.center(i) < mean_lo && i + 1 < n && grid.center(i + 1) <= mean_hi) ++i;
    if (grid.center(i) > mean_hi && i > 0 && grid.center(i - 1) >= mean_lo) --i;
    return std::clamp(i, c_lo, c_hi);
  };

  const BirthOperator op(kernel, grid);
  std::vector<Point> pts;
  auto add_pair = [&](const GridMeasure& mu, const GridMeasure& nu) {
    const double x = std::max(abs_moment(mu, config.gamma), abs_moment(nu, config.gamma));
    const double y = abs_moment(op.apply(mu, nu), config.gamma);
    pts.push_back({x, y});
  };
  const std::size_t n_spread = 12;
  for (double m : {mean_lo, mean_hi}) {
    const std::size_t i_m = inner_cell(m);
    for (std::size_t k = 0; k <= n_spread; ++k) {
      const double theta = static_cast<double>(k) / n_spread;
      const GridMeasure mu = spread_measure(grid, i_m, c_lo, c_hi, theta);
      add_pair(mu, mu);
      add_pair(mu, point_mass(grid, grid.center(i_m)));
    }
  }
  std::uniform_real_distribution<double> target(mean_lo, mean_hi);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t k = 0; k < config.n_pairs; ++k) {
    GridMeasure mu = random_measure_with_mean(grid, c_lo, c_hi, target(rng), rng);
    GridMeasure nu = random_measure_with_mean(grid, c_lo, c_hi, target(rng), rng);
    add_pair(mu, nu);
  }
  report.pairs_used = pts.size();
  double x_min = pts.front().x;
  double x_max = pts.front().x;
  for (const auto& p : pts) {
    x_min = std::min(x_min, p.x);
    x_max = std::max(x_max, p.x);
  }
  const auto [slope, intercept] = upper_support_line(pts, 0.5 * (x_min + x_max));
  report.condition_ii.gamma = config.gamma;
  report.condition_ii.l_est = slope;
  report.condition_ii.c_est = intercept;
  report.condition_ii.holds = config.gamma > 1.0 && std::isfinite(slope) && std::isfinite(intercept) && slope < 1.0;

  report.mean_condition_max_error = mean_condition_error(kernel, grid, config.n_mean_samples, config.seed + 1);
  report.mean_samples_used = config.n_mean_samples;
  return report;
}

}  // namespace dimorph
