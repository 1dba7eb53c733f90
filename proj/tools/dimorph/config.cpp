#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "csv.hpp"

namespace dimorph::cli {

namespace {

using nlohmann::json;

const std::set<std::string> kScenarios = {"ibm", "macro", "totals", "stationary", "fixed-point", "lln", "acceptance"};

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

double get_number(const json& obj, const std::string& key, const std::string& path, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(join(path, key), "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(join(path, key), "must be finite");
  return d;
}

std::size_t get_count(const json& obj, const std::string& key, const std::string& path, std::size_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError(join(path, key), "expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

std::string get_string(const json& obj, const std::string& key, const std::string& path, const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(join(path, key), "expected a string");
  return v.get<std::string>();
}

const json& get_object(const json& obj, const std::string& key, const std::string& path) {
  static const json empty = json::object();
  if (!obj.contains(key)) return empty;
  const json& v = obj.at(key);
  if (!v.is_object()) throw ConfigError(join(path, key), "expected an object");
  return v;
}

std::vector<double> get_numbers(const json& obj, const std::string& key, const std::string& path,
                                std::vector<double> fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_array()) throw ConfigError(join(path, key), "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ConfigError(join(path, key) + "[" + std::to_string(i) + "]", "expected a number");
    out.push_back(v[i].get<double>());
  }
  return out;
}

void require(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ConfigError(field, message);
}

NoiseSpec parse_noise(const json& j, const std::string& path) {
  NoiseSpec n;
  n.kind = get_string(j, "kind", path, n.kind);
  if (n.kind == "gaussian") {
    n.sigma = get_number(j, "sigma", path, n.sigma);
    require(n.sigma > 0.0, join(path, "sigma"), "must be positive");
  } else if (n.kind == "uniform") {
    n.lo = get_number(j, "lo", path, n.lo);
    n.hi = get_number(j, "hi", path, n.hi);
    require(n.lo < n.hi, join(path, "hi"), "must exceed lo");
  } else {
    throw ConfigError(join(path, "kind"), "unknown noise kind '" + n.kind + "' (gaussian, uniform)");
  }
  return n;
}

ShapeSpec parse_shape(const json& j, const std::string& path, const GridSpec& grid) {
  ShapeSpec s;
  s.shape = get_string(j, "shape", path, s.shape);
  s.mass = get_number(j, "mass", path, s.mass);
  require(s.mass >= 0.0, join(path, "mass"), "must be non-negative");
  if (s.shape == "point") {
    s.at = get_number(j, "at", path, s.at);
    require(s.at >= grid.x_min && s.at <= grid.x_max, join(path, "at"), "must lie inside the grid");
  } else if (s.shape == "uniform") {
    s.lo = get_number(j, "lo", path, s.lo);
    s.hi = get_number(j, "hi", path, s.hi);
    require(s.lo < s.hi, join(path, "hi"), "must exceed lo");
  } else if (s.shape == "gaussian") {
    s.mean = get_number(j, "mean", path, s.mean);
    s.sd = get_number(j, "sd", path, s.sd);
    require(s.sd > 0.0, join(path, "sd"), "must be positive");
  } else if (s.shape == "tabulated") {
    s.path = get_string(j, "path", path, "");
    require(!s.path.empty(), join(path, "path"), "required for tabulated shapes");
  } else {
    throw ConfigError(join(path, "shape"), "unknown shape '" + s.shape + "' (point, uniform, gaussian, tabulated)");
  }
  return s;
}

Scheme parse_scheme(const std::string& s, const std::string& field) {
  if (s == "rk4") return Scheme::rk4;
  if (s == "euler") return Scheme::euler;
  throw ConfigError(field, "unknown scheme '" + s + "' (rk4, euler)");
}

Positivity parse_positivity(const std::string& s, const std::string& field) {
  if (s == "auto") return Positivity::automatic;
  if (s == "clip") return Positivity::clip;
  if (s == "clip-renormalize") return Positivity::clip_renormalize;
  if (s == "reject-step") return Positivity::reject_step;
  throw ConfigError(field, "unknown positivity mode '" + s + "' (auto, clip, clip-renormalize, reject-step)");
}

void check_times(const std::vector<double>& times, double t_end, const std::string& field, bool allow_zero) {
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    require((allow_zero ? t >= 0.0 : t > 0.0) && t <= t_end, field + "[" + std::to_string(i) + "]",
            "must lie in " + std::string(allow_zero ? "[0" : "(0") + ", t_end]");
    if (i > 0) require(times[i - 1] < t, field, "must be strictly increasing");
  }
}

std::string resolve(const std::string& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? p : (std::filesystem::path(base) / path).string();
}

}  // namespace

ScenarioConfig parse_config(const json& j, const std::string& base_dir) {
  if (!j.is_object()) throw ConfigError("(root)", "configuration must be a JSON object");
  ScenarioConfig c;
  c.base_dir = base_dir;
  if (!j.contains("schema_version")) throw ConfigError("schema_version", "missing");
  if (!j.at("schema_version").is_number_integer() || j.at("schema_version").get<int>() != kSchemaVersion) {
    throw ConfigError("schema_version", "unsupported (expected " + std::to_string(kSchemaVersion) + ")");
  }
  c.scenario = get_string(j, "scenario", "", "");
  if (!c.scenario.empty() && kScenarios.count(c.scenario) == 0) {
    throw ConfigError("scenario", "unknown scenario '" + c.scenario + "'");
  }

  const json& g = get_object(j, "grid", "");
  c.grid.x_min = get_number(g, "x_min", "grid", c.grid.x_min);
  c.grid.x_max = get_number(g, "x_max", "grid", c.grid.x_max);
  c.grid.n_cells = get_count(g, "n_cells", "grid", c.grid.n_cells);
  require(c.grid.x_min < c.grid.x_max, "grid.x_max", "must exceed grid.x_min");
  require(c.grid.n_cells >= 2, "grid.n_cells", "must be at least 2");

  const json& r = get_object(j, "rates", "");
  auto rate = [&](const char* key, double& field, bool strictly_positive) {
    field = get_number(r, key, "rates", field);
    if (strictly_positive) {
      require(field > 0.0, std::string("rates.") + key, "must be positive");
    } else {
      require(field >= 0.0, std::string("rates.") + key, "must be non-negative");
    }
  };
  rate("p_f", c.rates.p_f, false);
  rate("p_m", c.rates.p_m, false);
  rate("D_f", c.rates.D_f, true);
  rate("D_m", c.rates.D_m, true);
  rate("U_ff", c.rates.U_ff, true);
  rate("U_fm", c.rates.U_fm, true);
  rate("U_mf", c.rates.U_mf, true);
  rate("U_mm", c.rates.U_mm, true);
  require(c.rates.p_f + c.rates.p_m > 0.0, "rates.p_f", "p_f + p_m must be positive");

  const json& k = get_object(j, "kernel", "");
  c.kernel.family = get_string(k, "family", "kernel", c.kernel.family);
  if (c.kernel.family == "additive" || c.kernel.family == "multiplicative") {
    NoiseSpec fallback;
    if (c.kernel.family == "multiplicative") fallback = NoiseSpec{"uniform", 0.0, 0.0, 1.0};
    c.kernel.noise = k.contains("noise") ? parse_noise(get_object(k, "noise", "kernel"), "kernel.noise") : fallback;
    if (c.kernel.family == "multiplicative") {
      require(c.kernel.noise.kind == "uniform" && c.kernel.noise.lo >= 0.0 && c.kernel.noise.hi <= 1.0 &&
                  std::abs(0.5 * (c.kernel.noise.lo + c.kernel.noise.hi) - 0.5) <= 1e-9,
              "kernel.noise", "multiplicative noise must be uniform on a subset of [0, 1] with mean 1/2");
    }
  } else if (c.kernel.family == "tabulated") {
    c.kernel.path = resolve(base_dir, get_string(k, "path", "kernel", ""));
    require(!get_string(k, "path", "kernel", "").empty(), "kernel.path", "required for tabulated kernels");
  } else {
    throw ConfigError("kernel.family", "unknown family '" + c.kernel.family + "' (additive, multiplicative, tabulated)");
  }

  const json& init = get_object(j, "initial", "");
  c.male0 = parse_shape(get_object(init, "male", "initial"), "initial.male", c.grid);
  c.female0 = parse_shape(get_object(init, "female", "initial"), "initial.female", c.grid);
  if (c.male0.shape == "tabulated") c.male0.path = resolve(base_dir, c.male0.path);
  if (c.female0.shape == "tabulated") c.female0.path = resolve(base_dir, c.female0.path);

  const json& s = get_object(j, "solver", "");
  c.solver.dt = get_number(s, "dt", "solver", 0.0);
  require(c.solver.dt >= 0.0, "solver.dt", "must be non-negative (0 selects the automatic bound)");
  c.solver.t_end = get_number(s, "t_end", "solver", 10.0);
  require(c.solver.t_end > 0.0, "solver.t_end", "must be positive");
  c.solver.stride = get_count(s, "stride", "solver", 1);
  require(c.solver.stride >= 1, "solver.stride", "must be at least 1");
  c.solver.scheme = parse_scheme(get_string(s, "scheme", "solver", "rk4"), "solver.scheme");
  c.solver.positivity = parse_positivity(get_string(s, "positivity", "solver", "auto"), "solver.positivity");
  c.solver.sample_times = get_numbers(s, "sample_times", "solver", {});
  check_times(c.solver.sample_times, c.solver.t_end, "solver.sample_times", false);

  if (j.contains("normalized")) {
    const json& n = get_object(j, "normalized", "");
    c.normalized_A = get_number(n, "A", "normalized", 1.0);
    require(*c.normalized_A > 0.0, "normalized.A", "must be positive");
  }

  const json& t = get_object(j, "totals", "");
  c.totals.M0 = get_number(t, "M0", "totals", c.totals.M0);
  c.totals.F0 = get_number(t, "F0", "totals", c.totals.F0);
  c.totals.t_end = get_number(t, "t_end", "totals", c.totals.t_end);
  c.totals.dt = get_number(t, "dt", "totals", c.totals.dt);
  c.totals.stride = get_count(t, "stride", "totals", c.totals.stride);
  require(c.totals.M0 >= 0.0, "totals.M0", "must be non-negative");
  require(c.totals.F0 >= 0.0, "totals.F0", "must be non-negative");
  require(c.totals.t_end > 0.0, "totals.t_end", "must be positive");
  require(c.totals.dt > 0.0, "totals.dt", "must be positive");
  require(c.totals.stride >= 1, "totals.stride", "must be at least 1");

  const json& ib = get_object(j, "ibm", "");
  c.ibm.N = get_count(ib, "N", "ibm", c.ibm.N);
  require(c.ibm.N >= 1, "ibm.N", "must be positive");
  c.ibm.t_end = get_number(ib, "t_end", "ibm", c.ibm.t_end);
  require(c.ibm.t_end > 0.0, "ibm.t_end", "must be positive");
  c.ibm.sample_times = get_numbers(ib, "sample_times", "ibm", {0.0, c.ibm.t_end});
  check_times(c.ibm.sample_times, c.ibm.t_end, "ibm.sample_times", true);
  c.ibm.replicas = get_count(ib, "replicas", "ibm", c.ibm.replicas);
  require(c.ibm.replicas >= 1, "ibm.replicas", "must be at least 1");
  const std::string mode = get_string(ib, "init", "ibm", "quantile");
  if (mode == "quantile") {
    c.ibm.init = InitMode::quantile;
  } else if (mode == "sample") {
    c.ibm.init = InitMode::sample;
  } else {
    throw ConfigError("ibm.init", "unknown init mode '" + mode + "' (quantile, sample)");
  }

  const json& l = get_object(j, "lln", "");
  if (l.contains("scales")) {
    const auto v = get_numbers(l, "scales", "lln", {});
    c.lln.scales.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      require(v[i] >= 1.0 && v[i] == std::floor(v[i]), "lln.scales[" + std::to_string(i) + "]",
              "must be a positive integer");
      c.lln.scales.push_back(static_cast<std::size_t>(v[i]));
    }
    require(!c.lln.scales.empty(), "lln.scales", "must not be empty");
  }
  c.lln.replicas = get_count(l, "replicas", "lln", c.lln.replicas);
  require(c.lln.replicas >= 3, "lln.replicas", "need at least 3 replicas per scale");
  c.lln.checkpoints = get_numbers(l, "checkpoints", "lln", c.lln.checkpoints);
  require(!c.lln.checkpoints.empty(), "lln.checkpoints", "must not be empty");
  check_times(c.lln.checkpoints, std::numeric_limits<double>::infinity(), "lln.checkpoints", false);

  const json& fp = get_object(j, "fixed_point", "");
  c.fixed_point.tol = get_number(fp, "tol", "fixed_point", c.fixed_point.tol);
  require(c.fixed_point.tol > 0.0, "fixed_point.tol", "must be positive");
  c.fixed_point.max_iter = get_count(fp, "max_iter", "fixed_point", c.fixed_point.max_iter);
  require(c.fixed_point.max_iter >= 1, "fixed_point.max_iter", "must be at least 1");
  if (fp.contains("check_hypotheses")) {
    require(fp.at("check_hypotheses").is_boolean(), "fixed_point.check_hypotheses", "expected a boolean");
    c.fixed_point.check_hypotheses = fp.at("check_hypotheses").get<bool>();
  }

  const json& acc = get_object(j, "acceptance", "");
  for (double v : get_numbers(acc, "criteria", "acceptance", {})) {
    require(v >= 1.0 && v <= 10.0 && v == std::floor(v), "acceptance.criteria", "entries must be integers 1..10");
    c.acceptance.criteria.push_back(static_cast<int>(v));
  }

  if (j.contains("seed")) {
    require(j.at("seed").is_number_unsigned(), "seed", "expected a non-negative integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  c.out_dir = get_string(j, "out", "", "");
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot read '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("--config", std::string("invalid JSON: ") + e.what());
  }
  const auto parent = std::filesystem::path(path).parent_path();
  return parse_config(j, parent.empty() ? "." : parent.string());
}

TraitGrid ScenarioConfig::make_grid() const { return TraitGrid(grid.x_min, grid.x_max, grid.n_cells); }

RateSet ScenarioConfig::make_rates() const {
  return RateSet{rates.p_f, rates.p_m, rates.D_f, rates.D_m, rates.U_ff, rates.U_fm, rates.U_mf, rates.U_mm};
}

InheritanceKernel ScenarioConfig::make_kernel() const {
  if (kernel.family == "tabulated") {
    try {
      return load_tabulated_kernel(kernel.path, make_grid());
    } catch (const std::exception& e) {
      throw ConfigError("kernel.path", e.what());
    }
  }
  const NoiseDensity h = kernel.noise.kind == "gaussian" ? NoiseDensity::gaussian(kernel.noise.sigma)
                                                         : NoiseDensity::uniform(kernel.noise.lo, kernel.noise.hi);
  try {
    return kernel.family == "additive" ? InheritanceKernel::additive(h) : InheritanceKernel::multiplicative(h);
  } catch (const std::exception& e) {
    throw ConfigError("kernel.noise", e.what());
  }
}

GridMeasure ScenarioConfig::make_initial(const ShapeSpec& s) const {
  const TraitGrid g = make_grid();
  if (s.shape == "point") return point_mass(g, s.at, s.mass);
  if (s.shape == "uniform") return uniform_measure(g, s.lo, s.hi, s.mass);
  if (s.shape == "gaussian") return gaussian_measure(g, s.mean, s.sd, s.mass);
  GridMeasure m = load_measure_csv(s.path, g);
  const double mass = total_mass(m);
  if (!(mass > 0.0)) throw ConfigError("initial", "tabulated measure '" + s.path + "' has no mass");
  return m.scaled(s.mass / mass);
}

}  // namespace dimorph::cli
