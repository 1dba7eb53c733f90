#include <sys/wait.h>

#include <atomic>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "artifacts.hpp"
#include "commands.hpp"
#include "config.hpp"
#include "csv.hpp"
#include "parallel.hpp"

using namespace dimorph;
using namespace dimorph::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dimorph_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Exec {
  int status;
  std::string output;
};

Exec run(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / "dimorph_test_exec.log";
  const std::string cmd = std::string(DIMORPH_EXE) + " " + args + " > " + log.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(log)};
}

json minimal() {
  return json{{"schema_version", 1},
              {"rates", {{"p_f", 2}, {"p_m", 2}, {"D_f", 1}, {"D_m", 1}, {"U_ff", 0.25}, {"U_fm", 0.25},
                         {"U_mf", 0.25}, {"U_mm", 0.25}}}};
}

std::string field_of(const json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST_CASE("config fields are validated by name") {
  CHECK(field_of(minimal()).empty());
  json j = minimal();
  j["rates"]["D_f"] = -1;
  CHECK(field_of(j) == "rates.D_f");
  j = minimal();
  j["schema_version"] = 2;
  CHECK(field_of(j) == "schema_version");
  j = minimal();
  j["kernel"] = {{"family", "quadratic"}};
  CHECK(field_of(j) == "kernel.family");
  j = minimal();
  j["solver"] = {{"t_end", 2.0}, {"sample_times", {0.5, 3.0}}};
  CHECK(field_of(j).rfind("solver.sample_times", 0) == 0);
  j = minimal();
  j["rates"]["p_f"] = "two";
  CHECK(field_of(j) == "rates.p_f");
  j = minimal();
  j["lln"] = {{"replicas", 2}};
  CHECK(field_of(j) == "lln.replicas");
}

TEST_CASE("config defaults and builders") {
  json j = minimal();
  j["grid"] = {{"x_min", -2}, {"x_max", 2}, {"n_cells", 8}};
  j["initial"] = {{"male", {{"shape", "point"}, {"at", 0.1}, {"mass", 2}}}};
  const ScenarioConfig c = parse_config(j);
  CHECK(c.make_grid().size() == 8);
  const GridMeasure m = c.make_initial(c.male0);
  CHECK(total_mass(m) == doctest::Approx(2.0));
  CHECK(mean(m) == doctest::Approx(0.25));
  CHECK(c.solver.scheme == Scheme::rk4);
}

TEST_CASE("number formatting round-trips") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(2.0) == "2");
  for (double v : {1.0 / 3.0, -1e-300, 6.02214076e23, 5e-324}) {
    const std::string s = format_double(v);
    double back = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    CHECK(back == v);
  }
}

TEST_CASE("distribution csv layout and round trip") {
  const TraitGrid g(0.0, 1.0, 4);
  const std::vector<MacroState> states{{GridMeasure(g, {0.1, 0.2, 0.3, 0.4}), GridMeasure(g, {1, 0, 0, 1.0 / 3.0}), 0.5}};
  const auto frames = frames_of(states);
  const std::string text = distribution_csv(frames);
  const auto rows = parse_distribution_csv(text);
  REQUIRE(rows.size() == 8);
  CHECK(text.rfind("time,component,cell_center,weight\n", 0) == 0);
  CHECK(rows[0].component == "male");
  CHECK(rows[4].component == "female");
  CHECK(rows[1].cell_center == doctest::Approx(0.375));
  CHECK(rows[7].weight == 1.0 / 3.0);
  CHECK(rows[0].time == 0.5);
  CHECK(parse_distribution_csv(distribution_csv({})).empty());
  CHECK_THROWS(parse_distribution_csv("time,component,cell_center,weight\n1,male,oops\n"));
}

TEST_CASE("sha256") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("atomic writes and manifest") {
  const fs::path dir = scratch_dir("manifest");
  ArtifactSet set(dir.string());
  set.write("a.txt", "abc");
  set.write_json("b.json", json{{"x", 1}});
  set.write("a.txt", "abc");
  set.write_manifest(json{{"subcommand", "test"}});
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    ++files;
    CHECK(e.path().filename().string().find(".tmp") == std::string::npos);
  }
  CHECK(files == 3);
  const json m = json::parse(slurp(dir / "manifest.json"));
  REQUIRE(m["files"].size() == 2);
  for (const auto& f : m["files"]) {
    const std::string content = slurp(dir / f["file"].get<std::string>());
    CHECK(f["sha256"] == sha256_hex(content));
    CHECK(f["bytes"] == content.size());
  }
  CHECK(m["run"]["subcommand"] == "test");
  fs::remove_all(dir);
}

TEST_CASE("parallel_for visits every index once and rethrows") {
  std::vector<std::atomic<int>> hits(100);
  parallel_for(100, 4, [&](std::size_t i) { ++hits[i]; });
  for (const auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                    if (i == 5) throw std::runtime_error("boom");
                  }),
                  std::runtime_error);
}

TEST_CASE("output directory resolution") {
  ScenarioConfig c = parse_config(minimal());
  RunOptions o;
  ::unsetenv(kOutEnv);
  CHECK(resolve_out_dir(o, c) == kDefaultOut);
  ::setenv(kOutEnv, "/tmp/from_env", 1);
  CHECK(resolve_out_dir(o, c) == "/tmp/from_env");
  c.out_dir = "from_config";
  CHECK(resolve_out_dir(o, c).find("from_config") != std::string::npos);
  o.out_dir = "/tmp/from_flag";
  CHECK(resolve_out_dir(o, c) == "/tmp/from_flag");
  ::unsetenv(kOutEnv);
}

TEST_CASE("executable: config errors exit with status 2") {
  const auto r = run("totals --config " + std::string(DIMORPH_TEST_DATA) + "/negative_death.json --out " +
                     scratch_dir("neg").string());
  CHECK(r.status == 2);
  CHECK(r.output.find("D_f") != std::string::npos);
  CHECK(run("totals --config /nonexistent.json").status == 2);
  CHECK(run("totals").status == 2);
  CHECK(run("").status == 2);
  CHECK(run("--help").status == 0);
}

TEST_CASE("executable: totals run") {
  const fs::path out = scratch_dir("totals");
  const auto r = run("totals --config " + std::string(DIMORPH_CONFIGS) + "/totals.json --out " + out.string());
  REQUIRE(r.status == 0);
  const json j = json::parse(slurp(out / "totals.json"));
  CHECK(j["classification"] == "Persistence");
  CHECK(j["M_bar"].get<double>() == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(fs::exists(out / "totals.csv"));
  CHECK(fs::exists(out / "manifest.json"));
  fs::remove_all(out);
}

TEST_CASE("executable: ibm output does not depend on the thread count") {
  const fs::path a = scratch_dir("ibm_j1"), b = scratch_dir("ibm_j2");
  const std::string cfg = " --config " + std::string(DIMORPH_CONFIGS) + "/ibm.json --seed 5 ";
  REQUIRE(run("ibm" + cfg + "--jobs 1 --out " + a.string()).status == 0);
  REQUIRE(run("ibm" + cfg + "--jobs 2 --out " + b.string()).status == 0);
  std::size_t compared = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    if (e.path().extension() != ".csv") continue;
    CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
    ++compared;
  }
  CHECK(compared == 4);
  CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
  fs::remove_all(a);
  fs::remove_all(b);
}
