#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "scenario.hpp"

using namespace locgibbs;
using namespace locgibbs::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json base() {
  return json::parse(R"({
    "lattice": {"m": 4, "h": 1.0, "kappa": 0.5, "w0": 1.0, "r0": 1.0},
    "fock": {"statistics": "fermionic", "n_max": 4},
    "task": {"type": "entropy_curve", "a_range": {"min": 1.0, "max": 5.0, "points": 20}},
    "seed": 3
  })");
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("locgibbs_test_" + name);
  fs::remove_all(dir);
  return dir;
}

RunResult run(json cfg, const fs::path& dir) {
  cfg["output"] = {{"directory", dir.string()}};
  std::ostringstream log;
  return run_scenario(parse_config(cfg), log);
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

std::string schema_key(const json& cfg) {
  try {
    parse_config(cfg);
  } catch (const SchemaError& e) {
    return e.key();
  }
  return "";
}

}  // namespace

TEST_CASE("format17 round-trips doubles") {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23}) {
    CHECK(std::stod(format17(x)) == x);
  }
  CHECK(format17(0.1) == "0.10000000000000001");
}

TEST_CASE("schema errors name the offending key") {
  auto cfg = base();
  CHECK(schema_key(cfg).empty());

  auto c1 = base();
  c1["task"] = {{"type", "free_energy_curve"}, {"a", {0.1, 0.2}}};
  CHECK(schema_key(c1) == "task.beta");

  auto c2 = base();
  c2["lattice"]["h"] = -1.0;
  CHECK(schema_key(c2) == "lattice.h");

  auto c3 = base();
  c3["lattice"]["spacing"] = 1.0;
  CHECK(schema_key(c3) == "lattice.spacing");

  auto c4 = base();
  c4["task"] = {{"type", "thermo_scan"}, {"alphas", {0.0, 1.0}}, {"betas", {2.0, 1.0}}};
  CHECK(schema_key(c4) == "task.betas");

  auto c5 = base();
  c5["task"] = {{"type", "thermo_scan"}, {"alphas", {-1.0, 1.0}}, {"betas", {1.0}}};
  CHECK(schema_key(c5) == "task.alphas");
  c5["task"]["allow_negative_alpha"] = true;
  CHECK(schema_key(c5).empty());

  auto c6 = base();
  c6["fock"]["statistics"] = "anyonic";
  CHECK(schema_key(c6) == "fock.statistics");

  auto c7 = base();
  c7.erase("lattice");
  CHECK(schema_key(c7) == "lattice");

  auto c8 = base();
  c8["task"] = {{"type", "reconstruct"}, {"reference", {{"type", "gibbs"}, {"alpha", 0.1}}}};
  CHECK(schema_key(c8) == "task.reference.beta");
}

TEST_CASE("preparation failures write nothing") {
  SUBCASE("beta too large for the requested density") {
    auto cfg = base();
    cfg["task"] = {{"type", "free_energy_curve"}, {"beta", 50.0}, {"a", {0.5, 1.0}}};
    const auto dir = scratch("beta");
    const auto r = run(cfg, dir);
    CHECK(r.exit_code == exit_schema);
    CHECK_FALSE(fs::exists(dir));
  }
  SUBCASE("energy outside the attainable range") {
    auto cfg = base();
    cfg["task"]["a_range"]["max"] = 1e3;
    const auto dir = scratch("range");
    CHECK(run(cfg, dir).exit_code == exit_schema);
    CHECK_FALSE(fs::exists(dir));
  }
  SUBCASE("dimension cap") {
    auto cfg = base();
    cfg["fock"]["dimension_cap"] = 10;
    const auto dir = scratch("cap");
    CHECK(run(cfg, dir).exit_code == exit_dimension);
    CHECK_FALSE(fs::exists(dir));
  }
  SUBCASE("r0 below the stability constant") {
    auto cfg = base();
    cfg["lattice"]["w0"] = -2.0;
    cfg["lattice"]["r0"] = 0.1;
    const auto dir = scratch("stab");
    CHECK(run(cfg, dir).exit_code == exit_schema);
    CHECK_FALSE(fs::exists(dir));
  }
}

TEST_CASE("entropy_curve output re-read from disk") {
  const auto dir = scratch("entropy");
  const auto r = run(base(), dir);
  REQUIRE(r.exit_code == exit_ok);
  const auto rows = read_csv(dir / "entropy_curve.csv");
  REQUIRE(rows.size() == 21);
  CHECK(rows[0] == std::vector<std::string>{"a", "beta0", "f", "S_check", "fd_slope"});
  for (std::size_t i = 2; i < rows.size(); ++i) CHECK(std::stod(rows[i][2]) < std::stod(rows[i - 1][2]));
  CHECK(fs::exists(dir / "plot_f.dat"));
  const auto report = json::parse(slurp(dir / "report.json"));
  CHECK(report["status"] == "ok");
  CHECK(report["seed"] == 3);
  for (const auto& c : report["checks"]) CHECK(c["pass"].get<bool>());
}

TEST_CASE("identical config and seed give byte-identical CSV") {
  auto cfg = base();
  cfg["task"] = json::parse(R"({"type": "reconstruct",
      "reference": {"type": "random_multipliers", "alpha": 0.3, "beta": 1.0, "amplitude": 0.4}})");
  const auto d1 = scratch("det1");
  const auto d2 = scratch("det2");
  REQUIRE(run(cfg, d1).exit_code == exit_ok);
  REQUIRE(run(cfg, d2).exit_code == exit_ok);
  for (const char* name : {"fields_target.csv", "fields_achieved.csv", "multipliers.csv", "trace.csv"}) {
    CHECK(slurp(d1 / name) == slurp(d2 / name));
  }
  cfg["seed"] = 4;
  const auto d3 = scratch("det3");
  REQUIRE(run(cfg, d3).exit_code == exit_ok);
  CHECK(slurp(d1 / "fields_target.csv") != slurp(d3 / "fields_target.csv"));
}

TEST_CASE("reconstruct writes three overlay files") {
  auto cfg = base();
  cfg["task"] = json::parse(R"({"type": "reconstruct",
      "reference": {"type": "gibbs", "alpha": 0.2, "beta": 1.0, "tilt": 0.5}})");
  const auto dir = scratch("overlay");
  REQUIRE(run(cfg, dir).exit_code == exit_ok);
  for (const char* name : {"plot_n.dat", "plot_u.dat", "plot_e.dat"}) {
    std::istringstream in(slurp(dir / name));
    std::string line;
    std::getline(in, line);
    CHECK(line.rfind("# ", 0) == 0);
    int rows = 0;
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      double x, target, achieved;
      REQUIRE(static_cast<bool>(ls >> x >> target >> achieved));
      CHECK(std::abs(target - achieved) <= 1e-6);
      ++rows;
    }
    CHECK(rows == (std::string(name) == "plot_u.dat" ? 3 : 4));
  }
  const auto fields = read_csv(dir / "fields_achieved.csv");
  CHECK(fields[0] == std::vector<std::string>{"site", "x", "n", "u", "k_site", "e_P", "e_I", "e"});
  CHECK(fields[4][3].empty());  // no edge after the last site
}

TEST_CASE("thermo_scan writes per-beta plot files") {
  auto cfg = base();
  cfg["task"] = {{"type", "thermo_scan"}, {"alphas", {0.0, 0.5, 1.0}}, {"betas", {0.5, 1.0}}};
  const auto dir = scratch("scan");
  REQUIRE(run(cfg, dir).exit_code == exit_ok);
  CHECK(fs::exists(dir / "plot_N_alpha_beta0.dat"));
  CHECK(fs::exists(dir / "plot_N_alpha_beta1.dat"));
  CHECK(read_csv(dir / "thermo_scan.csv").size() == 7);
}

TEST_CASE("empty table gives a warning instead of a file") {
  auto cfg = base();
  cfg["task"] = {{"type", "validate"}, {"suites", json::array()}, {"random_states", 3}};
  const auto dir = scratch("empty");
  const auto r = run(cfg, dir);
  CHECK(r.exit_code == exit_ok);
  CHECK_FALSE(fs::exists(dir / "validate.csv"));
  const auto report = json::parse(slurp(dir / "report.json"));
  REQUIRE(report["warnings"].size() == 1);
  CHECK(report["warnings"][0].get<std::string>().find("validate.csv") != std::string::npos);
}

TEST_CASE("non-convergence is reported with residuals") {
  auto cfg = base();
  cfg["task"] = json::parse(R"({"type": "reconstruct",
      "reference": {"type": "fields", "n": [0.5, 1.5, 0.5, 0.2], "u": [0, 0, 0], "e": [2, 4, 2, 1]},
      "solver": {"max_iterations": 50}})");
  const auto dir = scratch("conv");
  const auto r = run(cfg, dir);
  CHECK(r.exit_code == exit_convergence);
  const auto report = json::parse(slurp(dir / "report.json"));
  CHECK(report["status"] == "no_convergence");
  CHECK(report["error"]["residual"].get<double>() > 1e-6);
}
