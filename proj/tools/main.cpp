#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "locgibbs/validation.hpp"
#include "scenario.hpp"

using namespace locgibbs;

namespace {

int run_command(const std::string& path, const std::string& out, std::optional<std::uint64_t> seed,
                int threads) {
  nlohmann::json config;
  {
    std::ifstream f(path);
    if (!f) {
      std::cerr << "cannot read config " << path << '\n';
      return cli::exit_schema;
    }
    try {
      f >> config;
    } catch (const nlohmann::json::parse_error& e) {
      std::cerr << "config is not valid JSON: " << e.what() << '\n';
      return cli::exit_schema;
    }
  }
  cli::ScenarioConfig scenario;
  try {
    scenario = cli::parse_config(config);
  } catch (const cli::SchemaError& e) {
    std::cerr << "schema error at " << e.what() << '\n';
    return cli::exit_schema;
  }
  if (!out.empty()) scenario.out_dir = out;
  if (seed) scenario.seed = *seed;
  // Eigen runs single-threaded unless built with OpenMP
  Eigen::setNbThreads(threads);

  const auto result = cli::run_scenario(scenario, std::cerr);
  for (const auto& c : result.report.value("checks", nlohmann::json::array())) {
    std::printf("%s %-55s measured %-12.4g limit %.3g\n", c["pass"].get<bool>() ? "ok  " : "FAIL",
                c["name"].get<std::string>().c_str(), c["measured"].get<double>(),
                c["tolerance"].get<double>());
  }
  if (!result.files.empty()) {
    std::printf("wrote %zu files to %s\n", result.files.size(), scenario.out_dir.c_str());
  }
  std::printf("status: %s\n", result.report.value("status", "unknown").c_str());
  return result.exit_code;
}

int validate_command(const std::vector<std::string>& suites, std::uint64_t seed) {
  ValidationOptions opts;
  opts.seed = seed;
  int failed = 0;
  for (const auto& name : suites.empty() ? suite_names() : suites) {
    SuiteResult r;
    try {
      r = run_suite(name, opts);
    } catch (const InvalidArgument& e) {
      std::cerr << e.what() << '\n';
      return cli::exit_schema;
    }
    std::printf("%s %-15s %-42s %.3f s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.title.c_str(), r.seconds);
    for (const auto& c : r.checks) {
      std::printf("     %s %-48s measured %-12.4g limit %.3g\n", c.pass ? "ok  " : "FAIL", c.name.c_str(),
                  c.measured, c.tolerance);
    }
    if (!r.pass) ++failed;
  }
  return failed ? cli::exit_failed_check : cli::exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Local Gibbs states on a discretized Fock space"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run a JSON scenario");
  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  int threads = 1;
  run->add_option("config", config_path, "scenario config (JSON)")->required();
  run->add_option("--out", out_dir, "output directory (overrides output.directory)");
  auto* seed_opt = run->add_option("--seed", seed, "seed (overrides the config)");
  run->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand("validate", "run the acceptance suites");
  std::vector<std::string> suites;
  std::uint64_t validate_seed = ValidationOptions{}.seed;
  validate->add_option("--suite", suites, "suite name (repeatable)")->check(CLI::IsMember(suite_names()));
  validate->add_option("--seed", validate_seed, "seed for randomized suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::exit_schema;
  }

  try {
    if (*run) {
      std::optional<std::uint64_t> s;
      if (*seed_opt) s = seed;
      return run_command(config_path, out_dir, s, threads);
    }
    return validate_command(suites, validate_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::exit_failed_check;
  }
}
