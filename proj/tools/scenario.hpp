#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "locgibbs/errors.hpp"
#include "locgibbs/lattice.hpp"
#include "locgibbs/solvers.hpp"

namespace locgibbs::cli {

enum ExitCode : int {
  exit_ok = 0,
  exit_failed_check = 1,
  exit_schema = 2,
  exit_dimension = 3,
  exit_convergence = 4,
};

/// Config that does not follow the schema. `key` is the dotted path of the
/// offending entry.
class SchemaError : public Error {
 public:
  SchemaError(const std::string& key, const std::string& what)
      : Error(key + ": " + what), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct LatticeConfig {
  std::size_t m = 4;
  double h = 1.0;
  double kappa = 0.5;
  double w0 = 1.0;
  double r0 = 1.0;
  double tilt = 0.0;
  LatticeSpec spec() const;
};

struct FockConfig {
  Statistics statistics = Statistics::fermionic;
  std::size_t n_max = 4;
  std::size_t dimension_cap = 20000;
};

struct ThermoScanTask {
  std::vector<double> alphas;
  std::vector<double> betas;
  bool allow_negative_alpha = false;
};

struct EntropyCurveTask {
  std::vector<double> a_grid;
  double fd_step = 1e-3;
};

struct FreeEnergyCurveTask {
  double beta = 1.0;
  std::vector<double> a_grid;
  double fd_step = 1e-3;
};

struct Reference {
  enum class Kind { gibbs, random_multipliers, fields };
  Kind kind = Kind::gibbs;
  // gibbs: exp(-beta H' - alpha N) with H' the lattice Hamiltonian plus a
  // linear tilt and a next-nearest-neighbour hopping
  double alpha = 0.0;
  double beta = 1.0;
  double tilt = 0.0;
  double hopping2 = 0.0;
  // random_multipliers: uniform (alpha, beta) plus uniform noise of this size
  double amplitude = 0.5;
  // fields: explicit targets
  RealVector n, u, e;
};

struct ReconstructTask {
  Reference reference;
  ReconstructOptions options;
};

struct ValidateTask {
  std::vector<std::string> suites;
  int random_states = 20;
};

using Task = std::variant<ThermoScanTask, EntropyCurveTask, FreeEnergyCurveTask, ReconstructTask,
                          ValidateTask>;

struct ScenarioConfig {
  LatticeConfig lattice;
  FockConfig fock;
  Task task;
  std::string task_name;
  std::string out_dir = "out";
  bool plot_data = true;
  std::uint64_t seed = 1;
  nlohmann::json echo;
};

/// Schema validation. Throws SchemaError naming the offending key.
ScenarioConfig parse_config(const nlohmann::json& config);

struct RunResult {
  int exit_code = exit_ok;
  nlohmann::json report;
  std::vector<std::string> files;
};

/// Builds the instance, checks task ranges against it, then computes and
/// writes outputs. Nothing is written when the preparation phase fails.
RunResult run_scenario(const ScenarioConfig& config, std::ostream& log);

/// "%.17g" formatting used for every number in CSV output.
std::string format17(double value);

}  // namespace locgibbs::cli
