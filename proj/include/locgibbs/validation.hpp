#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace locgibbs {

/// One measured quantity of a suite: pass when measured <= tolerance
/// (or the inverted comparison for lower bounds, already folded into pass).
struct CheckResult {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct SuiteResult {
  std::string name;
  int index = 0;
  std::string title;
  bool pass = false;
  double seconds = 0.0;
  std::vector<CheckResult> checks;
};

struct ValidationOptions {
  std::uint64_t seed = 20240917;
};

/// Suite names in acceptance order: free_fermion, monotonicity, derivatives,
/// kinetic, sum_rules, entropy_bound, reconstruction, global_local,
/// rdm_duality, stability.
const std::vector<std::string>& suite_names();

/// Runs one named suite. Throws InvalidArgument for an unknown name.
/// Exceptions raised inside a suite are recorded as failed checks.
SuiteResult run_suite(const std::string& name, const ValidationOptions& options = {});

}  // namespace locgibbs
