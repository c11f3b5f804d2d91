#include <algorithm>
#include <cmath>
#include <string>

#include "locgibbs/errors.hpp"
#include "locgibbs/solvers.hpp"

namespace locgibbs {

namespace {

// Root of a strictly decreasing function on [lo, hi] with value(lo) > target
// > value(hi). Runs to machine resolution of the bracket.
template <class F>
double bisect_decreasing(F value, double lo, double hi, double target) {
  for (int it = 0; it < 2000; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double v = value(mid);
    if (v == target) return mid;
    (v > target ? lo : hi) = mid;
  }
  return std::abs(value(lo) - target) <= std::abs(value(hi) - target) ? lo : hi;
}

void require_sorted(const std::vector<double>& grid, const char* what) {
  if (grid.empty()) throw InvalidArgument(std::string(what) + ": empty grid");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) {
      throw InvalidArgument(std::string(what) + ": grid must be strictly increasing");
    }
  }
}

}  // namespace

double solve_beta0(const ThermoModel& model, double a, double tol) {
  const double ground = model.spectrum().energies.minCoeff();
  const double upper = model.energy_upper_limit();
  if (!(a > ground) || !(a < upper)) {
    throw RangeError("solve_beta0: target energy " + std::to_string(a) +
                         " outside the attainable range (" + std::to_string(ground) + ", " +
                         std::to_string(upper) + ")",
                     ground, upper);
  }
  auto energy = [&](double beta) { return model.energy(0.0, beta); };

  double lo = 1.0;
  while (energy(lo) <= a) {
    lo *= 0.5;
    if (lo < 1e-300) throw RangeError("solve_beta0: could not bracket from below", ground, upper);
  }
  double hi = std::max(1.0, 2.0 * lo);
  while (energy(hi) >= a) {
    hi *= 2.0;
    if (hi > 1e12) throw RangeError("solve_beta0: could not bracket from above", ground, upper);
  }
  const double beta = bisect_decreasing(energy, lo, hi, a);
  const double residual = std::abs(energy(beta) - a);
  if (residual > tol * a) {
    throw ConvergenceError("solve_beta0: bisection stalled at |E - a| = " + std::to_string(residual),
                           residual, 0);
  }
  return beta;
}

double solve_alpha0(const ThermoModel& model, double beta, double a, double tol) {
  const double n0 = model.particles(0.0, beta);
  if (!(a > 0.0)) throw RangeError("solve_alpha0: target particle number must be > 0", 0.0, n0);
  if (std::abs(a - n0) <= tol * a) return 0.0;
  if (a > n0) {
    throw RangeError("solve_alpha0: target " + std::to_string(a) + " exceeds N(0, beta) = " +
                         std::to_string(n0) + "; lower beta",
                     0.0, n0);
  }
  auto particles = [&](double alpha) { return model.particles(alpha, beta); };
  double hi = 1.0;
  while (particles(hi) >= a) {
    hi *= 2.0;
    if (hi > 1e12) throw RangeError("solve_alpha0: could not bracket the root", 0.0, n0);
  }
  const double alpha = bisect_decreasing(particles, 0.0, hi, a);
  const double residual = std::abs(particles(alpha) - a);
  if (residual > tol * a) {
    throw ConvergenceError("solve_alpha0: bisection stalled at |N - a| = " + std::to_string(residual),
                           residual, 0);
  }
  return alpha;
}

std::vector<EntropyCurveRow> entropy_curve(const ThermoModel& model,
                                           const std::vector<double>& a_grid, double fd_step) {
  require_sorted(a_grid, "entropy_curve");
  auto f_of = [&](double a, double beta0) { return -model.log_z(0.0, beta0) - a * beta0; };
  std::vector<EntropyCurveRow> rows;
  rows.reserve(a_grid.size());
  for (double a : a_grid) {
    EntropyCurveRow row;
    row.a = a;
    row.beta0 = solve_beta0(model, a);
    row.f = f_of(a, row.beta0);
    row.s_check = entropy(model.state(0.0, row.beta0));
    const double d = fd_step * a;
    try {
      const double fp = f_of(a + d, solve_beta0(model, a + d));
      const double fm = f_of(a - d, solve_beta0(model, a - d));
      row.fd_slope = (fp - fm) / (2.0 * d);
    } catch (const RangeError&) {
      // neighbour outside the attainable range; slope left empty
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<FreeEnergyCurveRow> free_energy_curve(const ThermoModel& model, double beta,
                                                  const std::vector<double>& a_grid,
                                                  double fd_step) {
  require_sorted(a_grid, "free_energy_curve");
  if (!(beta > 0.0)) throw InvalidArgument("free_energy_curve: beta must be > 0");
  const double n0 = model.particles(0.0, beta);
  if (a_grid.back() > n0) {
    throw RangeError("free_energy_curve: beta = " + std::to_string(beta) +
                         " too large, N(0, beta) = " + std::to_string(n0) + " < " +
                         std::to_string(a_grid.back()),
                     0.0, n0);
  }
  auto beta_g = [&](double a, double alpha0) { return -model.log_z(alpha0, beta) - a * alpha0; };
  std::vector<FreeEnergyCurveRow> rows;
  rows.reserve(a_grid.size());
  for (double a : a_grid) {
    FreeEnergyCurveRow row;
    row.a = a;
    row.alpha0 = solve_alpha0(model, beta, a);
    row.g = beta_g(a, row.alpha0) / beta;
    row.f_check = entropy(model.state(row.alpha0, beta)) / beta + model.energy(row.alpha0, beta);
    const double d = fd_step * a;
    if (a + d <= n0 && a - d > 0.0) {
      const double gp = beta_g(a + d, solve_alpha0(model, beta, a + d));
      const double gm = beta_g(a - d, solve_alpha0(model, beta, a - d));
      row.fd_slope = (gp - gm) / (2.0 * d);
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace locgibbs
