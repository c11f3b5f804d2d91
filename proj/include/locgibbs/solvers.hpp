#pragma once

#include <optional>
#include <vector>

#include "locgibbs/fock.hpp"
#include "locgibbs/gibbs.hpp"
#include "locgibbs/lattice.hpp"
#include "locgibbs/moments.hpp"

namespace locgibbs {

// ---------------------------------------------------------------------------
// Global problems: monotone root solves and the curves f(a), g(a).
// ---------------------------------------------------------------------------

/// beta0 with E(0, beta0) = a, |E - a| <= tol a. Brackets by halving and
/// doubling, then bisects to machine resolution.
/// Throws RangeError carrying the attainable interval when a is not inside
/// (ground energy, spectral mean).
double solve_beta0(const ThermoModel& model, double a, double tol = 1e-9);

/// alpha0 >= 0 with N(alpha0, beta) = a. Requires 0 < a <= N(0, beta);
/// a larger a throws RangeError (beta has to be lowered).
double solve_alpha0(const ThermoModel& model, double beta, double a, double tol = 1e-9);

struct EntropyCurveRow {
  double a = 0.0;
  double beta0 = 0.0;
  /// f(a) = -log Z(0, beta0) - a beta0
  double f = 0.0;
  /// Entropy of the assembled Gibbs state, computed from its eigenvalues.
  double s_check = 0.0;
  /// (f(a + d) - f(a - d)) / 2d with d = fd_step * a; compare with -beta0.
  std::optional<double> fd_slope;
};

std::vector<EntropyCurveRow> entropy_curve(const ThermoModel& model,
                                           const std::vector<double>& a_grid,
                                           double fd_step = 1e-3);

struct FreeEnergyCurveRow {
  double a = 0.0;
  double alpha0 = 0.0;
  /// g(a) = (-log Z(alpha0, beta) - a alpha0) / beta
  double g = 0.0;
  /// S / beta + E of the assembled Gibbs state.
  double f_check = 0.0;
  /// Centered difference of beta g; compare with -alpha0.
  std::optional<double> fd_slope;
};

/// Requires N(0, beta) >= max(a_grid); otherwise RangeError.
std::vector<FreeEnergyCurveRow> free_energy_curve(const ThermoModel& model, double beta,
                                                  const std::vector<double>& a_grid,
                                                  double fd_step = 1e-3);

// ---------------------------------------------------------------------------
// Local problem: dual ascent over multiplier fields.
// ---------------------------------------------------------------------------

/// One multiplier per constrained scalar: sites for n and e, edges for u.
struct MultiplierFields {
  RealVector lam_n;
  RealVector lam_u;
  RealVector lam_e;

  static MultiplierFields zeros(std::size_t m);
  /// lam_n = alpha, lam_e = beta, lam_u = 0: the dual Hamiltonian is then
  /// beta H + alpha N.
  static MultiplierFields uniform(std::size_t m, double alpha, double beta);

  RealVector flatten() const;
  static MultiplierFields unflatten(std::size_t m, const RealVector& flat);
  double max_norm() const { return flatten().cwiseAbs().maxCoeff(); }
};

/// Fock-space operators G_k whose expectations are h times the constrained
/// fields: Tr(G_k rho) = h F_k(rho) for F = (n, u, e) flattened in that order.
/// The dual Hamiltonian is M[lambda] = sum_k lambda_k G_k, so that
/// Tr(M[lambda] rho) = h <lambda, F(rho)>.
class ConstraintOperators {
 public:
  ConstraintOperators(const LatticeSpec& spec, BasisPtr basis);

  Eigen::Index count() const { return static_cast<Eigen::Index>(ops_.size()); }
  const std::vector<FockOperator>& operators() const { return ops_; }
  const LatticeSpec& spec() const { return spec_; }
  const BasisPtr& basis() const { return basis_; }

  FockOperator dual_hamiltonian(const MultiplierFields& lambda) const;
  /// (n, u, e) flattened from moment fields.
  static RealVector flatten(const MomentFields& fields);

 private:
  LatticeSpec spec_;
  BasisPtr basis_;
  std::vector<FockOperator> ops_;
};

enum class InitPolicy { global_presolve, zero, custom };

struct ReconstructOptions {
  int max_iterations = 500;
  /// Max-norm of the (n, u, e) residual, field units.
  double tolerance = 1e-6;
  double lambda_cap = 1e4;
  bool newton = true;
  double newton_condition_limit = 1e8;
  double armijo = 1e-4;
  InitPolicy init = InitPolicy::global_presolve;
  std::optional<MultiplierFields> initial;
};

struct TraceRow {
  int iteration = 0;
  double dual_value = 0.0;
  double residual_norm = 0.0;
  double step = 0.0;
  bool newton = false;
};

struct DualState {
  MultiplierFields lambda;
  DensityMatrix rho;
  MomentFields achieved;
  MomentFields residual;
  double residual_norm = 0.0;
  /// d(lambda) = -log Z(lambda) - h <lambda, targets>
  double dual_value = 0.0;
  double log_z = 0.0;
  int iterations = 0;
  std::vector<TraceRow> trace;
};

/// Uniform (alpha, beta) whose Gibbs state matches the total particle number
/// and total energy of the targets. Falls back to nullopt when the 2D dual
/// does not converge.
std::optional<std::pair<double, double>> global_presolve(const ConstraintOperators& ops,
                                                         const MomentFields& targets);

/// Maximizes the concave dual d(lambda) = -log Z(lambda) - h <lambda, targets>
/// with Z(lambda) = Tr exp(-M[lambda]). The gradient is h (F(rho(lambda)) -
/// targets). Newton steps use the Kubo-Mori Hessian when it is well
/// conditioned, gradient steps otherwise; both with Armijo backtracking.
///
/// Throws InvalidArgument for targets with negative density or wrong sizes,
/// ConvergenceError when the iteration cap is hit or the multipliers blow up
/// without progress.
DualState local_gibbs_reconstruct(const LatticeSpec& spec, const BasisPtr& basis,
                                  const MomentFields& targets, const ReconstructOptions& opts = {});

DualState local_gibbs_reconstruct(const ConstraintOperators& ops, const MomentFields& targets,
                                  const ReconstructOptions& opts = {});

}  // namespace locgibbs
