#pragma once

#include <limits>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "locgibbs/fock.hpp"
#include "locgibbs/types.hpp"

namespace locgibbs {

/// Hermitian, positive semidefinite, unit-trace matrix over a FockBasis.
class DensityMatrix {
 public:
  /// Validates Hermiticity, positivity and trace to `tol` (relative) and
  /// symmetrizes the stored matrix. Throws InvalidArgument otherwise.
  static DensityMatrix from_matrix(BasisPtr basis, ComplexMatrix matrix, double tol = 1e-10);

  /// Projector onto a (normalized on entry) basis vector or state vector.
  static DensityMatrix pure(BasisPtr basis, const ComplexVector& psi);
  static DensityMatrix maximally_mixed(BasisPtr basis);
  /// V diag(weights) V^+ for unitary V and a probability vector; the weights
  /// become the cached spectrum.
  static DensityMatrix from_spectral(BasisPtr basis, const ComplexMatrix& vectors,
                                     const RealVector& weights);

  const BasisPtr& basis() const { return basis_; }
  const ComplexMatrix& matrix() const { return matrix_; }
  Eigen::Index size() const { return matrix_.rows(); }

  /// Ascending eigenvalues, clamped to [0, 1].
  const RealVector& eigenvalues() const;
  /// Tr(A rho) for an operator on the same basis.
  double expectation(const FockOperator& op) const;

 private:
  DensityMatrix(BasisPtr basis, ComplexMatrix matrix)
      : basis_(std::move(basis)), matrix_(std::move(matrix)) {}

  BasisPtr basis_;
  ComplexMatrix matrix_;
  mutable std::optional<RealVector> eigenvalues_;
};

/// Convex combination c rho1 + (1 - c) rho2.
DensityMatrix mix(const DensityMatrix& rho1, const DensityMatrix& rho2, double c);

/// Random full-rank state G G^+ / Tr, G a complex Gaussian D x rank matrix.
/// rank = 0 means rank D.
DensityMatrix random_state(const BasisPtr& basis, std::mt19937_64& rng, Eigen::Index rank = 0);

/// Joint eigendecomposition of a particle-conserving operator and a commuting
/// number-like operator, computed sector by sector.
struct Spectrum {
  RealVector energies;
  RealVector particles;
  /// Eigenvectors as columns (block structure follows the sectors).
  ComplexMatrix vectors;
};

/// Diagonalizes a block-diagonal operator. `counter`, when given, must be
/// diagonal in the resulting eigenbasis; its eigenvalues fill `particles`.
/// Without it, `particles` holds the sector particle numbers.
Spectrum diagonalize(const FockOperator& op, const FockOperator* counter = nullptr);

struct GibbsSummary {
  double alpha = 0.0;
  double beta = 0.0;
  double log_z = 0.0;
  double particles = 0.0;
  double energy = 0.0;
  /// Tr(rho log rho), nonpositive.
  double entropy = 0.0;
};

struct GibbsOptions {
  /// Negative alpha is outside the physically stated domain; opt-in only.
  bool allow_negative_alpha = false;
};

/// Grand-canonical model exp(-beta H - alpha N) with a cached joint spectrum.
/// All thermodynamic functions are evaluated with a max-shifted log-sum-exp.
class ThermoModel {
 public:
  /// Throws InvalidArgument when the operators do not share a basis, are
  /// not particle conserving or do not commute.
  ThermoModel(const FockOperator& hamiltonian, const FockOperator& number,
              GibbsOptions options = {});

  const BasisPtr& basis() const { return basis_; }
  const Spectrum& spectrum() const { return spectrum_; }

  double log_z(double alpha, double beta) const;
  double particles(double alpha, double beta) const;
  double energy(double alpha, double beta) const;
  GibbsSummary summary(double alpha, double beta) const;
  DensityMatrix state(double alpha, double beta) const;

  /// Limits of E(0, beta) on the truncation: beta -> 0 gives the spectral
  /// mean, beta -> infinity gives the ground energy (0 with a zero vacuum).
  double energy_upper_limit() const;

 private:
  void check(double alpha, double beta) const;
  /// Normalized weights and log Z at (alpha, beta).
  std::pair<RealVector, double> weights(double alpha, double beta) const;

  BasisPtr basis_;
  Spectrum spectrum_;
  GibbsOptions options_;
};

/// rho_{alpha,beta} = exp(-beta H - alpha N) / Z and its summary.
std::pair<DensityMatrix, GibbsSummary> gibbs_state(const FockOperator& hamiltonian,
                                                   const FockOperator& number, double alpha,
                                                   double beta, GibbsOptions options = {});

/// S(rho) = sum rho_i log rho_i with 0 log 0 = 0.
double entropy(const DensityMatrix& rho);

/// F(rho, sigma) = Tr rho (log rho - log sigma); +infinity when the kernel of
/// sigma (eigenvalues below 1e-14 ||sigma||) carries weight of rho.
double relative_entropy(const DensityMatrix& rho, const DensityMatrix& sigma);

/// (1/2) || rho - sigma ||_1.
double trace_distance(const DensityMatrix& rho, const DensityMatrix& sigma);

struct ScanRow {
  GibbsSummary summary;
  /// Centered differences along the grid, present on interior points.
  std::optional<double> fd_particles;
  std::optional<double> fd_energy;
};

struct ThermoScan {
  std::vector<double> alphas;
  std::vector<double> betas;
  /// Row-major: rows[ia * betas.size() + ib].
  std::vector<ScanRow> rows;

  const ScanRow& at(std::size_t ia, std::size_t ib) const { return rows[ia * betas.size() + ib]; }
};

/// Summaries on the product grid plus -d logZ/d alpha and -d logZ/d beta by
/// centered differences between grid neighbours (omitted for axes with
/// fewer than 3 points).
ThermoScan thermo_scan(const ThermoModel& model, const std::vector<double>& alphas,
                       const std::vector<double>& betas);

struct EntropyBound {
  double lhs = 0.0;
  double rhs = 0.0;
  bool ok = false;
};

/// S(rho) >= -beta Tr(Hc rho) - log Tr exp(-beta Hc), tolerance 1e-9.
EntropyBound entropy_lower_bound_check(const DensityMatrix& rho, const FockOperator& confined,
                                       double beta);

}  // namespace locgibbs
