#include "locgibbs/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "locgibbs/errors.hpp"

namespace locgibbs {

namespace {

double log_sum_exp_neg(const RealVector& exponents) {
  const double shift = exponents.minCoeff();
  return -shift + std::log((-(exponents.array() - shift)).exp().sum());
}

Eigen::SelfAdjointEigenSolver<ComplexMatrix> eigen_or_throw(const ComplexMatrix& m,
                                                            const char* what) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(m);
  if (solver.info() != Eigen::Success) throw Error(std::string(what) + ": eigensolver failed");
  return solver;
}

}  // namespace

DensityMatrix DensityMatrix::from_matrix(BasisPtr basis, ComplexMatrix matrix, double tol) {
  if (!basis) throw InvalidArgument("density matrix: null basis");
  if (matrix.rows() != basis->size() || matrix.cols() != basis->size()) {
    throw InvalidArgument("density matrix: size does not match basis dimension " +
                          std::to_string(basis->dimension()));
  }
  const double scale = std::max(1.0, matrix.cwiseAbs().maxCoeff());
  if ((matrix - matrix.adjoint()).cwiseAbs().maxCoeff() > tol * scale) {
    throw InvalidArgument("density matrix: not Hermitian");
  }
  ComplexMatrix sym = 0.5 * (matrix + matrix.adjoint());
  const Complex tr = sym.trace();
  if (std::abs(tr - Complex(1.0, 0.0)) > tol) {
    throw InvalidArgument("density matrix: trace " + std::to_string(tr.real()) + " is not 1");
  }
  DensityMatrix rho(std::move(basis), std::move(sym));
  auto solver = eigen_or_throw(rho.matrix_, "density matrix");
  if (solver.eigenvalues().minCoeff() < -tol) {
    throw InvalidArgument("density matrix: negative eigenvalue " +
                          std::to_string(solver.eigenvalues().minCoeff()));
  }
  rho.eigenvalues_ = solver.eigenvalues().cwiseMax(0.0).cwiseMin(1.0);
  return rho;
}

DensityMatrix DensityMatrix::pure(BasisPtr basis, const ComplexVector& psi) {
  const double norm = psi.norm();
  if (!(norm > 0.0)) throw InvalidArgument("density matrix: zero state vector");
  const ComplexVector v = psi / norm;
  return from_matrix(std::move(basis), v * v.adjoint());
}

DensityMatrix DensityMatrix::maximally_mixed(BasisPtr basis) {
  if (!basis) throw InvalidArgument("density matrix: null basis");
  const auto d = basis->size();
  ComplexMatrix m = ComplexMatrix::Identity(d, d) / static_cast<double>(d);
  return from_matrix(std::move(basis), std::move(m));
}

DensityMatrix DensityMatrix::from_spectral(BasisPtr basis, const ComplexMatrix& vectors,
                                           const RealVector& weights) {
  if (!basis || vectors.rows() != basis->size() || weights.size() != vectors.cols()) {
    throw InvalidArgument("density matrix: spectral data does not match basis");
  }
  if ((weights.array() < 0.0).any() || std::abs(weights.sum() - 1.0) > 1e-10) {
    throw InvalidArgument("density matrix: weights are not a probability vector");
  }
  ComplexMatrix m = vectors * weights.cast<Complex>().asDiagonal() * vectors.adjoint();
  m = 0.5 * (m + m.adjoint()).eval();
  DensityMatrix rho(std::move(basis), std::move(m));
  RealVector sorted = weights;
  std::sort(sorted.begin(), sorted.end());
  rho.eigenvalues_ = sorted.cwiseMin(1.0);
  return rho;
}

const RealVector& DensityMatrix::eigenvalues() const {
  if (!eigenvalues_) {
    eigenvalues_ = eigen_or_throw(matrix_, "density matrix").eigenvalues().cwiseMax(0.0).cwiseMin(1.0);
  }
  return *eigenvalues_;
}

double DensityMatrix::expectation(const FockOperator& op) const {
  if (!op.basis || !(*op.basis == *basis_)) {
    throw InvalidArgument("expectation: operator and state live on different bases");
  }
  // Tr(A rho) = sum_ij A_ij rho_ji
  return (op.matrix.cwiseProduct(matrix_.transpose())).sum().real();
}

DensityMatrix mix(const DensityMatrix& rho1, const DensityMatrix& rho2, double c) {
  if (!(*rho1.basis() == *rho2.basis())) throw InvalidArgument("mix: different bases");
  return DensityMatrix::from_matrix(rho1.basis(), c * rho1.matrix() + (1.0 - c) * rho2.matrix());
}

DensityMatrix random_state(const BasisPtr& basis, std::mt19937_64& rng, Eigen::Index rank) {
  if (!basis) throw InvalidArgument("random_state: null basis");
  const auto d = basis->size();
  if (rank <= 0 || rank > d) rank = d;
  std::normal_distribution<double> gauss(0.0, 1.0);
  ComplexMatrix g(d, rank);
  for (Eigen::Index c = 0; c < rank; ++c) {
    for (Eigen::Index r = 0; r < d; ++r) g(r, c) = Complex(gauss(rng), gauss(rng));
  }
  ComplexMatrix m = g * g.adjoint();
  m /= m.trace().real();
  return DensityMatrix::from_matrix(basis, std::move(m));
}

Spectrum diagonalize(const FockOperator& op, const FockOperator* counter) {
  if (!op.basis) throw InvalidArgument("diagonalize: null basis");
  if (!op.block_diagonal && !op.conserves_particle_number()) {
    throw InvalidArgument("diagonalize: operator does not conserve particle number");
  }
  const auto d = op.basis->size();
  Spectrum out{RealVector::Zero(d), RealVector::Zero(d), ComplexMatrix::Zero(d, d)};
  for (const auto& sector : op.basis->sectors()) {
    if (sector.size == 0) continue;
    const auto off = static_cast<Eigen::Index>(sector.offset);
    const auto len = static_cast<Eigen::Index>(sector.size);
    auto solver = eigen_or_throw(op.sector_block(sector), "diagonalize");
    out.energies.segment(off, len) = solver.eigenvalues();
    out.vectors.block(off, off, len, len) = solver.eigenvectors();
    out.particles.segment(off, len).setConstant(static_cast<double>(sector.particles));
  }
  if (counter != nullptr) {
    const double scale = std::max(1.0, counter->matrix.cwiseAbs().maxCoeff());
    for (Eigen::Index l = 0; l < d; ++l) {
      const ComplexVector v = out.vectors.col(l);
      const ComplexVector cv = counter->matrix * v;
      const double n = v.dot(cv).real();
      if ((cv - n * v).norm() > 1e-8 * scale) {
        throw InvalidArgument("diagonalize: counter operator is not diagonal in the eigenbasis");
      }
      out.particles[l] = n;
    }
  }
  return out;
}

ThermoModel::ThermoModel(const FockOperator& hamiltonian, const FockOperator& number,
                         GibbsOptions options)
    : basis_(hamiltonian.basis), options_(options) {
  if (!hamiltonian.basis || !number.basis || !(*hamiltonian.basis == *number.basis)) {
    throw InvalidArgument("gibbs: H and N must share a basis");
  }
  const double scale = std::max({1.0, hamiltonian.matrix.cwiseAbs().maxCoeff(),
                                 number.matrix.cwiseAbs().maxCoeff()});
  const ComplexMatrix comm =
      hamiltonian.matrix * number.matrix - number.matrix * hamiltonian.matrix;
  if (comm.size() > 0 && comm.cwiseAbs().maxCoeff() > 1e-10 * scale * scale) {
    throw InvalidArgument("gibbs: H and N do not commute");
  }
  spectrum_ = diagonalize(hamiltonian, &number);
}

void ThermoModel::check(double alpha, double beta) const {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw InvalidArgument("gibbs: beta must be > 0, got " + std::to_string(beta));
  }
  if (!std::isfinite(alpha) || (alpha < 0.0 && !options_.allow_negative_alpha)) {
    throw InvalidArgument("gibbs: alpha must be >= 0, got " + std::to_string(alpha));
  }
}

std::pair<RealVector, double> ThermoModel::weights(double alpha, double beta) const {
  check(alpha, beta);
  const RealVector x = beta * spectrum_.energies + alpha * spectrum_.particles;
  const double shift = x.minCoeff();
  RealVector w = (-(x.array() - shift)).exp();
  const double sum = w.sum();
  w /= sum;
  return {std::move(w), -shift + std::log(sum)};
}

double ThermoModel::log_z(double alpha, double beta) const {
  check(alpha, beta);
  return log_sum_exp_neg(beta * spectrum_.energies + alpha * spectrum_.particles);
}

double ThermoModel::particles(double alpha, double beta) const {
  return weights(alpha, beta).first.dot(spectrum_.particles);
}

double ThermoModel::energy(double alpha, double beta) const {
  return weights(alpha, beta).first.dot(spectrum_.energies);
}

GibbsSummary ThermoModel::summary(double alpha, double beta) const {
  const auto [p, log_z] = weights(alpha, beta);
  GibbsSummary s;
  s.alpha = alpha;
  s.beta = beta;
  s.log_z = log_z;
  s.particles = p.dot(spectrum_.particles);
  s.energy = p.dot(spectrum_.energies);
  double ent = 0.0;
  for (Eigen::Index l = 0; l < p.size(); ++l) {
    if (p[l] > 0.0) ent += p[l] * std::log(p[l]);
  }
  s.entropy = ent;
  return s;
}

DensityMatrix ThermoModel::state(double alpha, double beta) const {
  return DensityMatrix::from_spectral(basis_, spectrum_.vectors, weights(alpha, beta).first);
}

double ThermoModel::energy_upper_limit() const { return spectrum_.energies.mean(); }

std::pair<DensityMatrix, GibbsSummary> gibbs_state(const FockOperator& hamiltonian,
                                                   const FockOperator& number, double alpha,
                                                   double beta, GibbsOptions options) {
  ThermoModel model(hamiltonian, number, options);
  return {model.state(alpha, beta), model.summary(alpha, beta)};
}

double entropy(const DensityMatrix& rho) {
  double s = 0.0;
  for (double p : rho.eigenvalues()) {
    if (p > 0.0) s += p * std::log(p);
  }
  return s;
}

double relative_entropy(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (!(*rho.basis() == *sigma.basis())) throw InvalidArgument("relative entropy: different bases");
  const auto sig = eigen_or_throw(sigma.matrix(), "relative entropy");
  const RealVector& s = sig.eigenvalues();
  const double kernel = 1e-14 * std::max(s.cwiseAbs().maxCoeff(), 0.0);
  // Weight of rho on each eigenvector of sigma.
  const ComplexMatrix& w = sig.eigenvectors();
  const RealVector weight = (w.adjoint() * rho.matrix() * w).diagonal().real();
  double cross = 0.0;
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    if (s[j] <= kernel) {
      if (weight[j] > 1e-12) return std::numeric_limits<double>::infinity();
      continue;
    }
    cross += weight[j] * std::log(s[j]);
  }
  return entropy(rho) - cross;
}

double trace_distance(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (!(*rho.basis() == *sigma.basis())) throw InvalidArgument("trace distance: different bases");
  const ComplexMatrix diff = rho.matrix() - sigma.matrix();
  return 0.5 * eigen_or_throw(diff, "trace distance").eigenvalues().cwiseAbs().sum();
}

ThermoScan thermo_scan(const ThermoModel& model, const std::vector<double>& alphas,
                       const std::vector<double>& betas) {
  if (alphas.empty() || betas.empty()) throw InvalidArgument("thermo_scan: empty grid");
  ThermoScan scan{alphas, betas, {}};
  scan.rows.reserve(alphas.size() * betas.size());
  std::vector<double> log_z(alphas.size() * betas.size());
  for (std::size_t ia = 0; ia < alphas.size(); ++ia) {
    for (std::size_t ib = 0; ib < betas.size(); ++ib) {
      ScanRow row{model.summary(alphas[ia], betas[ib]), std::nullopt, std::nullopt};
      log_z[ia * betas.size() + ib] = row.summary.log_z;
      scan.rows.push_back(row);
    }
  }
  auto lz = [&](std::size_t ia, std::size_t ib) { return log_z[ia * betas.size() + ib]; };
  for (std::size_t ia = 0; ia < alphas.size(); ++ia) {
    for (std::size_t ib = 0; ib < betas.size(); ++ib) {
      auto& row = scan.rows[ia * betas.size() + ib];
      if (alphas.size() >= 3 && ia > 0 && ia + 1 < alphas.size()) {
        row.fd_particles = -(lz(ia + 1, ib) - lz(ia - 1, ib)) / (alphas[ia + 1] - alphas[ia - 1]);
      }
      if (betas.size() >= 3 && ib > 0 && ib + 1 < betas.size()) {
        row.fd_energy = -(lz(ia, ib + 1) - lz(ia, ib - 1)) / (betas[ib + 1] - betas[ib - 1]);
      }
    }
  }
  return scan;
}

EntropyBound entropy_lower_bound_check(const DensityMatrix& rho, const FockOperator& confined,
                                       double beta) {
  if (!(beta > 0.0)) throw InvalidArgument("entropy bound: beta must be > 0");
  const Spectrum spec = diagonalize(confined);
  EntropyBound out;
  out.lhs = entropy(rho);
  out.rhs = -beta * rho.expectation(confined) - log_sum_exp_neg(beta * spec.energies);
  out.ok = out.lhs >= out.rhs - 1e-9;
  return out;
}

}  // namespace locgibbs
