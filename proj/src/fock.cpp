#include "locgibbs/fock.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "locgibbs/errors.hpp"

namespace locgibbs {

namespace {

double binomial(double n, double k) {
  if (k < 0 || k > n) return 0.0;
  return std::round(std::exp(std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1)));
}

// Occupations with total `remaining` on modes [mode, m), first modes filled
// first so the output is in descending lexicographic order.
void fill_sector(std::size_t m, std::size_t mode, int remaining, int per_mode_cap,
                 Occupation& current, std::vector<Occupation>& out) {
  if (mode + 1 == m) {
    if (remaining <= per_mode_cap) {
      current[mode] = remaining;
      out.push_back(current);
      current[mode] = 0;
    }
    return;
  }
  for (int k = std::min(remaining, per_mode_cap); k >= 0; --k) {
    current[mode] = k;
    fill_sector(m, mode + 1, remaining - k, per_mode_cap, current, out);
  }
  current[mode] = 0;
}

int occupied_before(const Occupation& state, std::size_t mode) {
  int count = 0;
  for (std::size_t k = 0; k < mode; ++k) count += state[k];
  return count;
}

void require_basis(const BasisPtr& basis) {
  if (!basis) throw InvalidArgument("fock: null basis");
}

}  // namespace

double FockBasis::dimension_of(Statistics statistics, std::size_t m, std::size_t n_max) {
  if (statistics == Statistics::fermionic) n_max = std::min(n_max, m);
  double total = 0.0;
  for (std::size_t n = 0; n <= n_max; ++n) {
    total += statistics == Statistics::fermionic
                 ? binomial(static_cast<double>(m), static_cast<double>(n))
                 : binomial(static_cast<double>(m + n) - 1.0, static_cast<double>(n));
  }
  return total;
}

std::shared_ptr<const FockBasis> FockBasis::enumerate(Statistics statistics, std::size_t m,
                                                      std::size_t n_max,
                                                      std::size_t dimension_cap) {
  if (m < 1) throw InvalidArgument("fock: need at least one mode");
  if (statistics == Statistics::fermionic) n_max = std::min(n_max, m);
  const double dim = dimension_of(statistics, m, n_max);
  if (dim > static_cast<double>(dimension_cap)) {
    throw DimensionCapExceeded("fock: truncated dimension " + std::to_string(static_cast<long long>(dim)) +
                               " exceeds cap " + std::to_string(dimension_cap));
  }

  std::shared_ptr<FockBasis> basis(new FockBasis());
  basis->statistics_ = statistics;
  basis->modes_ = m;
  basis->n_max_ = n_max;
  const int cap = statistics == Statistics::fermionic ? 1 : static_cast<int>(n_max);
  Occupation scratch(m, 0);
  for (std::size_t n = 0; n <= n_max; ++n) {
    const std::size_t offset = basis->states_.size();
    fill_sector(m, 0, static_cast<int>(n), cap, scratch, basis->states_);
    basis->sectors_.push_back({n, offset, basis->states_.size() - offset});
  }
  basis->particles_.reserve(basis->states_.size());
  for (std::size_t i = 0; i < basis->states_.size(); ++i) {
    const auto& s = basis->states_[i];
    basis->particles_.push_back(occupied_before(s, s.size()));
    basis->index_.emplace(s, i);
  }
  return basis;
}

std::optional<std::size_t> FockBasis::index_of(const Occupation& occupation) const {
  auto it = index_.find(occupation);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<double> annihilate(Statistics statistics, Occupation& state, std::size_t mode) {
  const int n = state[mode];
  if (n == 0) return std::nullopt;
  double amplitude;
  if (statistics == Statistics::fermionic) {
    amplitude = occupied_before(state, mode) % 2 == 0 ? 1.0 : -1.0;
  } else {
    amplitude = std::sqrt(static_cast<double>(n));
  }
  state[mode] = n - 1;
  return amplitude;
}

std::optional<double> create(Statistics statistics, Occupation& state, std::size_t mode) {
  const int n = state[mode];
  double amplitude;
  if (statistics == Statistics::fermionic) {
    if (n == 1) return std::nullopt;
    amplitude = occupied_before(state, mode) % 2 == 0 ? 1.0 : -1.0;
  } else {
    amplitude = std::sqrt(static_cast<double>(n + 1));
  }
  state[mode] = n + 1;
  return amplitude;
}

PairBasis PairBasis::make(Statistics statistics, std::size_t m) {
  PairBasis pb;
  pb.statistics = statistics;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = statistics == Statistics::fermionic ? i + 1 : i; j < m; ++j) {
      pb.pairs.emplace_back(i, j);
    }
  }
  return pb;
}

std::optional<double> annihilate_pair(Statistics statistics, Occupation& state,
                                      std::pair<std::size_t, std::size_t> pair) {
  // (a+_i a+_j)^dagger = a_j a_i: a_i acts first.
  auto first = annihilate(statistics, state, pair.first);
  if (!first) return std::nullopt;
  auto second = annihilate(statistics, state, pair.second);
  if (!second) return std::nullopt;
  double amplitude = *first * *second;
  if (pair.first == pair.second) amplitude /= std::sqrt(2.0);
  return amplitude;
}

ComplexMatrix FockOperator::sector_block(const FockBasis::Sector& sector) const {
  const auto off = static_cast<Eigen::Index>(sector.offset);
  const auto len = static_cast<Eigen::Index>(sector.size);
  return matrix.block(off, off, len, len);
}

bool FockOperator::is_hermitian(double tol) const {
  if (matrix.rows() != matrix.cols()) return false;
  if (matrix.size() == 0) return true;
  const double scale = std::max(1.0, matrix.cwiseAbs().maxCoeff());
  return (matrix - matrix.adjoint()).cwiseAbs().maxCoeff() <= tol * scale;
}

bool FockOperator::conserves_particle_number() const {
  for (Eigen::Index c = 0; c < matrix.cols(); ++c) {
    for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
      if (basis->particles(static_cast<std::size_t>(r)) != basis->particles(static_cast<std::size_t>(c)) &&
          matrix(r, c) != Complex(0.0, 0.0)) {
        return false;
      }
    }
  }
  return true;
}

FockOperator operator+(const FockOperator& a, const FockOperator& b) {
  if (!a.basis || !b.basis || !(*a.basis == *b.basis)) {
    throw InvalidArgument("fock: operators live on different bases");
  }
  return {a.basis, a.matrix + b.matrix, a.block_diagonal && b.block_diagonal};
}

FockOperator operator*(double scale, const FockOperator& a) {
  return {a.basis, scale * a.matrix, a.block_diagonal};
}

FockOperator second_quantize_onebody(const OneBodyOperator& a, const BasisPtr& basis) {
  require_basis(basis);
  const auto m = static_cast<Eigen::Index>(basis->modes());
  if (a.matrix.rows() != m || a.matrix.cols() != m) {
    throw InvalidArgument("fock: one-body operator is " + std::to_string(a.matrix.rows()) + "x" +
                          std::to_string(a.matrix.cols()) + ", basis has " + std::to_string(m) +
                          " modes");
  }
  const auto stats = basis->statistics();
  FockOperator out{basis, ComplexMatrix::Zero(basis->size(), basis->size()), true};
  for (std::size_t s = 0; s < basis->dimension(); ++s) {
    for (Eigen::Index j = 0; j < m; ++j) {
      Occupation lowered = basis->state(s);
      auto amp_j = annihilate(stats, lowered, static_cast<std::size_t>(j));
      if (!amp_j) continue;
      for (Eigen::Index i = 0; i < m; ++i) {
        const Complex aij = a.matrix(i, j);
        if (aij == Complex(0.0, 0.0)) continue;
        Occupation raised = lowered;
        auto amp_i = create(stats, raised, static_cast<std::size_t>(i));
        if (!amp_i) continue;
        auto target = basis->index_of(raised);
        if (!target) continue;
        out.matrix(static_cast<Eigen::Index>(*target), static_cast<Eigen::Index>(s)) +=
            aij * (*amp_i * *amp_j);
      }
    }
  }
  return out;
}

FockOperator second_quantize_pair_operator(const ComplexMatrix& a, const BasisPtr& basis) {
  require_basis(basis);
  const auto stats = basis->statistics();
  const PairBasis pb = PairBasis::make(stats, basis->modes());
  if (a.rows() != pb.size() || a.cols() != pb.size()) {
    throw InvalidArgument("fock: pair operator must be " + std::to_string(pb.size()) + "x" +
                          std::to_string(pb.size()));
  }
  FockOperator out{basis, ComplexMatrix::Zero(basis->size(), basis->size()), true};
  for (std::size_t s = 0; s < basis->dimension(); ++s) {
    for (Eigen::Index q = 0; q < pb.size(); ++q) {
      Occupation lowered = basis->state(s);
      auto amp_q = annihilate_pair(stats, lowered, pb.pairs[static_cast<std::size_t>(q)]);
      if (!amp_q) continue;
      for (Eigen::Index p = 0; p < pb.size(); ++p) {
        const Complex apq = a(p, q);
        if (apq == Complex(0.0, 0.0)) continue;
        // c+_p = (a+_i a+_j) normalized; create j first, then i.
        const auto [i, j] = pb.pairs[static_cast<std::size_t>(p)];
        Occupation raised = lowered;
        auto amp_j = create(stats, raised, j);
        if (!amp_j) continue;
        auto amp_i = create(stats, raised, i);
        if (!amp_i) continue;
        double amp = *amp_i * *amp_j;
        if (i == j) amp /= std::sqrt(2.0);
        auto target = basis->index_of(raised);
        if (!target) continue;
        out.matrix(static_cast<Eigen::Index>(*target), static_cast<Eigen::Index>(s)) +=
            apq * (amp * *amp_q);
      }
    }
  }
  return out;
}

RealVector pair_interaction_diagonal(
    const FockBasis& basis, const std::function<double(std::size_t, std::size_t)>& weight) {
  const std::size_t m = basis.modes();
  RealVector diag = RealVector::Zero(basis.size());
  for (std::size_t s = 0; s < basis.dimension(); ++s) {
    const Occupation& occ = basis.state(s);
    double value = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (occ[i] == 0) continue;
      value += weight(i, i) * occ[i] * (occ[i] - 1) / 2.0;
      for (std::size_t j = i + 1; j < m; ++j) {
        if (occ[j] != 0) value += weight(i, j) * occ[i] * occ[j];
      }
    }
    diag[static_cast<Eigen::Index>(s)] = value;
  }
  return diag;
}

FockOperator second_quantize_twobody(const RealVector& w_table, const BasisPtr& basis) {
  require_basis(basis);
  if (w_table.size() < static_cast<Eigen::Index>(basis->modes())) {
    throw InvalidArgument("fock: w_table must cover distances 0..m-1");
  }
  const RealVector diag = pair_interaction_diagonal(*basis, [&](std::size_t i, std::size_t j) {
    return w_table[static_cast<Eigen::Index>(i > j ? i - j : j - i)];
  });
  FockOperator out{basis, ComplexMatrix::Zero(basis->size(), basis->size()), true};
  out.matrix.diagonal() = diag.cast<Complex>();
  return out;
}

FockOperator number_operator(const BasisPtr& basis) {
  require_basis(basis);
  FockOperator out{basis, ComplexMatrix::Zero(basis->size(), basis->size()), true};
  for (std::size_t s = 0; s < basis->dimension(); ++s) {
    out.matrix(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s)) = basis->particles(s);
  }
  return out;
}

namespace {

void require_matching(const LatticeSpec& spec, const BasisPtr& basis) {
  require_basis(basis);
  if (spec.m != basis->modes()) {
    throw InvalidArgument("fock: lattice has " + std::to_string(spec.m) + " sites, basis has " +
                          std::to_string(basis->modes()) + " modes");
  }
}

}  // namespace

StabilityCertificate certify_stability(const LatticeSpec& spec, const BasisPtr& basis) {
  require_matching(spec, basis);
  spec.validate();
  StabilityCertificate cert;
  cert.c0 = stability_constant(spec, basis->statistics(), basis->n_max());
  if (!(spec.r0 > cert.c0)) {
    throw StabilityError("stability: r0 = " + std::to_string(spec.r0) +
                         " does not exceed C0 = " + std::to_string(cert.c0));
  }

  const FockOperator h = build_hamiltonian(spec, basis);
  const FockOperator hc = build_confined_hamiltonian(spec, basis);
  const FockOperator n = number_operator(basis);
  double lowest = 1.0;
  for (const auto& sector : basis->sectors()) {
    if (sector.particles == 0) continue;
    const ComplexMatrix a = h.sector_block(sector);
    const ComplexMatrix b = (hc + n).sector_block(sector);
    Eigen::GeneralizedSelfAdjointEigenSolver<ComplexMatrix> solver(a, b, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
      throw StabilityError("stability: generalized eigenproblem failed on sector " +
                           std::to_string(sector.particles));
    }
    const double bound = solver.eigenvalues().minCoeff();
    cert.sector_bounds.push_back(bound);
    lowest = std::min(lowest, bound);
  }
  if (!(lowest > 0.0)) {
    throw StabilityError("stability: no positive gamma, smallest sector bound " +
                         std::to_string(lowest));
  }
  // Stay strictly inside (0, 1) and off the exact boundary of feasibility.
  cert.gamma = lowest * (1.0 - 1e-9);
  return cert;
}

FockOperator build_hamiltonian(const LatticeSpec& spec, const BasisPtr& basis) {
  require_matching(spec, basis);
  spec.validate();
  const double c0 = stability_constant(spec, basis->statistics(), basis->n_max());
  if (!(spec.r0 > c0)) {
    throw StabilityError("hamiltonian: r0 = " + std::to_string(spec.r0) +
                         " does not exceed C0 = " + std::to_string(c0));
  }
  return second_quantize_onebody(build_one_particle_hamiltonian(spec), basis) +
         second_quantize_twobody(spec.w_table, basis);
}

FockOperator build_confined_hamiltonian(const LatticeSpec& spec, const BasisPtr& basis) {
  require_matching(spec, basis);
  return second_quantize_onebody(build_confined(spec), basis);
}

}  // namespace locgibbs
