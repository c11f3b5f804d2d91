#pragma once

#include <random>

#include "locgibbs/fock.hpp"
#include "locgibbs/gibbs.hpp"
#include "locgibbs/lattice.hpp"

namespace fixtures {

using namespace locgibbs;

struct Instance {
  LatticeSpec spec;
  BasisPtr basis;
  FockOperator hamiltonian;
  FockOperator number;
};

inline Instance make_instance(const LatticeSpec& spec, Statistics stats, std::size_t n_max) {
  auto basis = FockBasis::enumerate(stats, spec.m, n_max);
  return {spec, basis, build_hamiltonian(spec, basis), number_operator(basis)};
}

/// Interacting fermions on 4 sites, D = 16.
inline Instance fermions4() {
  return make_instance(LatticeSpec::harmonic(4, 1.0, 0.5, 1.0, 1.0), Statistics::fermionic, 4);
}

/// Interacting bosons on 3 sites with at most 4 particles, D = 35.
inline Instance bosons3() {
  return make_instance(LatticeSpec::harmonic(3, 1.0, 0.5, 1.0, 1.0), Statistics::bosonic, 4);
}

/// Single fermionic mode with one-body energy eps.
inline Instance single_mode(double eps) {
  auto basis = FockBasis::enumerate(Statistics::fermionic, 1, 1);
  OneBodyOperator a{ComplexMatrix::Constant(1, 1, eps), OperatorKind::general};
  return {LatticeSpec{}, basis, second_quantize_onebody(a, basis), number_operator(basis)};
}

inline ComplexMatrix random_hermitian(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  ComplexMatrix a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = Complex(g(rng), g(rng));
  return 0.5 * (a + a.adjoint());
}

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

}  // namespace fixtures
