#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "locgibbs/types.hpp"

namespace locgibbs {

/// Discretized single-particle problem on a uniform 1D grid with Dirichlet
/// boundaries. Sites sit at x_i = (i + 1) h, i = 0..m-1.
///
/// The on-site potential is V = v_plus - v_minus + v_c. The pair potential is
/// tabulated by site distance: w_table[d] = w(d h), d = 0..m-1, and w is even
/// by construction.
struct LatticeSpec {
  std::size_t m = 0;
  double h = 1.0;
  RealVector v_plus;
  RealVector v_minus;
  RealVector v_c;
  RealVector w_table;
  double r0 = 0.0;

  /// Default test instance: v_c(x) = kappa (x - xbar)^2, v = 0 and
  /// w(d) = w0 / (1 + |d| h).
  static LatticeSpec harmonic(std::size_t m, double h, double kappa, double w0,
                              double r0);

  /// Adds a linear potential slope * (x - xbar), split into v_plus / v_minus.
  LatticeSpec tilted(double slope) const;

  double x(std::size_t i) const { return static_cast<double>(i + 1) * h; }
  double center() const { return 0.5 * (x(0) + x(m - 1)); }
  double pair(std::size_t i, std::size_t j) const {
    return w_table[static_cast<Eigen::Index>(i > j ? i - j : j - i)];
  }

  /// V = v_plus - v_minus + v_c at each site.
  RealVector potential() const;

  /// Throws InvalidArgument when sizes, signs or the confining shape are off.
  /// The r0 > C0 requirement depends on the truncation and is checked by
  /// certify_stability.
  void validate() const;
};

enum class OperatorKind { laplacian, multiplication, gradient, general };

/// Hermitian m x m operator on the one-particle space.
struct OneBodyOperator {
  ComplexMatrix matrix;
  OperatorKind kind = OperatorKind::general;

  Eigen::Index size() const { return matrix.rows(); }
  bool is_hermitian(double tol = 1e-12) const;
};

/// h0 = -Delta: tridiagonal, 2/h^2 on the diagonal and -1/h^2 off it.
OneBodyOperator build_laplacian(const LatticeSpec& spec);

/// Diagonal multiplication operator by a site field.
OneBodyOperator build_multiplication(const RealVector& values);

/// h_c = h0 + v_c.
OneBodyOperator build_confined(const LatticeSpec& spec);

/// H_1 = h0 + V + r0.
OneBodyOperator build_one_particle_hamiltonian(const LatticeSpec& spec);

/// Smallest C0 >= 0 with sum_{i<j} w(x_i - x_j) >= -C0 n for every
/// configuration of 2 <= n <= n_max particles on the grid (distinct sites
/// for fermions, repetition allowed for bosons). Exhaustive enumeration.
double stability_constant(const LatticeSpec& spec, Statistics statistics,
                          std::size_t n_max);

/// Calls visit(sites) for every particle configuration with exactly n
/// particles, sites given as a nondecreasing list of site indices.
void for_each_configuration(std::size_t m, std::size_t n, Statistics statistics,
                            const std::function<void(const std::vector<std::size_t>&)>& visit);

}  // namespace locgibbs
