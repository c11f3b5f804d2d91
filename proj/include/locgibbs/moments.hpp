#pragma once

#include "locgibbs/fock.hpp"
#include "locgibbs/gibbs.hpp"
#include "locgibbs/lattice.hpp"

namespace locgibbs {

/// rho1_ij = Tr(a+_j a_i rho), so that Tr(A rho1) = Tr(dGamma(A) rho).
struct ReducedDM1 {
  ComplexMatrix matrix;
};

/// rho2_qp = Tr(c+_p c_q rho) on the PairBasis, so that
/// Tr(A rho2) = Tr(dGamma_2(A) rho) and Tr(rho2) = <N (N - 1) / 2>.
struct ReducedDM2 {
  PairBasis pairs;
  ComplexMatrix matrix;
};

/// Local constraint fields. Sites carry n, k_site, e_P, e_I and e; edges
/// (i, i+1) carry u and k. All fields are per unit length, so h times a sum
/// over sites or edges is the corresponding total.
struct MomentFields {
  RealVector n;
  RealVector u;
  RealVector k;
  RealVector k_site;
  RealVector e_p;
  RealVector e_i;
  RealVector e;

  MomentFields operator-(const MomentFields& other) const;
  MomentFields operator+(const MomentFields& other) const;
  MomentFields operator*(double c) const;
  /// Max-norm over n, u and e: the three constrained fields.
  double constrained_max_norm() const;
};

ReducedDM1 one_particle_dm(const DensityMatrix& rho);
ReducedDM2 two_particle_dm(const DensityMatrix& rho);

/// Expected pair occupations P(i, j) = Tr(rho a+_i a+_j a_j a_i), symmetric.
RealMatrix pair_density(const DensityMatrix& rho);

/// Fields built from rho1 (n, u, k) and the pair density (e_I):
///   n_i     = rho1_ii / h
///   u_i     = Im(rho1_{i+1,i}) / h^2                                 (edges)
///   k_i     = (rho1_ii + rho1_{i+1,i+1} - 2 Re rho1_{i+1,i}) / h^3     (edges)
///             plus rho1_00 / h^3 on the first edge and rho1_{m-1,m-1} / h^3 on the last
///   e_P     = V n
///   e_I,i   = sum_j w(x_i - x_j) P(i, j) / (2 h) + r0 n_i
///   e       = k_site + e_P + e_I, edges split half-half onto their sites
/// With this layout h sum k = Tr(h0 rho1) and h sum e = Tr(H rho).
MomentFields moment_fields(const DensityMatrix& rho, const LatticeSpec& spec);

/// Same fields from precomputed reduced quantities.
MomentFields moment_fields(const ReducedDM1& rho1, const RealMatrix& pairs,
                           const LatticeSpec& spec);

}  // namespace locgibbs
