#include "locgibbs/moments.hpp"

#include <string>
#include <vector>

#include "locgibbs/errors.hpp"

namespace locgibbs {

namespace {

struct Lowered {
  Eigen::Index label;  // mode or pair index
  Eigen::Index source; // basis index of the original state
  double amplitude;
};

// Groups every nonvanishing lowering of every basis state by the resulting
// state, so that <s|L+_p L_q|s'> = amp(p,s) amp(q,s') for matching targets.
template <class Lower>
std::vector<std::vector<Lowered>> group_lowerings(const FockBasis& basis, Eigen::Index labels,
                                                  Lower lower) {
  std::vector<std::vector<Lowered>> groups(basis.dimension());
  for (std::size_t s = 0; s < basis.dimension(); ++s) {
    for (Eigen::Index q = 0; q < labels; ++q) {
      Occupation t = basis.state(s);
      auto amp = lower(t, q);
      if (!amp) continue;
      auto idx = basis.index_of(t);
      if (!idx) throw Error("moments: lowered state missing from basis");
      groups[*idx].push_back({q, static_cast<Eigen::Index>(s), *amp});
    }
  }
  return groups;
}

// out(q, p) = sum_t sum <s|L+_p L_q|s'> rho(s', s)
template <class Lower>
ComplexMatrix contract(const DensityMatrix& rho, Eigen::Index labels, Lower lower) {
  const auto groups = group_lowerings(*rho.basis(), labels, lower);
  const ComplexMatrix& r = rho.matrix();
  ComplexMatrix out = ComplexMatrix::Zero(labels, labels);
  for (const auto& group : groups) {
    for (const auto& left : group) {      // L_p |s>
      for (const auto& right : group) {   // L_q |s'>
        out(right.label, left.label) += (left.amplitude * right.amplitude) * r(right.source, left.source);
      }
    }
  }
  return out;
}

}  // namespace

MomentFields MomentFields::operator-(const MomentFields& o) const {
  return {n - o.n, u - o.u, k - o.k, k_site - o.k_site, e_p - o.e_p, e_i - o.e_i, e - o.e};
}

MomentFields MomentFields::operator+(const MomentFields& o) const {
  return {n + o.n, u + o.u, k + o.k, k_site + o.k_site, e_p + o.e_p, e_i + o.e_i, e + o.e};
}

MomentFields MomentFields::operator*(double c) const {
  return {c * n, c * u, c * k, c * k_site, c * e_p, c * e_i, c * e};
}

double MomentFields::constrained_max_norm() const {
  double norm = 0.0;
  if (n.size() > 0) norm = std::max(norm, n.cwiseAbs().maxCoeff());
  if (u.size() > 0) norm = std::max(norm, u.cwiseAbs().maxCoeff());
  if (e.size() > 0) norm = std::max(norm, e.cwiseAbs().maxCoeff());
  return norm;
}

ReducedDM1 one_particle_dm(const DensityMatrix& rho) {
  const FockBasis& basis = *rho.basis();
  const auto stats = basis.statistics();
  const auto m = static_cast<Eigen::Index>(basis.modes());
  ComplexMatrix out = contract(rho, m, [&](Occupation& t, Eigen::Index mode) {
    return annihilate(stats, t, static_cast<std::size_t>(mode));
  });
  // Exact Hermitian symmetry; the contraction is Hermitian up to round-off.
  return {0.5 * (out + out.adjoint())};
}

ReducedDM2 two_particle_dm(const DensityMatrix& rho) {
  const FockBasis& basis = *rho.basis();
  const auto stats = basis.statistics();
  PairBasis pairs = PairBasis::make(stats, basis.modes());
  ComplexMatrix out = contract(rho, pairs.size(), [&](Occupation& t, Eigen::Index p) {
    return annihilate_pair(stats, t, pairs.pairs[static_cast<std::size_t>(p)]);
  });
  return {std::move(pairs), 0.5 * (out + out.adjoint())};
}

RealMatrix pair_density(const DensityMatrix& rho) {
  const FockBasis& basis = *rho.basis();
  const std::size_t m = basis.modes();
  const auto mi = static_cast<Eigen::Index>(m);
  RealMatrix out = RealMatrix::Zero(mi, mi);
  const RealVector diag = rho.matrix().diagonal().real();
  for (std::size_t s = 0; s < basis.dimension(); ++s) {
    const double weight = diag[static_cast<Eigen::Index>(s)];
    if (weight == 0.0) continue;
    const Occupation& occ = basis.state(s);
    for (std::size_t i = 0; i < m; ++i) {
      if (occ[i] == 0) continue;
      const auto ii = static_cast<Eigen::Index>(i);
      out(ii, ii) += weight * occ[i] * (occ[i] - 1);
      for (std::size_t j = i + 1; j < m; ++j) {
        if (occ[j] == 0) continue;
        const double v = weight * occ[i] * occ[j];
        out(ii, static_cast<Eigen::Index>(j)) += v;
        out(static_cast<Eigen::Index>(j), ii) += v;
      }
    }
  }
  return out;
}

MomentFields moment_fields(const ReducedDM1& rho1, const RealMatrix& pairs,
                           const LatticeSpec& spec) {
  const auto m = static_cast<Eigen::Index>(spec.m);
  if (rho1.matrix.rows() != m || pairs.rows() != m) {
    throw InvalidArgument("moments: reduced matrices do not match the lattice size " +
                          std::to_string(spec.m));
  }
  const double h = spec.h;
  const double h2 = h * h;
  const double h3 = h2 * h;
  const ComplexMatrix& r = rho1.matrix;

  MomentFields f;
  f.n = r.diagonal().real() / h;
  f.u = RealVector::Zero(m - 1);
  f.k = RealVector::Zero(m - 1);
  for (Eigen::Index i = 0; i + 1 < m; ++i) {
    const Complex forward = r(i + 1, i);
    f.u[i] = forward.imag() / h2;
    f.k[i] = (r(i, i).real() + r(i + 1, i + 1).real() - 2.0 * forward.real()) / h3;
  }
  f.k[0] += r(0, 0).real() / h3;
  f.k[m - 2] += r(m - 1, m - 1).real() / h3;

  f.k_site = RealVector::Zero(m);
  for (Eigen::Index i = 0; i + 1 < m; ++i) {
    f.k_site[i] += 0.5 * f.k[i];
    f.k_site[i + 1] += 0.5 * f.k[i];
  }

  f.e_p = spec.potential().cwiseProduct(f.n);

  f.e_i = spec.r0 * f.n;
  for (Eigen::Index i = 0; i < m; ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      sum += spec.pair(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) * pairs(i, j);
    }
    f.e_i[i] += 0.5 * sum / h;
  }

  f.e = f.k_site + f.e_p + f.e_i;
  return f;
}

MomentFields moment_fields(const DensityMatrix& rho, const LatticeSpec& spec) {
  if (rho.basis()->modes() != spec.m) {
    throw InvalidArgument("moments: state has " + std::to_string(rho.basis()->modes()) +
                          " modes, lattice has " + std::to_string(spec.m) + " sites");
  }
  return moment_fields(one_particle_dm(rho), pair_density(rho), spec);
}

}  // namespace locgibbs
