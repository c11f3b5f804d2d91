#include "locgibbs/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "locgibbs/errors.hpp"

namespace locgibbs {

LatticeSpec LatticeSpec::harmonic(std::size_t m, double h, double kappa, double w0,
                                  double r0) {
  LatticeSpec spec;
  spec.m = m;
  spec.h = h;
  const auto n = static_cast<Eigen::Index>(m);
  spec.v_plus = RealVector::Zero(n);
  spec.v_minus = RealVector::Zero(n);
  spec.v_c = RealVector::Zero(n);
  spec.w_table = RealVector::Zero(n);
  spec.r0 = r0;
  if (m == 0) return spec;
  const double xbar = spec.center();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double dx = spec.x(static_cast<std::size_t>(i)) - xbar;
    spec.v_c[i] = kappa * dx * dx;
    spec.w_table[i] = w0 / (1.0 + static_cast<double>(i) * h);
  }
  return spec;
}

LatticeSpec LatticeSpec::tilted(double slope) const {
  LatticeSpec out = *this;
  const double xbar = center();
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(m); ++i) {
    const double v = v_plus[i] - v_minus[i] + slope * (x(static_cast<std::size_t>(i)) - xbar);
    out.v_plus[i] = std::max(v, 0.0);
    out.v_minus[i] = std::max(-v, 0.0);
  }
  return out;
}

RealVector LatticeSpec::potential() const { return v_plus - v_minus + v_c; }

void LatticeSpec::validate() const {
  if (m < 2) throw InvalidArgument("lattice: need at least 2 sites, got " + std::to_string(m));
  if (!(h > 0.0) || !std::isfinite(h)) throw InvalidArgument("lattice: grid spacing must be > 0");
  const auto n = static_cast<Eigen::Index>(m);
  auto check_field = [&](const RealVector& f, const char* name) {
    if (f.size() != n) {
      throw InvalidArgument(std::string("lattice: ") + name + " must have one entry per site");
    }
    if (!f.allFinite() || (f.array() < 0.0).any()) {
      throw InvalidArgument(std::string("lattice: ") + name + " must be finite and >= 0");
    }
  };
  check_field(v_plus, "v_plus");
  check_field(v_minus, "v_minus");
  check_field(v_c, "v_c");
  if (w_table.size() != n || !w_table.allFinite()) {
    throw InvalidArgument("lattice: w_table must hold w(d h) for d = 0..m-1");
  }
  if (!(r0 >= 0.0)) throw InvalidArgument("lattice: r0 must be >= 0");

  // Discrete confinement: v_c nonincreasing up to its minimum, nondecreasing after.
  Eigen::Index argmin = 0;
  v_c.minCoeff(&argmin);
  for (Eigen::Index i = 1; i <= argmin; ++i) {
    if (v_c[i] > v_c[i - 1]) throw InvalidArgument("lattice: v_c must decrease toward its minimum");
  }
  for (Eigen::Index i = argmin + 1; i < n; ++i) {
    if (v_c[i] < v_c[i - 1]) throw InvalidArgument("lattice: v_c must increase away from its minimum");
  }
}

bool OneBodyOperator::is_hermitian(double tol) const {
  if (matrix.rows() != matrix.cols()) return false;
  const double scale = std::max(1.0, matrix.cwiseAbs().maxCoeff());
  return (matrix - matrix.adjoint()).cwiseAbs().maxCoeff() <= tol * scale;
}

OneBodyOperator build_laplacian(const LatticeSpec& spec) {
  if (spec.m < 2) throw InvalidArgument("laplacian: need at least 2 sites");
  if (!(spec.h > 0.0)) throw InvalidArgument("laplacian: grid spacing must be > 0");
  const auto n = static_cast<Eigen::Index>(spec.m);
  const double inv_h2 = 1.0 / (spec.h * spec.h);
  OneBodyOperator op{ComplexMatrix::Zero(n, n), OperatorKind::laplacian};
  for (Eigen::Index i = 0; i < n; ++i) {
    op.matrix(i, i) = 2.0 * inv_h2;
    if (i + 1 < n) {
      op.matrix(i, i + 1) = -inv_h2;
      op.matrix(i + 1, i) = -inv_h2;
    }
  }
  return op;
}

OneBodyOperator build_multiplication(const RealVector& values) {
  OneBodyOperator op{ComplexMatrix::Zero(values.size(), values.size()),
                     OperatorKind::multiplication};
  op.matrix.diagonal() = values.cast<Complex>();
  return op;
}

OneBodyOperator build_confined(const LatticeSpec& spec) {
  OneBodyOperator op = build_laplacian(spec);
  op.matrix.diagonal() += spec.v_c.cast<Complex>();
  op.kind = OperatorKind::general;
  return op;
}

OneBodyOperator build_one_particle_hamiltonian(const LatticeSpec& spec) {
  OneBodyOperator op = build_laplacian(spec);
  const RealVector shifted = spec.potential().array() + spec.r0;
  op.matrix.diagonal() += shifted.cast<Complex>();
  op.kind = OperatorKind::general;
  return op;
}

namespace {

void enumerate_rec(std::size_t m, std::size_t remaining, std::size_t start, bool distinct,
                   std::vector<std::size_t>& sites,
                   const std::function<void(const std::vector<std::size_t>&)>& visit) {
  if (remaining == 0) {
    visit(sites);
    return;
  }
  for (std::size_t s = start; s < m; ++s) {
    sites.push_back(s);
    enumerate_rec(m, remaining - 1, distinct ? s + 1 : s, distinct, sites, visit);
    sites.pop_back();
  }
}

}  // namespace

void for_each_configuration(std::size_t m, std::size_t n, Statistics statistics,
                            const std::function<void(const std::vector<std::size_t>&)>& visit) {
  std::vector<std::size_t> sites;
  sites.reserve(n);
  enumerate_rec(m, n, 0, statistics == Statistics::fermionic, sites, visit);
}

double stability_constant(const LatticeSpec& spec, Statistics statistics, std::size_t n_max) {
  if (statistics == Statistics::fermionic) n_max = std::min(n_max, spec.m);
  double c0 = 0.0;
  for (std::size_t n = 2; n <= n_max; ++n) {
    for_each_configuration(spec.m, n, statistics, [&](const std::vector<std::size_t>& sites) {
      double energy = 0.0;
      for (std::size_t a = 0; a < sites.size(); ++a) {
        for (std::size_t b = a + 1; b < sites.size(); ++b) energy += spec.pair(sites[a], sites[b]);
      }
      c0 = std::max(c0, -energy / static_cast<double>(n));
    });
  }
  return c0;
}

}  // namespace locgibbs
