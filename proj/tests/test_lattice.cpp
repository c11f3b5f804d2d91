#include <doctest.h>

#include <bit>
#include <cmath>
#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "locgibbs/errors.hpp"
#include "locgibbs/lattice.hpp"

using namespace locgibbs;

TEST_CASE("laplacian: 3 sites, unit spacing") {
  const auto op = build_laplacian(LatticeSpec::harmonic(3, 1.0, 0.0, 0.0, 1.0));
  RealMatrix want(3, 3);
  want << 2, -1, 0, -1, 2, -1, 0, -1, 2;
  CHECK(op.kind == OperatorKind::laplacian);
  CHECK((op.matrix.real() - want).cwiseAbs().maxCoeff() == 0.0);
  CHECK(op.matrix.imag().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("laplacian: 2 sites has eigenvalues 1 and 3") {
  // (2 - l)^2 - 1 = 0  =>  l = 2 -+ 1
  const auto op = build_laplacian(LatticeSpec::harmonic(2, 1.0, 0.0, 0.0, 1.0));
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(op.matrix);
  CHECK(es.eigenvalues()[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(es.eigenvalues()[1] == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("laplacian: strictly positive with the Dirichlet lowest mode") {
  for (std::size_t m : {2u, 3u, 5u, 8u, 13u}) {
    for (double h : {0.1, 0.5, 1.0, 2.0}) {
      const auto op = build_laplacian(LatticeSpec::harmonic(m, h, 0.0, 0.0, 1.0));
      Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(op.matrix);
      const double s = std::sin(std::numbers::pi / (2.0 * static_cast<double>(m + 1)));
      const double lowest = 4.0 / (h * h) * s * s;
      CHECK(es.eigenvalues()[0] > 0.0);
      CHECK(es.eigenvalues()[0] == doctest::Approx(lowest).epsilon(1e-10));
    }
  }
}

TEST_CASE("laplacian: summation by parts") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::size_t m : {2u, 4u, 7u}) {
    const double h = 0.3;
    const auto op = build_laplacian(LatticeSpec::harmonic(m, h, 0.0, 0.0, 1.0));
    for (int trial = 0; trial < 20; ++trial) {
      ComplexVector psi(static_cast<Eigen::Index>(m));
      for (auto& z : psi) z = Complex(g(rng), g(rng));
      const double form = psi.dot(op.matrix * psi).real();
      double sum = std::norm(psi[0]) + std::norm(psi[psi.size() - 1]);
      for (Eigen::Index i = 0; i + 1 < psi.size(); ++i) sum += std::norm(psi[i + 1] - psi[i]);
      sum /= h * h;
      CHECK(form == doctest::Approx(sum).epsilon(1e-12));
    }
  }
}

TEST_CASE("laplacian: rejects invalid discretizations") {
  LatticeSpec spec = LatticeSpec::harmonic(3, 1.0, 0.0, 0.0, 1.0);
  spec.m = 1;
  CHECK_THROWS_AS(build_laplacian(spec), InvalidArgument);
  spec = LatticeSpec::harmonic(3, 1.0, 0.0, 0.0, 1.0);
  spec.h = 0.0;
  CHECK_THROWS_AS(build_laplacian(spec), InvalidArgument);
  spec.h = -1.0;
  CHECK_THROWS_AS(build_laplacian(spec), InvalidArgument);
}

TEST_CASE("lattice spec: defaults validate, bad shapes do not") {
  LatticeSpec spec = LatticeSpec::harmonic(5, 0.5, 2.0, 1.0, 1.0);
  CHECK_NOTHROW(spec.validate());
  CHECK(spec.w_table[2] == doctest::Approx(1.0 / (1.0 + 2 * 0.5)));
  CHECK(spec.v_c[2] == doctest::Approx(0.0));

  LatticeSpec bumpy = spec;
  bumpy.v_c[0] = 0.0;  // not nonincreasing toward the minimum
  CHECK_THROWS_AS(bumpy.validate(), InvalidArgument);

  LatticeSpec negative = spec;
  negative.v_plus[1] = -1.0;
  CHECK_THROWS_AS(negative.validate(), InvalidArgument);

  LatticeSpec short_w = spec;
  short_w.w_table = RealVector::Zero(2);
  CHECK_THROWS_AS(short_w.validate(), InvalidArgument);
}

TEST_CASE("lattice spec: tilt keeps both potential parts nonnegative") {
  const LatticeSpec spec = LatticeSpec::harmonic(5, 1.0, 0.5, 1.0, 1.0).tilted(0.4);
  CHECK_NOTHROW(spec.validate());
  for (Eigen::Index i = 0; i < 5; ++i) {
    const double want = 0.4 * (spec.x(static_cast<std::size_t>(i)) - spec.center());
    CHECK(spec.v_plus[i] - spec.v_minus[i] == doctest::Approx(want));
  }
}

TEST_CASE("stability constant: nonnegative w gives zero") {
  const LatticeSpec spec = LatticeSpec::harmonic(5, 1.0, 0.5, 2.0, 1.0);
  CHECK(stability_constant(spec, Statistics::fermionic, 5) == 0.0);
  CHECK(stability_constant(spec, Statistics::bosonic, 4) == 0.0);
}

TEST_CASE("stability constant: constant attraction, bosons stacked on one site") {
  // min over n <= n_max of -c n (n - 1) / 2 / n  =>  C0 = c (n_max - 1) / 2
  const double c = 0.7;
  LatticeSpec spec = LatticeSpec::harmonic(3, 1.0, 0.5, 0.0, 5.0);
  spec.w_table.setConstant(-c);
  for (std::size_t n_max : {2u, 3u, 5u}) {
    CHECK(stability_constant(spec, Statistics::bosonic, n_max) ==
          doctest::Approx(c * static_cast<double>(n_max - 1) / 2.0).epsilon(1e-14));
  }
}

TEST_CASE("stability constant: fermions on 4 sites with w(d) = -1/(1+d)") {
  LatticeSpec spec = LatticeSpec::harmonic(4, 1.0, 0.5, -1.0, 1.0);
  // Oracle: scan every subset of the 4 sites as a bitmask.
  double oracle = 0.0;
  for (unsigned mask = 0; mask < 16u; ++mask) {
    const int n = std::popcount(mask);
    if (n < 2 || n > 3) continue;
    double energy = 0.0;
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j)
        if ((mask >> i & 1u) && (mask >> j & 1u)) energy += -1.0 / (1.0 + (j - i));
    oracle = std::max(oracle, -energy / n);
  }
  // three adjacent fermions: (1/2 + 1/3 + 1/2) / 3
  CHECK(oracle == doctest::Approx(4.0 / 9.0));
  CHECK(stability_constant(spec, Statistics::fermionic, 3) == doctest::Approx(oracle).epsilon(1e-15));
}

TEST_CASE("configurations: counts match binomials") {
  int fermi = 0;
  for_each_configuration(6, 3, Statistics::fermionic, [&](const auto&) { ++fermi; });
  CHECK(fermi == 20);
  int bose = 0;
  for_each_configuration(3, 4, Statistics::bosonic, [&](const auto&) { ++bose; });
  CHECK(bose == 15);
}
