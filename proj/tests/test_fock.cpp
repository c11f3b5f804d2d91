#include <doctest.h>

#include <random>
#include <vector>

#include "fixtures.hpp"
#include "locgibbs/errors.hpp"
#include "locgibbs/fock.hpp"

using namespace locgibbs;
using fixtures::random_hermitian;

namespace {

// Tensor-product ladder operators on prod_j C^{cap}: mode 0 is the most
// significant digit. Fermions use Jordan-Wigner strings (cap = 2).
struct TensorLadder {
  std::size_t modes;
  int cap;
  std::vector<RealMatrix> lower;

  TensorLadder(std::size_t m, int per_mode, bool fermionic) : modes(m), cap(per_mode) {
    const RealMatrix id = RealMatrix::Identity(cap, cap);
    RealMatrix b = RealMatrix::Zero(cap, cap);
    for (int n = 1; n < cap; ++n) b(n - 1, n) = std::sqrt(static_cast<double>(n));
    RealMatrix z = RealMatrix::Identity(cap, cap);
    if (fermionic) z(1, 1) = -1.0;
    for (std::size_t j = 0; j < m; ++j) {
      RealMatrix op = RealMatrix::Identity(1, 1);
      for (std::size_t k = 0; k < m; ++k) {
        const RealMatrix& factor = k < j ? (fermionic ? z : id) : (k == j ? b : id);
        op = kron(op, factor);
      }
      lower.push_back(op);
    }
  }

  static RealMatrix kron(const RealMatrix& a, const RealMatrix& b) {
    RealMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < a.cols(); ++j)
        out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
  }

  Occupation digits(Eigen::Index index) const {
    Occupation occ(modes);
    for (std::size_t k = modes; k-- > 0;) {
      occ[k] = static_cast<int>(index % cap);
      index /= cap;
    }
    return occ;
  }

  // Restricts a tensor-space operator to the Fock basis ordering.
  ComplexMatrix restrict(const ComplexMatrix& full, const FockBasis& basis) const {
    ComplexMatrix out = ComplexMatrix::Zero(basis.size(), basis.size());
    for (Eigen::Index r = 0; r < full.rows(); ++r) {
      auto ri = basis.index_of(digits(r));
      if (!ri) continue;
      for (Eigen::Index c = 0; c < full.cols(); ++c) {
        auto ci = basis.index_of(digits(c));
        if (!ci) continue;
        out(static_cast<Eigen::Index>(*ri), static_cast<Eigen::Index>(*ci)) = full(r, c);
      }
    }
    return out;
  }

  ComplexMatrix second_quantize(const ComplexMatrix& a) const {
    const auto dim = lower[0].rows();
    ComplexMatrix out = ComplexMatrix::Zero(dim, dim);
    for (std::size_t i = 0; i < modes; ++i)
      for (std::size_t j = 0; j < modes; ++j)
        out += a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *
               (lower[i].transpose() * lower[j]).cast<Complex>();
    return out;
  }
};

}  // namespace

TEST_CASE("basis: two fermionic modes in documented order") {
  auto basis = FockBasis::enumerate(Statistics::fermionic, 2, 2);
  REQUIRE(basis->dimension() == 4);
  CHECK(basis->state(0) == Occupation{0, 0});
  CHECK(basis->state(1) == Occupation{1, 0});
  CHECK(basis->state(2) == Occupation{0, 1});
  CHECK(basis->state(3) == Occupation{1, 1});
  CHECK(basis->sectors().size() == 3);
  CHECK(basis->sectors()[0].size == 1);
}

TEST_CASE("basis: dimensions") {
  CHECK(FockBasis::enumerate(Statistics::bosonic, 2, 2)->dimension() == 6);
  CHECK(FockBasis::enumerate(Statistics::fermionic, 8, 8)->dimension() == 256);
  // fermionic n_max is clamped to m
  CHECK(FockBasis::enumerate(Statistics::fermionic, 3, 10)->n_max() == 3);

  auto bose = FockBasis::enumerate(Statistics::bosonic, 3, 4);
  CHECK(bose->dimension() == 35);
  const std::size_t want[] = {1, 3, 6, 10, 15};
  for (const auto& s : bose->sectors()) CHECK(s.size == want[s.particles]);

  auto fermi = FockBasis::enumerate(Statistics::fermionic, 6, 6);
  const std::size_t binom6[] = {1, 6, 15, 20, 15, 6, 1};
  for (const auto& s : fermi->sectors()) CHECK(s.size == binom6[s.particles]);
}

TEST_CASE("basis: dimension cap") {
  CHECK_THROWS_AS(FockBasis::enumerate(Statistics::fermionic, 16, 16), DimensionCapExceeded);
  CHECK_THROWS_AS(FockBasis::enumerate(Statistics::bosonic, 4, 4, 50), DimensionCapExceeded);
  CHECK_NOTHROW(FockBasis::enumerate(Statistics::bosonic, 4, 4, 70));
}

TEST_CASE("dGamma(Id) is the number operator") {
  for (auto stats : {Statistics::fermionic, Statistics::bosonic}) {
    auto basis = FockBasis::enumerate(stats, 3, 3);
    const auto n = second_quantize_onebody(
        {ComplexMatrix::Identity(3, 3), OperatorKind::multiplication}, basis);
    CHECK((n.matrix - number_operator(basis).matrix).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("dGamma restricted to one particle is A") {
  std::mt19937_64 rng(3);
  for (auto stats : {Statistics::fermionic, Statistics::bosonic}) {
    auto basis = FockBasis::enumerate(stats, 4, 3);
    const ComplexMatrix a = random_hermitian(4, rng);
    const auto op = second_quantize_onebody({a, OperatorKind::general}, basis);
    const auto& one = basis->sectors()[1];
    // sector-1 states are e_0, e_1, ... in this order
    CHECK((op.sector_block(one) - a).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(op.block_diagonal);
    CHECK(op.conserves_particle_number());
    CHECK(op.is_hermitian());
  }
}

TEST_CASE("fermionic sign convention on two modes") {
  auto basis = FockBasis::enumerate(Statistics::fermionic, 2, 2);
  ComplexMatrix a = ComplexMatrix::Zero(2, 2);
  a(0, 1) = 1.0;
  a(1, 0) = 1.0;
  const auto op = second_quantize_onebody({a, OperatorKind::general}, basis);
  const auto from = *basis->index_of({0, 1});
  const auto to = *basis->index_of({1, 0});
  CHECK(op.matrix(static_cast<Eigen::Index>(to), static_cast<Eigen::Index>(from)).real() == 1.0);

  TensorLadder jw(2, 2, true);
  CHECK((jw.restrict(jw.second_quantize(a), *basis) - op.matrix).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("dGamma matches Jordan-Wigner and tensor-product ladder oracles") {
  std::mt19937_64 rng(11);
  SUBCASE("fermions") {
    for (std::size_t m : {2u, 3u, 4u}) {
      auto basis = FockBasis::enumerate(Statistics::fermionic, m, m);
      TensorLadder jw(m, 2, true);
      const ComplexMatrix a = random_hermitian(static_cast<Eigen::Index>(m), rng);
      const auto op = second_quantize_onebody({a, OperatorKind::general}, basis);
      CHECK((jw.restrict(jw.second_quantize(a), *basis) - op.matrix).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("bosons") {
    const std::size_t m = 3;
    const std::size_t n_max = 3;
    auto basis = FockBasis::enumerate(Statistics::bosonic, m, n_max);
    TensorLadder ladder(m, static_cast<int>(n_max) + 1, false);
    const ComplexMatrix a = random_hermitian(3, rng);
    const auto op = second_quantize_onebody({a, OperatorKind::general}, basis);
    CHECK((ladder.restrict(ladder.second_quantize(a), *basis) - op.matrix).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("dGamma is linear") {
  std::mt19937_64 rng(5);
  for (auto stats : {Statistics::fermionic, Statistics::bosonic}) {
    auto basis = FockBasis::enumerate(stats, 3, 3);
    const ComplexMatrix a = random_hermitian(3, rng);
    const ComplexMatrix b = random_hermitian(3, rng);
    const auto sum = second_quantize_onebody({a + b, OperatorKind::general}, basis);
    const auto parts = second_quantize_onebody({a, OperatorKind::general}, basis) +
                       second_quantize_onebody({b, OperatorKind::general}, basis);
    CHECK((sum.matrix - parts.matrix).cwiseAbs().maxCoeff() < 1e-13);
    const auto scaled = second_quantize_onebody({-2.5 * a, OperatorKind::general}, basis);
    const auto scaled2 = -2.5 * second_quantize_onebody({a, OperatorKind::general}, basis);
    CHECK((scaled.matrix - scaled2.matrix).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("per-particle norm bound of dGamma") {
  std::mt19937_64 rng(9);
  for (auto stats : {Statistics::fermionic, Statistics::bosonic}) {
    auto basis = FockBasis::enumerate(stats, 4, 4);
    for (int trial = 0; trial < 5; ++trial) {
      const ComplexMatrix a = random_hermitian(4, rng);
      const double norm_a = Eigen::SelfAdjointEigenSolver<ComplexMatrix>(a).eigenvalues().cwiseAbs().maxCoeff();
      const auto op = second_quantize_onebody({a, OperatorKind::general}, basis);
      for (const auto& s : basis->sectors()) {
        if (s.particles == 0) continue;
        const ComplexMatrix block = op.sector_block(s) / static_cast<double>(s.particles);
        const double norm_b = Eigen::SelfAdjointEigenSolver<ComplexMatrix>(block).eigenvalues().cwiseAbs().maxCoeff();
        CHECK(norm_b <= norm_a * (1.0 + 1e-12));
      }
    }
  }
}

TEST_CASE("dGamma of a diagonal operator counts occupations") {
  auto basis = FockBasis::enumerate(Statistics::fermionic, 4, 4);
  RealVector d(4);
  d << 0.3, -1.0, 2.0, 0.5;
  const auto op = second_quantize_onebody(build_multiplication(d), basis);
  for (std::size_t s = 0; s < basis->dimension(); ++s) {
    double want = 0.0;
    for (int i = 0; i < 4; ++i) want += d[i] * basis->state(s)[static_cast<std::size_t>(i)];
    const auto si = static_cast<Eigen::Index>(s);
    CHECK(op.matrix(si, si).real() == doctest::Approx(want).epsilon(1e-14));
  }
  CHECK((op.matrix - ComplexMatrix(op.matrix.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two-body interaction") {
  const LatticeSpec spec = LatticeSpec::harmonic(4, 0.5, 0.5, 1.3, 1.0);
  SUBCASE("single adjacent fermion pair") {
    auto basis = FockBasis::enumerate(Statistics::fermionic, 4, 4);
    const auto w = second_quantize_twobody(spec.w_table, basis);
    const auto idx = static_cast<Eigen::Index>(*basis->index_of({1, 1, 0, 0}));
    CHECK(w.matrix(idx, idx).real() == doctest::Approx(1.3 / (1.0 + 0.5)));
    for (const auto& s : basis->sectors()) {
      if (s.particles < 2) CHECK(w.sector_block(s).cwiseAbs().maxCoeff() == 0.0);
    }
  }
  SUBCASE("zero table gives zero operator") {
    auto basis = FockBasis::enumerate(Statistics::bosonic, 4, 3);
    const auto w = second_quantize_twobody(RealVector::Zero(4), basis);
    CHECK(w.matrix.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("three bosons on one site") {
    // 3 choose 2 = 3 pairs, each at distance 0
    auto basis = FockBasis::enumerate(Statistics::bosonic, 4, 3);
    RealVector table = RealVector::Zero(4);
    table[0] = 0.9;
    const auto w = second_quantize_twobody(table, basis);
    const auto idx = static_cast<Eigen::Index>(*basis->index_of({0, 3, 0, 0}));
    CHECK(w.matrix(idx, idx).real() == doctest::Approx(3 * 0.9));
    // same value from the sector-3 enumeration of configurations
    double enumerated = 0.0;
    for_each_configuration(4, 3, Statistics::bosonic, [&](const std::vector<std::size_t>& sites) {
      if (sites == std::vector<std::size_t>{1, 1, 1}) {
        for (int a = 0; a < 3; ++a)
          for (int b = a + 1; b < 3; ++b) enumerated += table[0];
      }
    });
    CHECK(w.matrix(idx, idx).real() == doctest::Approx(enumerated));
  }
  SUBCASE("W + r0 N is positive when r0 dominates C0") {
    LatticeSpec attractive = LatticeSpec::harmonic(3, 1.0, 0.5, -0.8, 0.0);
    auto basis = FockBasis::enumerate(Statistics::bosonic, 3, 4);
    const double c0 = stability_constant(attractive, Statistics::bosonic, 4);
    const auto w = second_quantize_twobody(attractive.w_table, basis);
    const auto shifted = w + c0 * number_operator(basis);
    CHECK(shifted.matrix.diagonal().real().minCoeff() >= -1e-14);
  }
}

TEST_CASE("pair operator restricted to two particles is A") {
  std::mt19937_64 rng(21);
  for (auto stats : {Statistics::fermionic, Statistics::bosonic}) {
    auto basis = FockBasis::enumerate(stats, 3, 3);
    const PairBasis pb = PairBasis::make(stats, 3);
    const ComplexMatrix a = random_hermitian(pb.size(), rng);
    const auto op = second_quantize_pair_operator(a, basis);
    // map each pair to its two-particle basis state
    std::vector<Eigen::Index> where;
    for (auto [i, j] : pb.pairs) {
      Occupation occ(3, 0);
      occ[i] += 1;
      occ[j] += 1;
      where.push_back(static_cast<Eigen::Index>(*basis->index_of(occ)));
    }
    for (Eigen::Index p = 0; p < pb.size(); ++p)
      for (Eigen::Index q = 0; q < pb.size(); ++q)
        CHECK(std::abs(op.matrix(where[static_cast<std::size_t>(p)], where[static_cast<std::size_t>(q)]) - a(p, q)) < 1e-13);
    for (const auto& s : basis->sectors())
      if (s.particles < 2) CHECK(op.sector_block(s).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("pair operator of the tabulated potential reproduces W") {
  const LatticeSpec spec = LatticeSpec::harmonic(4, 1.0, 0.5, 0.7, 1.0);
  for (auto stats : {Statistics::fermionic, Statistics::bosonic}) {
    auto basis = FockBasis::enumerate(stats, 4, 4);
    const PairBasis pb = PairBasis::make(stats, 4);
    ComplexMatrix a = ComplexMatrix::Zero(pb.size(), pb.size());
    for (Eigen::Index p = 0; p < pb.size(); ++p) {
      a(p, p) = spec.pair(pb.pairs[static_cast<std::size_t>(p)].first, pb.pairs[static_cast<std::size_t>(p)].second);
    }
    const auto via_pairs = second_quantize_pair_operator(a, basis);
    const auto direct = second_quantize_twobody(spec.w_table, basis);
    CHECK((via_pairs.matrix - direct.matrix).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("hamiltonian structure") {
  const LatticeSpec spec = LatticeSpec::harmonic(4, 1.0, 0.5, 1.0, 1.0);
  for (auto stats : {Statistics::fermionic, Statistics::bosonic}) {
    auto basis = FockBasis::enumerate(stats, 4, 3);
    const auto h = build_hamiltonian(spec, basis);
    CHECK(h.is_hermitian());
    CHECK(h.conserves_particle_number());
    CHECK(h.matrix.row(0).cwiseAbs().maxCoeff() == 0.0);
    CHECK(h.matrix.col(0).cwiseAbs().maxCoeff() == 0.0);
    const ComplexMatrix h1 = build_one_particle_hamiltonian(spec).matrix;
    CHECK((h.sector_block(basis->sectors()[1]) - h1).cwiseAbs().maxCoeff() < 1e-13);
    const auto n = number_operator(basis);
    CHECK((h.matrix * n.matrix - n.matrix * h.matrix).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("hamiltonian: two fermionic modes, full spectrum") {
  const LatticeSpec spec = LatticeSpec::harmonic(2, 0.8, 0.3, 0.6, 1.0);
  auto basis = FockBasis::enumerate(Statistics::fermionic, 2, 2);
  const auto h = build_hamiltonian(spec, basis);
  const ComplexMatrix h1 = build_one_particle_hamiltonian(spec).matrix;
  // {0} u spec(H1) u {tr H1 + w(h)}; spec(H1) from the 2x2 characteristic polynomial
  const double p = h1(0, 0).real(), q = h1(1, 1).real(), r = std::abs(h1(0, 1));
  const double mid = 0.5 * (p + q), half = std::sqrt(0.25 * (p - q) * (p - q) + r * r);
  std::vector<double> want = {0.0, mid - half, mid + half, p + q + spec.w_table[1]};
  std::sort(want.begin(), want.end());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h.matrix);
  for (int i = 0; i < 4; ++i) CHECK(es.eigenvalues()[i] == doctest::Approx(want[static_cast<std::size_t>(i)]).epsilon(1e-12));
}

TEST_CASE("hamiltonian: r0 must exceed C0") {
  LatticeSpec spec = LatticeSpec::harmonic(3, 1.0, 0.5, -1.0, 0.2);
  auto basis = FockBasis::enumerate(Statistics::bosonic, 3, 3);
  // C0 = 1 * (3 - 1) / 2 = 1 > 0.2
  CHECK_THROWS_AS(build_hamiltonian(spec, basis), StabilityError);
  CHECK_THROWS_AS(certify_stability(spec, basis), StabilityError);
  spec.r0 = 1.5;
  CHECK_NOTHROW(build_hamiltonian(spec, basis));
  LatticeSpec repulsive = LatticeSpec::harmonic(3, 1.0, 0.5, 1.0, 0.0);
  CHECK_THROWS_AS(build_hamiltonian(repulsive, basis), StabilityError);
}

TEST_CASE("stability certificate: lower bound holds on every sector") {
  for (double w0 : {1.0, -0.6}) {
    for (auto stats : {Statistics::fermionic, Statistics::bosonic}) {
      const LatticeSpec spec = LatticeSpec::harmonic(3, 1.0, 0.5, w0, 2.0);
      auto basis = FockBasis::enumerate(stats, 3, 4);
      const auto cert = certify_stability(spec, basis);
      CHECK(cert.gamma > 0.0);
      CHECK(cert.gamma < 1.0);
      CHECK(cert.sector_bounds.size() == basis->n_max());
      const auto h = build_hamiltonian(spec, basis);
      const auto rhs = build_confined_hamiltonian(spec, basis) + number_operator(basis);
      for (const auto& s : basis->sectors()) {
        const ComplexMatrix gap = h.sector_block(s) - cert.gamma * rhs.sector_block(s);
        if (gap.size() == 0) continue;
        const double lowest = Eigen::SelfAdjointEigenSolver<ComplexMatrix>(gap).eigenvalues().minCoeff();
        CHECK(lowest >= -1e-10);
      }
    }
  }
}
