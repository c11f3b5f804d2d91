#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "locgibbs/lattice.hpp"
#include "locgibbs/types.hpp"

namespace locgibbs {

using Occupation = std::vector<int>;

/// Truncated occupation-number basis.
///
/// States are grouped by total particle number n = 0..n_max; inside a sector
/// they are in descending lexicographic order, so for two fermionic modes the
/// basis reads (0,0), (1,0), (0,1), (1,1).
///
/// Fermionic phase convention: |n_1 ... n_m> = (a+_1)^{n_1} ... (a+_m)^{n_m} |0>,
/// hence a+_i and a_i pick up (-1)^{n_1 + ... + n_{i-1}}.
class FockBasis {
 public:
  struct Sector {
    std::size_t particles;
    std::size_t offset;
    std::size_t size;
  };

  static constexpr std::size_t default_dimension_cap = 20000;

  /// Fermionic n_max is clamped to m. Throws DimensionCapExceeded when the
  /// basis would be larger than dimension_cap.
  static std::shared_ptr<const FockBasis> enumerate(
      Statistics statistics, std::size_t m, std::size_t n_max,
      std::size_t dimension_cap = default_dimension_cap);

  /// Dimension of the truncated space without building it.
  static double dimension_of(Statistics statistics, std::size_t m, std::size_t n_max);

  Statistics statistics() const { return statistics_; }
  std::size_t modes() const { return modes_; }
  std::size_t n_max() const { return n_max_; }
  std::size_t dimension() const { return states_.size(); }
  Eigen::Index size() const { return static_cast<Eigen::Index>(states_.size()); }

  const Occupation& state(std::size_t index) const { return states_[index]; }
  int particles(std::size_t index) const { return particles_[index]; }
  const std::vector<Sector>& sectors() const { return sectors_; }
  std::optional<std::size_t> index_of(const Occupation& occupation) const;

  bool operator==(const FockBasis& other) const {
    return statistics_ == other.statistics_ && modes_ == other.modes_ && n_max_ == other.n_max_;
  }

 private:
  FockBasis() = default;

  Statistics statistics_ = Statistics::fermionic;
  std::size_t modes_ = 0;
  std::size_t n_max_ = 0;
  std::vector<Occupation> states_;
  std::vector<int> particles_;
  std::vector<Sector> sectors_;
  std::map<Occupation, std::size_t> index_;
};

using BasisPtr = std::shared_ptr<const FockBasis>;

/// a_mode applied in place. Returns the amplitude, or nullopt when the
/// result vanishes.
std::optional<double> annihilate(Statistics statistics, Occupation& state, std::size_t mode);

/// a+_mode applied in place. Bosonic creation is not truncated here; callers
/// look the result up in the basis.
std::optional<double> create(Statistics statistics, Occupation& state, std::size_t mode);

/// Ordered basis of the two-particle sector: pairs i < j for fermions,
/// i <= j for bosons. The normalized pair creator is a+_i a+_j for i != j and
/// (a+_i)^2 / sqrt(2) for a bosonic double occupation.
struct PairBasis {
  Statistics statistics = Statistics::fermionic;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;

  static PairBasis make(Statistics statistics, std::size_t m);
  Eigen::Index size() const { return static_cast<Eigen::Index>(pairs.size()); }
};

/// Applies the normalized pair annihilator of `pair` to a state in place.
std::optional<double> annihilate_pair(Statistics statistics, Occupation& state,
                                      std::pair<std::size_t, std::size_t> pair);

/// Dense Hermitian operator on a FockBasis.
struct FockOperator {
  BasisPtr basis;
  ComplexMatrix matrix;
  bool block_diagonal = false;

  /// Block of the operator on the given sector.
  ComplexMatrix sector_block(const FockBasis::Sector& sector) const;
  bool is_hermitian(double tol = 1e-12) const;
  /// True when every element coupling different sectors is exactly zero.
  bool conserves_particle_number() const;
};

FockOperator operator+(const FockOperator& a, const FockOperator& b);
FockOperator operator*(double scale, const FockOperator& a);

/// dGamma(A) = sum_ij A_ij a+_i a_j on the truncated space.
FockOperator second_quantize_onebody(const OneBodyOperator& a, const BasisPtr& basis);

/// Second quantization of a pair observable given in the PairBasis:
/// sum_pq A_pq c+_p c_q.
FockOperator second_quantize_pair_operator(const ComplexMatrix& a, const BasisPtr& basis);

/// Diagonal of sum_{i<j} weight(i,j) n_i n_j + sum_i weight(i,i) n_i (n_i - 1)/2
/// in the occupation basis.
RealVector pair_interaction_diagonal(
    const FockBasis& basis, const std::function<double(std::size_t, std::size_t)>& weight);

/// Interaction W built from a distance table w_table[d] = w(d h).
FockOperator second_quantize_twobody(const RealVector& w_table, const BasisPtr& basis);

/// Number operator dGamma(Id).
FockOperator number_operator(const BasisPtr& basis);

/// Lower-bound certificate for the truncated many-body operator.
struct StabilityCertificate {
  double c0 = 0.0;
  /// Recorded gamma, strictly inside (0, 1).
  double gamma = 0.0;
  /// Per sector n = 1..n_max, the largest g with H_n - g (H_n^c + n) >= 0.
  std::vector<double> sector_bounds;
};

/// Computes C0 by enumeration, rejects r0 <= C0, then finds the largest
/// gamma for which H_n - gamma (H_n^c + n) is positive semidefinite on every
/// sector of the truncation.
StabilityCertificate certify_stability(const LatticeSpec& spec, const BasisPtr& basis);

/// H = dGamma(h0 + V + r0) + W. Throws StabilityError when r0 <= C0.
FockOperator build_hamiltonian(const LatticeSpec& spec, const BasisPtr& basis);

/// dGamma(h_c) = dGamma(h0 + v_c).
FockOperator build_confined_hamiltonian(const LatticeSpec& spec, const BasisPtr& basis);

}  // namespace locgibbs
