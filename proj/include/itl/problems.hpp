#pragma once

#include <cstdint>
#include <string>

#include "itl/matrix.hpp"

namespace itl {

/// A·u = f with a known solution. `u_star` is for error measurement only.
struct ProblemInstance {
  SymMatrix A;
  Vector f;
  Vector u_star;
  std::string label;
};

/// Columns of S span the smoothing space, columns of P the coarse space.
struct SplittingSpec {
  Matrix S;
  Matrix P;
  std::string provenance;
  /// S = I (n_s = n): the two-grid specialization, exempt from n_s < n.
  bool two_grid = false;

  std::size_t n() const noexcept { return S.rows(); }
  std::size_t n_s() const noexcept { return S.cols(); }
  std::size_t n_c() const noexcept { return P.cols(); }
};

/// tridiag(−1, 2, −1) of size m; u_star is a seeded combination of low-frequency modes.
ProblemInstance poisson1d(std::size_t m, std::uint64_t seed = 0);
/// 5-point Laplacian on an m×m grid, lexicographic ordering.
ProblemInstance poisson2d(std::size_t m, std::uint64_t seed = 0);
/// Q·Λ·Qᵀ with Q from a seeded Gaussian QR and Λ log-uniform on [1, cond_target],
/// both endpoints included.
ProblemInstance random_spd(std::size_t n, double cond_target, std::uint64_t seed);
/// Wraps an externally supplied SPD matrix with a seeded Gaussian u_star.
ProblemInstance problem_from_matrix(const SymMatrix& a, std::uint64_t seed, std::string label);

/// Linear interpolation from the odd (0-based) nodes, injection at the even nodes.
/// Requires m odd ≥ 3.
SplittingSpec standard_splitting_1d(std::size_t m);
/// Tensor-product analogue for poisson2d(m); any m ≥ 3. Coarse nodes are those that are
/// coarse in both directions, every other node is a smoothing node.
SplittingSpec standard_splitting_2d(std::size_t m);
/// Seeded Gaussian S and P, resampled until the splitting invariants hold. With
/// `force_rank_deficient_sap` the last column of P is drawn from Null(SᵀA), so that
/// rank(SᵀAP) < n_c.
SplittingSpec random_splitting(const SymMatrix& a, std::size_t n_s, std::size_t n_c, std::uint64_t seed,
                               bool force_rank_deficient_sap = false);
/// S = (I − Π_A)·S0, so that Range(S) is the A-orthogonal complement of Range(P) when
/// [S0 P] is square and nonsingular.
SplittingSpec a_orthogonal_splitting(const SymMatrix& a, const Matrix& p, const Matrix& s0);
/// S = I with the given prolongation.
SplittingSpec two_grid_splitting(const Matrix& p);

/// Throws InvalidSize on dimension violations and RankCondition when S, P or [S P] is
/// rank deficient.
void validate_splitting(const SplittingSpec& split, double rank_tol = 1e-10);

}  // namespace itl
