#pragma once

#include <span>
#include <vector>

#include "itl/matrix.hpp"

namespace itl {

/// Default relative threshold below which eigenvalues / singular values count as zero.
inline constexpr double kRankTol = 1e-10;
/// Cholesky pivots must exceed this multiple of the largest diagonal entry.
inline constexpr double kPivotRelTol = 1e-12;
inline constexpr int kJacobiMaxSweeps = 100;

/// Lower-triangular factor L with L·Lᵀ = A. Throws NotSPD on a pivot at or below
/// kPivotRelTol·max(diag A).
Matrix cholesky(const SymMatrix& a);

/// Reusable Cholesky factorization.
class Cholesky {
 public:
  explicit Cholesky(const SymMatrix& a);

  std::size_t size() const noexcept { return l_.rows(); }
  const Matrix& lower() const noexcept { return l_; }

  Vector solve(std::span<const double> b) const;
  Matrix solve(const Matrix& b) const;
  /// L⁻¹·b and L⁻ᵀ·b.
  Vector solve_lower(std::span<const double> b) const;
  Vector solve_upper(std::span<const double> b) const;
  /// L⁻¹·X·L⁻ᵀ for square X; symmetric when X is.
  Matrix congruence_inverse(const Matrix& x) const;
  SymMatrix inverse() const;

 private:
  Matrix l_;
};

/// LU factorization with partial pivoting for general square matrices (smoothers may be
/// nonsymmetric).
class Lu {
 public:
  explicit Lu(const Matrix& a);

  std::size_t size() const noexcept { return lu_.rows(); }
  Vector solve(std::span<const double> b) const;
  /// Solves Aᵀ·x = b.
  Vector solve_transposed(std::span<const double> b) const;
  Matrix solve(const Matrix& b) const;
  Matrix solve_transposed(const Matrix& b) const;
  Matrix inverse() const;

 private:
  Matrix lu_;
  std::vector<std::size_t> perm_;
};

struct EigDecomp {
  Vector values;   // ascending
  Matrix vectors;  // column k pairs with values[k]
};

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm is at most 1e-14·‖A‖_F.
EigDecomp sym_eig(const SymMatrix& a);
Vector sym_eigenvalues(const SymMatrix& a);

SymMatrix pseudo_inverse(const SymMatrix& a, double rank_tol = kRankTol);
/// Counts eigenvalues of BᵀB above rank_tol·max(σ_max², reference²). A nonzero `reference`
/// (an a-priori bound on ‖B‖₂) keeps pure rounding noise from counting as rank.
std::size_t numeric_rank(const Matrix& b, double rank_tol = kRankTol, double reference = 0.0);
double energy_norm(std::span<const double> v, const SymMatrix& a);
SymMatrix sym_sqrt(const SymMatrix& a, double rank_tol = kRankTol);
SymMatrix inv_sqrt(const SymMatrix& a);

/// Eigenvalues (ascending) of N·X for SPSD X, obtained as those of X^{1/2}·N·X^{1/2}.
/// Directions in the numerical null space of X contribute exact zeros.
Vector spectrum_of_spsd_product(const SymMatrix& x, const SymMatrix& n, double rank_tol = kRankTol);

/// Eigenvalues of the pencil (X, B) with B SPD, via L⁻¹·X·L⁻ᵀ.
Vector generalized_eigenvalues(const SymMatrix& x, const SymMatrix& b);

/// ‖E‖_A = max ‖E·v‖_A / ‖v‖_A for SPD A.
double energy_operator_norm(const Matrix& e, const SymMatrix& a);

/// Smallest eigenvalue above rank_tol·max(max|λ|, reference); NaN when none qualifies.
double lambda_min_positive(std::span<const double> ascending, double rank_tol = kRankTol, double reference = 0.0);

SymMatrix inverse_spd(const SymMatrix& a);

/// Sᵀ·A·S, symmetrized.
SymMatrix galerkin(const Matrix& s, const SymMatrix& a);

}  // namespace itl
