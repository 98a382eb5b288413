#pragma once

#include <string>

#include "itl/linalg.hpp"
#include "itl/matrix.hpp"
#include "itl/problems.hpp"

namespace itl {

enum class SmootherKind { Jacobi, WeightedJacobi, GaussSeidel, Exact, Custom };

std::string to_string(SmootherKind kind);

/// Local smoother M_s acting on the smoothing space; may be nonsymmetric.
struct Smoother {
  Matrix M;
  SmootherKind kind = SmootherKind::Custom;
  double omega = 1.0;

  std::string label() const;
};

/// λ_min(M + Mᵀ − A_s); the smoother is valid iff this is positive.
double smoother_validity_margin(const Matrix& m, const SymMatrix& a_s);
/// ‖I − M⁻¹A_s‖_{A_s}; below 1 exactly when the validity margin is positive.
double smoother_contraction(const Matrix& m, const SymMatrix& a_s);

/// jacobi: diag(A_s); weighted_jacobi: diag(A_s)/ω; gauss_seidel: lower triangle of A_s;
/// exact: A_s. Throws SmootherInvalid with the offending margin when M + Mᵀ − A_s is not SPD.
Smoother make_smoother(SmootherKind kind, const SymMatrix& a_s, double omega = 1.0);
/// Wraps an arbitrary matrix; validity is checked at assembly.
Smoother custom_smoother(Matrix m);

/// Two-level operator bundle. Immutable once assembled.
class Hierarchy {
 public:
  /// Validates the splitting and smoother, builds every derived operator and checks the
  /// structural invariants. Throws RankCondition, SmootherInvalid or InvariantViolation.
  static Hierarchy assemble(const SymMatrix& a, SplittingSpec split, Smoother smoother);
  static Hierarchy assemble(const ProblemInstance& problem, SplittingSpec split, Smoother smoother);
  /// Builds A_s first and derives the smoother from it.
  static Hierarchy assemble(const SymMatrix& a, SplittingSpec split, SmootherKind kind, double omega = 1.0);

  const SymMatrix& A() const noexcept { return a_; }
  const SplittingSpec& split() const noexcept { return split_; }
  const Matrix& S() const noexcept { return split_.S; }
  const Matrix& P() const noexcept { return split_.P; }
  const Smoother& smoother() const noexcept { return smoother_; }
  const Matrix& Ms() const noexcept { return smoother_.M; }
  const SymMatrix& As() const noexcept { return a_s_; }
  const SymMatrix& Ac() const noexcept { return a_c_; }
  /// M_s(M_s + M_sᵀ − A_s)⁻¹M_sᵀ
  const SymMatrix& Mbar_s() const noexcept { return mbar_s_; }
  /// M_sᵀ(M_s + M_sᵀ − A_s)⁻¹M_s
  const SymMatrix& Mtilde_s() const noexcept { return mtilde_s_; }
  /// P·A_c⁻¹·Pᵀ·A
  const Matrix& Pi_A() const noexcept { return pi_a_; }
  const Cholesky& Ac_factor() const noexcept { return a_c_chol_; }
  const Cholesky& A_factor() const noexcept { return a_chol_; }

  std::size_t n() const noexcept { return split_.n(); }
  std::size_t n_s() const noexcept { return split_.n_s(); }
  std::size_t n_c() const noexcept { return split_.n_c(); }
  bool two_grid() const noexcept { return split_.two_grid; }

  Vector solve_Ms(std::span<const double> v) const { return ms_lu_.solve(v); }
  Vector solve_Ms_transposed(std::span<const double> v) const { return ms_lu_.solve_transposed(v); }
  Vector solve_Ac(std::span<const double> v) const { return a_c_chol_.solve(v); }
  Matrix Ms_inverse() const { return ms_lu_.inverse(); }

  struct Residuals {
    double pi_idempotency = 0.0;   // ‖Π_A² − Π_A‖_max / ‖Π_A‖_max
    double a_pi_symmetry = 0.0;    // ‖AΠ_A − (AΠ_A)ᵀ‖_max / ‖A‖_max
    double smoother_margin = 0.0;  // λ_min(M_s + M_sᵀ − A_s)
    double as_minus_mtilde_min = 0.0;  // λ_min(A_s⁻¹ − M̃_s⁻¹) / ‖A_s⁻¹‖₂
  };
  const Residuals& residuals() const noexcept { return residuals_; }

 private:
  Hierarchy(SymMatrix a, SplittingSpec split, Smoother smoother, SymMatrix a_s, SymMatrix a_c);

  SymMatrix a_;
  SplittingSpec split_;
  Smoother smoother_;
  SymMatrix a_s_;
  SymMatrix a_c_;
  Cholesky a_chol_;
  Cholesky a_c_chol_;
  Lu ms_lu_;
  SymMatrix mbar_s_;
  SymMatrix mtilde_s_;
  Matrix pi_a_;
  Residuals residuals_;
};

/// u + S·M_s⁻¹·Sᵀ·(f − A·u)
Vector apply_compatible_relaxation(const Hierarchy& h, std::span<const double> u, std::span<const double> f);

/// ‖I − M_s⁻¹A_s‖_{A_s} for the hierarchy's smoother.
double smoother_contraction(const Hierarchy& h);

}  // namespace itl
