#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "itl/coarse_solvers.hpp"
#include "itl/hierarchy.hpp"
#include "itl/two_level.hpp"

namespace itl {

/// A-symmetrization A^{1/2}·E·A^{-1/2}, formed as Lᵀ·E·L⁻ᵀ with A = L·Lᵀ. Symmetric exactly
/// when E is A-self-adjoint.
SymMatrix a_symmetrized(const Matrix& e, const Cholesky& a_factor);

/// ‖E_TL‖_A as λ_max of the A-symmetrized E_TL.
double norm_E_TL(const Hierarchy& h);
/// 1 − λ_min(B_TL⁻¹A) from the spectrum of A^{1/2}B_TL⁻¹A^{1/2}.
double convergence_factor_TL(const Hierarchy& h);

/// 1/λ_min(B_TL⁻¹A).
double K_TL_spectral(const Hierarchy& h);
/// max over v ∈ Range(G), v ≠ 0, of vᵀG⁺v / vᵀAv with T = (I−Π_A)S, G = T·M̃_s⁻¹·Tᵀ.
/// Throws SubspaceMismatch when Range(G) ≠ Range(I−Π_A) numerically.
double K_TL_supinf(const Hierarchy& h);

struct KtlPair {
  double spectral = 0.0;
  double supinf = 0.0;
};
KtlPair K_TL(const Hierarchy& h);

/// Mᵀ(M + Mᵀ − A)⁻¹M
SymMatrix mtilde(const SymMatrix& a, const Matrix& m);
/// P(PᵀM̃P)⁻¹PᵀM̃
Matrix pi_mtilde(const Matrix& p, const SymMatrix& mt);
/// λ_max of the pencil ((I−Π_M̃)ᵀM̃(I−Π_M̃), A).
double K_TG(const SymMatrix& a, const Matrix& p, const Matrix& m);
/// ‖E_TG‖_A from the assembled two-grid error propagator.
double norm_E_TG(const SymMatrix& a, const Matrix& p, const Matrix& m);

enum class XzcBranch { FullRank, Deficient };
std::string to_string(XzcBranch branch);

struct XzcResult {
  std::optional<double> mu_TL;  // λ_min⁺(S M̃_s⁻¹ SᵀA Π_A); absent when the product vanishes
  double lambda_max = 0.0;      // λ_max((I − S M̃_s⁻¹ SᵀA)Π_A)
  XzcBranch branch = XzcBranch::FullRank;
  std::size_t rank_SAP = 0;
  double gap = 0.0;  // |lambda_max − (1 − μ)| or |lambda_max − 1|
};

/// Throws BranchMismatch when the gap exceeds 1e-8.
XzcResult mu_and_lemma_XZc(const Hierarchy& h);

/// 1 − 1/K + ε(1 − μ) on the full-rank branch, 1 − 1/K + ε otherwise.
double sigma_ITL(double k_tl, const XzcResult& xzc, double eps);
double sigma_ITL(const Hierarchy& h, double eps);

/// (1 − (1−ε²)/K_TL)^{1/2}
double bound_no_post_TL(double k_tl, double eps);
/// (1 − (1−ε²)/K_TG − ε²λ_min(M̃⁻¹A))^{1/2}
double bound_no_post_TG(double k_tg, double lambda_min_mt_a, double eps);
double bounds_no_postsmoothing(const Hierarchy& h, double eps);
double bounds_no_postsmoothing(const SymMatrix& a, const Matrix& p, const Matrix& m, double eps);

/// λ_min(M̃⁻¹A)
double lambda_min_mtilde_inv_a(const SymMatrix& a, const Matrix& m);
/// λ_min⁺(M̃⁻¹AΠ_A)
double lambda_min_pos_mtilde_inv_a_pi(const SymMatrix& a, const Matrix& p, const Matrix& m);
/// 1 − 1/K_TG + ε(1 − λ_min⁺(M̃⁻¹AΠ_A))
double corollary_ITG_bound(double k_tg, double lambda_pos, double eps);
double corollary_ITG_bound(const SymMatrix& a, const Matrix& p, const Matrix& m, double eps);

/// A-priori certificate for one solver description.
AccuracyCert epsilon_formulas(const SymMatrix& a_c, const SolverSpec& spec);

/// Everything that depends only on the hierarchy.
struct TheoryQuantities {
  double norm_E_TL = 0.0;
  double convergence_factor = 0.0;
  double K_TL_spectral = 0.0;
  std::optional<double> K_TL_supinf;
  XzcResult xzc;
  double lambda_max_BinvA = 0.0;
  double lambda_min_sym_E_TL = 0.0;
  double lambda_min_B_minus_A = 0.0;
  double e_tl2_residual = 0.0;
  double b_tl_form_residual = 0.0;
  double norm_E_TL_no_post = 0.0;
  // Present for S = I hierarchies.
  std::optional<double> K_TG;
  std::optional<double> norm_E_TG;
  std::optional<double> lambda_min_mt_a;
  std::optional<double> lambda_pos_mt_a_pi;
};

/// The sup–inf path runs only when n ≤ supinf_max_n.
TheoryQuantities compute_theory(const Hierarchy& h, std::size_t supinf_max_n = 12);

/// Aggregated outcome of one named check. Residual checks pass when every value is at most
/// the tolerance; slack checks pass when every value is at least −tolerance.
struct CheckSummary {
  std::string name;
  bool is_slack = false;
  double tolerance = 0.0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;  // bound checks whose measured ε was ≥ 1
  std::size_t violations = 0;
  double worst = 0.0;

  void record(double value);
  bool passed() const noexcept { return violations == 0; }
};

struct TheoryReport {
  TheoryQuantities quantities;
  AccuracyCert epsilon_cert;
  double epsilon_measured = 0.0;  // largest ∏ measured_eps over the runs
  double sigma_ITL = 0.0;         // at epsilon_measured
  double bound_no_post = 0.0;
  std::optional<double> bound_ITG;
  std::optional<double> bound_ITG_no_post;
  std::map<std::string, double> identity_residuals;
  std::vector<CheckSummary> checks;

  bool all_passed() const;
};

/// Evaluates the identity suite on h and every bound/accuracy check on the runs.
TheoryReport verify_all(const Hierarchy& h, std::span<const RunTrace> runs, std::size_t supinf_max_n = 12);
TheoryReport verify_all(const Hierarchy& h, const TheoryQuantities& q, std::span<const RunTrace> runs);

}  // namespace itl
