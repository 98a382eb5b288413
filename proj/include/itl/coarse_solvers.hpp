#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "itl/linalg.hpp"
#include "itl/matrix.hpp"
#include "itl/random.hpp"

namespace itl {

class Hierarchy;

enum class CertMode { Deterministic, InExpectation };

/// ‖A_c⁻¹r − 𝔅⟦r⟧‖_{A_c} ≤ ε‖r‖_{A_c⁻¹}, either for every r or in expectation.
struct AccuracyCert {
  double epsilon = 0.0;
  CertMode mode = CertMode::Deterministic;

  /// The accuracy lemma needs ε < 1.
  bool usable() const noexcept { return epsilon < 1.0; }
};

std::string to_string(CertMode mode);

/// Inner solver r ↦ e ≈ A_c⁻¹r. May be nonlinear and randomized; the result is a
/// function of (r, rng state) only.
class CoarseSolver {
 public:
  virtual ~CoarseSolver() = default;

  virtual Vector apply(std::span<const double> r, Rng& rng) const = 0;
  virtual AccuracyCert epsilon_apriori() const = 0;
  virtual std::string label() const = 0;
};

using CoarseSolverPtr = std::shared_ptr<const CoarseSolver>;

/// Cholesky solve; ε = 0.
CoarseSolverPtr exact_solver(const SymMatrix& a_c);
CoarseSolverPtr exact_solver(const Hierarchy& h);

/// `ell` plain CG steps from a zero initial guess; ε = 2((√κ−1)/(√κ+1))^ℓ.
CoarseSolverPtr cg_solver(const SymMatrix& a_c, std::size_t ell);
/// Condition number κ_c = λ_max/λ_min.
double spectral_condition_number(const SymMatrix& a);
/// 2((√κ−1)/(√κ+1))^ℓ
double cg_epsilon(double kappa, std::size_t ell);
/// (log₂((√κ+1)/(√κ−1)))⁻¹; the CG factor is below 1 exactly for larger ℓ. Zero when κ = 1.
double cg_ell_threshold(double kappa);

/// `ell` coordinate steps with p_i = (A_c)_ii / tr(A_c); in-expectation ε = (1 − λ_min/tr)^{ℓ/2}.
CoarseSolverPtr rcd_solver(const SymMatrix& a_c, std::size_t ell);

using Partition = std::vector<std::vector<std::size_t>>;
/// `ell` block steps, block drawn uniformly from the partition; ε = (1 − λ_min(W))^{ℓ/2}.
CoarseSolverPtr rbcd_solver(const SymMatrix& a_c, std::size_t ell, Partition blocks);
/// W = 𝔼[I_Ω(I_ΩᵀA_cI_Ω)⁻¹I_ΩᵀA_c] over a uniform draw from the partition, by enumeration.
Matrix rbcd_expected_matrix(const SymMatrix& a_c, const Partition& blocks);
/// I_Ω(I_ΩᵀA_cI_Ω)⁻¹I_ΩᵀA_c for one block.
Matrix rbcd_block_matrix(const SymMatrix& a_c, const std::vector<std::size_t>& block);
/// λ_min(W) via the symmetrization W ~ A_c^{1/2} C A_c^{1/2}.
double rbcd_lambda_min(const SymMatrix& a_c, const Partition& blocks);
/// Contiguous blocks of the given size (last block may be shorter).
Partition contiguous_partition(std::size_t n, std::size_t block_size);

/// One application of B_c⁻¹; ε = max |1 − λ(B_c⁻¹A_c)|.
CoarseSolverPtr stationary_solver(const SymMatrix& a_c, const SymMatrix& b_c);
/// λ(B_c⁻¹A_c), ascending.
Vector stationary_spectrum(const SymMatrix& a_c, const SymMatrix& b_c);

/// Record of the inner recurrence e⁽ᵏ⁾ = e⁽ᵏ⁻¹⁾ + 𝔅⁽ᵏ⁾⟦r_c − A_c e⁽ᵏ⁻¹⁾⟧.
struct InnerTrace {
  std::vector<Vector> residuals;  // r_0 = r_c, r_k = r_c − A_c e⁽ᵏ⁾
  std::vector<Vector> iterates;   // e⁽¹⁾ … e⁽ᵛ⁾
  Vector measured_eps;            // ‖A_c⁻¹r_{k−1} − 𝔅⁽ᵏ⁾⟦r_{k−1}⟧‖_{A_c} / ‖r_{k−1}‖_{A_c⁻¹}
  double overall_accuracy = 0.0;  // ‖A_c⁻¹r_c − e⁽ᵛ⁾‖_{A_c} / ‖r_c‖_{A_c⁻¹}
  bool short_circuited = false;

  double eps_product() const;
};

struct InnerResult {
  Vector e;
  InnerTrace trace;
};

/// Runs the chain once per solver. Step k draws from Rng(derive_seed(stream_seed, {k})).
/// Accuracies are measured with the exact factor of A_c, which the solvers never see.
/// When ‖r_{k−1}‖_{A_c⁻¹} ≤ 1e-14·‖r_c‖_{A_c⁻¹} (or r_c = 0) the step records ε = 0 and
/// the remaining steps are skipped.
InnerResult run_inner(const SymMatrix& a_c, const Cholesky& a_c_factor, std::span<const double> r_c,
                      std::span<const CoarseSolverPtr> solvers, std::uint64_t stream_seed);
InnerResult run_inner(const Hierarchy& h, std::span<const double> r_c, std::span<const CoarseSolverPtr> solvers,
                      std::uint64_t stream_seed);

/// ‖A_c⁻¹r − e‖_{A_c} and ‖r‖_{A_c⁻¹} from the Cholesky factor: ‖L⁻¹r − Lᵀe‖₂ and ‖L⁻¹r‖₂.
double coarse_error_norm(const Cholesky& a_c_factor, std::span<const double> r, std::span<const double> e);
double dual_norm(const Cholesky& a_c_factor, std::span<const double> r);

/// Declarative solver description, as read from the run configuration.
struct SolverSpec {
  std::string kind = "exact";  // exact | cg | rcd | rbcd | stationary
  std::size_t ell = 1;
  Partition blocks;           // rbcd; empty means contiguous blocks of block_size
  std::size_t block_size = 2;
  std::string matrix = "diag";  // stationary: diag | scaled
  double scale = 1.0;           // stationary "scaled": B_c = scale·A_c

  std::string label() const;
};

/// Throws UnknownSolver for unrecognized kinds.
CoarseSolverPtr make_solver(const SolverSpec& spec, const SymMatrix& a_c);
/// Product of the a-priori certificates; in-expectation if any factor is.
AccuracyCert chain_certificate(std::span<const CoarseSolverPtr> solvers);

}  // namespace itl
