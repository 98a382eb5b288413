#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "itl/coarse_solvers.hpp"
#include "itl/hierarchy.hpp"

namespace itl {

struct RunConfig {
  std::size_t nu = 1;
  bool postsmoothing = true;
  std::size_t outer_sweeps = 1;
  std::vector<SolverSpec> inner{SolverSpec{}};
  std::uint64_t seed = 0;
  std::uint64_t trial = 0;

  /// Throws ConfigError unless ν ≥ 1, outer_sweeps ≥ 1 and the chain has 1 or ν entries.
  void validate() const;
};

/// Expands the configured chain to ν solvers on A_c; a single entry is repeated.
std::vector<CoarseSolverPtr> build_chain(const RunConfig& config, const SymMatrix& a_c);

/// Energy errors of one outer sweep against u = A⁻¹f.
struct SweepRecord {
  double err0 = 0.0;       // ‖u − u⁽⁰⁾‖_A
  double err1 = 0.0;       // after presmoothing
  double err2 = 0.0;       // after the coarse correction
  double err_final = 0.0;  // after postsmoothing (err2 when it is skipped)
  InnerTrace inner;
};

struct RunTrace {
  std::vector<SweepRecord> sweeps;
  Vector u;                  // final iterate
  AccuracyCert certificate;  // a-priori product over the chain
  std::vector<std::string> solver_labels;
  bool postsmoothing = true;
  double solution_energy = 0.0;  // ‖A⁻¹f‖_A, the scale of roundoff in the errors
};

/// One sweep of the exact method: presmoothing with M_s⁻¹, exact coarse correction,
/// postsmoothing with M_s⁻ᵀ.
Vector exact_two_level_step(const Hierarchy& h, std::span<const double> u0, std::span<const double> f);

/// One sweep with an inexact coarse solve; the inner record is written to `inner` if given.
Vector inexact_two_level_step(const Hierarchy& h, std::span<const double> u0, std::span<const double> f,
                              std::span<const CoarseSolverPtr> chain, bool postsmoothing, std::uint64_t stream_seed,
                              InnerTrace* inner = nullptr, Vector* u1 = nullptr, Vector* u2 = nullptr);

RunTrace exact_two_level(const Hierarchy& h, std::span<const double> f, std::span<const double> u0,
                         std::size_t outer_sweeps = 1);

/// Sweep t of trial τ draws its inner streams from derive_seed(seed, {τ, t}).
RunTrace inexact_two_level(const Hierarchy& h, std::span<const double> f, std::span<const double> u0,
                           const RunConfig& config);

/// Two-grid variant: S = I, smoother M on the whole space.
Hierarchy two_grid_hierarchy(const SymMatrix& a, const Matrix& p, const Matrix& m);
RunTrace inexact_two_grid(const SymMatrix& a, const Matrix& p, const Matrix& m, std::span<const double> f,
                          std::span<const double> u0, const RunConfig& config);

/// (I − S M_s⁻ᵀ SᵀA)(I − Π_A)(I − S M_s⁻¹ SᵀA)
Matrix assemble_E_TL(const Hierarchy& h);
/// (I − Π_A)(I − S M_s⁻¹ SᵀA): one sweep without postsmoothing.
Matrix assemble_E_TL_no_post(const Hierarchy& h);
/// (I − M⁻ᵀA)(I − Π_A)(I − M⁻¹A)
Matrix assemble_E_TG(const SymMatrix& a, const Matrix& p, const Matrix& m);

struct BtlAssembly {
  SymMatrix B_inv;               // direct form
  SymMatrix B_inv_hierarchical;  // [S P] B̂⁻¹ [S P]ᵀ
  double form_residual = 0.0;    // max |direct − hierarchical| / max |direct|
  double e_tl2_residual = 0.0;   // max |E_TL − (I − B⁻¹A)|
  double lambda_min_B_minus_A = 0.0;  // relative to λ_max(A)
  Vector spectrum_Binv_A;        // λ(B⁻¹A), ascending
};

BtlAssembly assemble_B_TL(const Hierarchy& h);

}  // namespace itl
