#include "itl/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "itl/error.hpp"

namespace itl {

namespace {

constexpr double kXzcTol = 1e-8;
constexpr double kSubspaceTol = 1e-8;
// Absolute allowance, relative to ‖A⁻¹f‖_A, for errors already at roundoff level.
constexpr double kRoundoffFloor = 1e-12;

void require_eps(double eps) {
  if (!(eps >= 0.0 && eps < 1.0)) throw Error(ErrorKind::ConfigError, "epsilon must lie in [0, 1)");
}

Matrix projector_a(const SymMatrix& a, const Matrix& p) {
  const Cholesky ac(galerkin(p, a));
  return p * ac.solve((a.matrix() * p).transposed());
}

double clamp_radicand(double radicand) {
  if (radicand < -1e-12) throw Error(ErrorKind::NegativeRadicand, "bound radicand is negative");
  return std::sqrt(std::clamp(radicand, 0.0, 1.0));
}

// Eigenvalues of A^{1/2}·B⁻¹·A^{1/2}, via the similar matrix Lᵀ·B⁻¹·L.
Vector preconditioned_spectrum(const Hierarchy& h, const SymMatrix& b_inv) {
  const Matrix& l = h.A_factor().lower();
  return sym_eigenvalues(SymMatrix(l.transposed() * (b_inv.matrix() * l)));
}

}  // namespace

SymMatrix a_symmetrized(const Matrix& e, const Cholesky& a_factor) {
  const Matrix& l = a_factor.lower();
  const Matrix ct = e.transposed() * l;  // (LᵀE)ᵀ
  Matrix out(ct.rows(), ct.cols());
  for (std::size_t j = 0; j < ct.cols(); ++j) out.set_column(j, a_factor.solve_lower(ct.column(j)));
  return SymMatrix(out.transposed());
}

double norm_E_TL(const Hierarchy& h) { return sym_eigenvalues(a_symmetrized(assemble_E_TL(h), h.A_factor())).back(); }

double convergence_factor_TL(const Hierarchy& h) {
  return 1.0 - preconditioned_spectrum(h, assemble_B_TL(h).B_inv).front();
}

double K_TL_spectral(const Hierarchy& h) { return 1.0 / preconditioned_spectrum(h, assemble_B_TL(h).B_inv).front(); }

double K_TL_supinf(const Hierarchy& h) {
  const std::size_t n = h.n();
  const Matrix i_pi = Matrix::identity(n) - h.Pi_A();
  const Matrix t = i_pi * h.S();
  const SymMatrix g(t * (inverse_spd(h.Mtilde_s()).matrix() * t.transposed()));
  const EigDecomp eig = sym_eig(g);
  const double cutoff = kRankTol * std::max(eig.values.back(), 0.0);

  std::vector<Vector> basis;
  Vector inv_lambda;
  for (std::size_t k = 0; k < n; ++k) {
    if (eig.values[k] > cutoff) {
      basis.push_back(eig.vectors.column(k));
      inv_lambda.push_back(1.0 / eig.values[k]);
    }
  }
  if (basis.size() != n - h.n_c()) {
    throw Error(ErrorKind::SubspaceMismatch, "rank(G) = " + std::to_string(basis.size()) + ", expected n - n_c = " +
                                                 std::to_string(n - h.n_c()));
  }
  const Matrix q = Matrix::from_columns(basis, n);
  const Matrix outside = i_pi - q * (q.transposed() * i_pi);
  if (outside.max_abs() > kSubspaceTol * std::max(1.0, i_pi.max_abs())) {
    throw Error(ErrorKind::SubspaceMismatch, "Range(I - Pi_A) is not contained in Range(G)");
  }
  return generalized_eigenvalues(SymMatrix::diagonal(inv_lambda), galerkin(q, h.A())).back();
}

KtlPair K_TL(const Hierarchy& h) { return {K_TL_spectral(h), K_TL_supinf(h)}; }

SymMatrix mtilde(const SymMatrix& a, const Matrix& m) {
  const Cholesky d(SymMatrix(m + m.transposed() - a.matrix()));
  return SymMatrix(m.transposed() * d.solve(m));
}

Matrix pi_mtilde(const Matrix& p, const SymMatrix& mt) {
  const Matrix mp = mt.matrix() * p;
  return p * Cholesky(galerkin(p, mt)).solve(mp.transposed());
}

double K_TG(const SymMatrix& a, const Matrix& p, const Matrix& m) {
  if (!(p.cols() < p.rows())) throw Error(ErrorKind::InvalidSize, "K_TG requires n_c < n");
  const SymMatrix mt = mtilde(a, m);
  const Matrix i_pi = Matrix::identity(a.size()) - pi_mtilde(p, mt);
  return generalized_eigenvalues(galerkin(i_pi, mt), a).back();
}

double norm_E_TG(const SymMatrix& a, const Matrix& p, const Matrix& m) {
  return sym_eigenvalues(a_symmetrized(assemble_E_TG(a, p, m), Cholesky(a))).back();
}

std::string to_string(XzcBranch branch) { return branch == XzcBranch::FullRank ? "full_rank" : "deficient"; }

XzcResult mu_and_lemma_XZc(const Hierarchy& h) {
  const Matrix& a = h.A().matrix();
  const SymMatrix n_op(a * h.Pi_A());
  const SymMatrix y(h.S() * (inverse_spd(h.Mtilde_s()).matrix() * h.S().transposed()));
  const SymMatrix x(h.A_factor().inverse().matrix() - y.matrix());

  XzcResult out;
  // (I − S M̃⁻¹SᵀA)Π_A = (A⁻¹ − S M̃⁻¹Sᵀ)·AΠ_A, and AΠ_A is SPSD of rank n_c.
  out.lambda_max = spectrum_of_spsd_product(n_op, x).back();
  // The spectrum lies in [0, 1], so 1 is the reference for "positive".
  const double mu = lambda_min_positive(spectrum_of_spsd_product(n_op, y), kRankTol, 1.0);
  if (!std::isnan(mu)) out.mu_TL = mu;
  const double sap_bound = h.S().frobenius() * h.A().matrix().frobenius() * h.P().frobenius();
  out.rank_SAP = numeric_rank(h.S().transposed() * (a * h.P()), kRankTol, sap_bound);
  out.branch = out.rank_SAP == h.n_c() ? XzcBranch::FullRank : XzcBranch::Deficient;
  if (out.branch == XzcBranch::FullRank) {
    if (!out.mu_TL) throw Error(ErrorKind::BranchMismatch, "full-rank branch but mu_TL is undefined");
    out.gap = std::abs(out.lambda_max - (1.0 - *out.mu_TL));
  } else {
    out.gap = std::abs(out.lambda_max - 1.0);
  }
  if (out.gap > kXzcTol) {
    throw Error(ErrorKind::BranchMismatch, to_string(out.branch) + " branch gap " + std::to_string(out.gap));
  }
  return out;
}

double sigma_ITL(double k_tl, const XzcResult& xzc, double eps) {
  require_eps(eps);
  const double base = 1.0 - 1.0 / k_tl;
  if (xzc.branch == XzcBranch::FullRank) return base + eps * (1.0 - *xzc.mu_TL);
  return base + eps;
}

double sigma_ITL(const Hierarchy& h, double eps) { return sigma_ITL(K_TL_spectral(h), mu_and_lemma_XZc(h), eps); }

double bound_no_post_TL(double k_tl, double eps) {
  require_eps(eps);
  return clamp_radicand(1.0 - (1.0 - eps * eps) / k_tl);
}

double bound_no_post_TG(double k_tg, double lambda_min_mt_a, double eps) {
  require_eps(eps);
  return clamp_radicand(1.0 - (1.0 - eps * eps) / k_tg - eps * eps * lambda_min_mt_a);
}

double bounds_no_postsmoothing(const Hierarchy& h, double eps) { return bound_no_post_TL(K_TL_spectral(h), eps); }

double bounds_no_postsmoothing(const SymMatrix& a, const Matrix& p, const Matrix& m, double eps) {
  return bound_no_post_TG(K_TG(a, p, m), lambda_min_mtilde_inv_a(a, m), eps);
}

double lambda_min_mtilde_inv_a(const SymMatrix& a, const Matrix& m) {
  return generalized_eigenvalues(a, mtilde(a, m)).front();
}

double lambda_min_pos_mtilde_inv_a_pi(const SymMatrix& a, const Matrix& p, const Matrix& m) {
  const SymMatrix n_op(a.matrix() * projector_a(a, p));
  return lambda_min_positive(spectrum_of_spsd_product(n_op, inverse_spd(mtilde(a, m))));
}

double corollary_ITG_bound(double k_tg, double lambda_pos, double eps) {
  require_eps(eps);
  return 1.0 - 1.0 / k_tg + eps * (1.0 - lambda_pos);
}

double corollary_ITG_bound(const SymMatrix& a, const Matrix& p, const Matrix& m, double eps) {
  return corollary_ITG_bound(K_TG(a, p, m), lambda_min_pos_mtilde_inv_a_pi(a, p, m), eps);
}

AccuracyCert epsilon_formulas(const SymMatrix& a_c, const SolverSpec& spec) {
  return make_solver(spec, a_c)->epsilon_apriori();
}

TheoryQuantities compute_theory(const Hierarchy& h, std::size_t supinf_max_n) {
  TheoryQuantities q;
  const BtlAssembly btl = assemble_B_TL(h);
  const Vector spectrum = preconditioned_spectrum(h, btl.B_inv);
  q.K_TL_spectral = 1.0 / spectrum.front();
  q.convergence_factor = 1.0 - spectrum.front();
  q.lambda_max_BinvA = spectrum.back();
  q.lambda_min_B_minus_A = btl.lambda_min_B_minus_A;
  q.e_tl2_residual = btl.e_tl2_residual;
  q.b_tl_form_residual = btl.form_residual;

  const Vector e_sym = sym_eigenvalues(a_symmetrized(assemble_E_TL(h), h.A_factor()));
  q.norm_E_TL = e_sym.back();
  q.lambda_min_sym_E_TL = e_sym.front();
  q.norm_E_TL_no_post = energy_operator_norm(assemble_E_TL_no_post(h), h.A());
  if (h.n() <= supinf_max_n) q.K_TL_supinf = K_TL_supinf(h);
  q.xzc = mu_and_lemma_XZc(h);

  if (h.two_grid()) {
    q.K_TG = K_TG(h.A(), h.P(), h.Ms());
    q.norm_E_TG = norm_E_TG(h.A(), h.P(), h.Ms());
    q.lambda_min_mt_a = lambda_min_mtilde_inv_a(h.A(), h.Ms());
    q.lambda_pos_mt_a_pi = lambda_min_pos_mtilde_inv_a_pi(h.A(), h.P(), h.Ms());
  }
  return q;
}

void CheckSummary::record(double value) {
  if (evaluated == 0) worst = value;
  ++evaluated;
  if (is_slack) {
    worst = std::min(worst, value);
    if (!(value >= -tolerance)) ++violations;
  } else {
    worst = std::max(worst, value);
    if (!(value <= tolerance)) ++violations;
  }
}

bool TheoryReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckSummary& c) { return c.passed(); });
}

TheoryReport verify_all(const Hierarchy& h, std::span<const RunTrace> runs, std::size_t supinf_max_n) {
  return verify_all(h, compute_theory(h, supinf_max_n), runs);
}

TheoryReport verify_all(const Hierarchy& h, const TheoryQuantities& q, std::span<const RunTrace> runs) {
  TheoryReport report;
  report.quantities = q;

  std::map<std::string, CheckSummary> checks;
  auto residual = [&](const std::string& name, double tol, double value) {
    auto& c = checks[name];
    c.name = name;
    c.tolerance = tol;
    c.record(value);
    report.identity_residuals[name] = value;
  };
  auto slack = [&](const std::string& name, double tol) -> CheckSummary& {
    auto& c = checks[name];
    c.name = name;
    c.is_slack = true;
    c.tolerance = tol;
    return c;
  };

  residual("tl_identity_gap", 1e-9, std::abs((1.0 - 1.0 / q.K_TL_spectral) - q.norm_E_TL));
  if (q.K_TL_supinf) {
    residual("k_tl_supinf_rel_gap", 1e-7, std::abs(*q.K_TL_supinf - q.K_TL_spectral) / q.K_TL_spectral);
  }
  residual("xzc_gap", kXzcTol, q.xzc.gap);
  residual("e_tl2_residual", 1e-9, q.e_tl2_residual);
  residual("b_tl_form_residual", 1e-9, q.b_tl_form_residual);
  residual("lambda_max_BinvA_minus_1", 1e-9, std::abs(q.lambda_max_BinvA - 1.0));
  residual("no_post_factor_gap", 1e-9,
           std::abs(q.norm_E_TL_no_post * q.norm_E_TL_no_post - (1.0 - 1.0 / q.K_TL_spectral)));
  report.identity_residuals["lambda_min_sym_E_TL"] = q.lambda_min_sym_E_TL;
  slack("lambda_min_sym_E_TL", 1e-12).record(q.lambda_min_sym_E_TL);
  report.identity_residuals["lambda_min_B_minus_A"] = q.lambda_min_B_minus_A;
  slack("lambda_min_B_minus_A", 1e-10).record(q.lambda_min_B_minus_A);
  report.identity_residuals["pi_idempotency"] = h.residuals().pi_idempotency;
  report.identity_residuals["a_pi_symmetry"] = h.residuals().a_pi_symmetry;
  if (q.K_TG) residual("tg_identity_gap", 1e-9, std::abs((1.0 - 1.0 / *q.K_TG) - *q.norm_E_TG));

  report.epsilon_cert = runs.empty() ? AccuracyCert{0.0, CertMode::Deterministic} : runs.front().certificate;
  for (const RunTrace& run : runs) {
    if (run.certificate.epsilon > report.epsilon_cert.epsilon) report.epsilon_cert.epsilon = run.certificate.epsilon;
    if (run.certificate.mode == CertMode::InExpectation) report.epsilon_cert.mode = CertMode::InExpectation;
  }

  for (const RunTrace& run : runs) {
    for (const SweepRecord& sweep : run.sweeps) {
      const InnerTrace& inner = sweep.inner;
      if (inner.iterates.empty()) throw Error(ErrorKind::InvalidSize, "sweep record has no inner trace");
      const double eps = inner.eps_product();
      report.epsilon_measured = std::max(report.epsilon_measured, eps);

      // Chained accuracy and the inner-product inequalities that follow from it.
      const Vector& r = inner.residuals.front();
      const Vector& e = inner.iterates.back();
      const double r_norm = dual_norm(h.Ac_factor(), r);
      const double r2 = r_norm * r_norm;
      if (r2 > 0.0) {
        const double e_norm = std::sqrt(std::max(0.0, dot(e, h.Ac().matrix() * e)));
        const double rte = dot(r, e);
        slack("accu_product", 1e-10).record(eps - inner.overall_accuracy);
        slack("rte_low", 1e-10).record((rte - 0.5 * ((1.0 - eps * eps) * r2 + e_norm * e_norm)) / r2);
        slack("cauchy_schwarz", 1e-10).record((r_norm * e_norm - rte) / r2);
        slack("e_low", 1e-10).record((e_norm - (1.0 - eps) * r_norm) / r_norm);
        slack("e_up", 1e-10).record(((1.0 + eps) * r_norm - e_norm) / r_norm);
        slack("rte_sandwich_low", 1e-10).record((rte - (1.0 - eps) * r2) / r2);
        slack("rte_sandwich_up", 1e-10).record(((1.0 + eps) * r2 - rte) / r2);
      }

      if (!(sweep.err0 > 0.0)) continue;
      const double floor = kRoundoffFloor * run.solution_energy / sweep.err0;
      const double post_rate = sweep.err_final / sweep.err0 - floor;
      const double no_post_rate = sweep.err2 / sweep.err0 - floor;
      if (!(eps < 1.0)) {
        ++slack("tl_bound_post", 1e-9).skipped;
        ++slack("tl_bound_no_post", 1e-9).skipped;
        continue;
      }
      if (run.postsmoothing) slack("tl_bound_post", 1e-9).record(sigma_ITL(q.K_TL_spectral, q.xzc, eps) - post_rate);
      slack("tl_bound_no_post", 1e-9).record(bound_no_post_TL(q.K_TL_spectral, eps) - no_post_rate);
      if (q.K_TG) {
        if (run.postsmoothing) {
          slack("tg_bound_post", 1e-9).record(corollary_ITG_bound(*q.K_TG, *q.lambda_pos_mt_a_pi, eps) - post_rate);
        }
        slack("tg_bound_no_post", 1e-9).record(bound_no_post_TG(*q.K_TG, *q.lambda_min_mt_a, eps) - no_post_rate);
      }
    }
  }

  const double eps_eval = std::min(report.epsilon_measured, std::nextafter(1.0, 0.0));
  report.sigma_ITL = sigma_ITL(q.K_TL_spectral, q.xzc, eps_eval);
  report.bound_no_post = bound_no_post_TL(q.K_TL_spectral, eps_eval);
  if (q.K_TG) {
    report.bound_ITG = corollary_ITG_bound(*q.K_TG, *q.lambda_pos_mt_a_pi, eps_eval);
    report.bound_ITG_no_post = bound_no_post_TG(*q.K_TG, *q.lambda_min_mt_a, eps_eval);
  }
  for (auto& [name, c] : checks) report.checks.push_back(std::move(c));
  return report;
}

}  // namespace itl
