#include "itl/hierarchy.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "itl/error.hpp"

namespace itl {

namespace {

constexpr double kProjectorTol = 1e-9;

SymMatrix symmetrized_margin_matrix(const Matrix& m, const SymMatrix& a_s) {
  return SymMatrix(m + m.transposed() - a_s.matrix());
}

void require_valid_smoother(const Matrix& m, const SymMatrix& a_s) {
  if (m.rows() != a_s.size() || m.cols() != a_s.size()) {
    throw Error(ErrorKind::DimensionMismatch, "smoother must be n_s x n_s");
  }
  const double margin = smoother_validity_margin(m, a_s);
  if (!(margin > 0.0)) {
    char text[64];
    std::snprintf(text, sizeof text, "%.6g", margin);
    throw Error(ErrorKind::SmootherInvalid, std::string("lambda_min(M_s + M_s^T - A_s) = ") + text);
  }
  try {
    cholesky(symmetrized_margin_matrix(m, a_s));
  } catch (const Error&) {
    throw Error(ErrorKind::SmootherInvalid, "M_s + M_s^T - A_s fails Cholesky");
  }
}

}  // namespace

std::string to_string(SmootherKind kind) {
  switch (kind) {
    case SmootherKind::Jacobi: return "jacobi";
    case SmootherKind::WeightedJacobi: return "weighted_jacobi";
    case SmootherKind::GaussSeidel: return "gauss_seidel";
    case SmootherKind::Exact: return "exact";
    case SmootherKind::Custom: return "custom";
  }
  return "custom";
}

std::string Smoother::label() const {
  if (kind != SmootherKind::WeightedJacobi) return to_string(kind);
  char text[64];
  std::snprintf(text, sizeof text, "weighted_jacobi(%g)", omega);
  return text;
}

double smoother_validity_margin(const Matrix& m, const SymMatrix& a_s) {
  return sym_eigenvalues(symmetrized_margin_matrix(m, a_s)).front();
}

double smoother_contraction(const Matrix& m, const SymMatrix& a_s) {
  const Matrix e = Matrix::identity(a_s.size()) - Lu(m).solve(a_s.matrix());
  return energy_operator_norm(e, a_s);
}

Smoother make_smoother(SmootherKind kind, const SymMatrix& a_s, double omega) {
  const std::size_t n = a_s.size();
  Smoother s;
  s.kind = kind;
  switch (kind) {
    case SmootherKind::Jacobi:
      s.M = Matrix::diagonal(a_s.diag());
      break;
    case SmootherKind::WeightedJacobi:
      if (!(omega > 0.0)) throw Error(ErrorKind::SmootherInvalid, "weighted Jacobi needs omega > 0");
      s.omega = omega;
      s.M = Matrix::diagonal(a_s.diag()) * (1.0 / omega);
      break;
    case SmootherKind::GaussSeidel:
      s.M = Matrix(n, n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) s.M(i, j) = a_s(i, j);
      break;
    case SmootherKind::Exact:
      s.M = a_s.matrix();
      break;
    case SmootherKind::Custom:
      throw Error(ErrorKind::SmootherInvalid, "custom smoothers are built with custom_smoother()");
  }
  require_valid_smoother(s.M, a_s);
  return s;
}

Smoother custom_smoother(Matrix m) {
  Smoother s;
  s.M = std::move(m);
  s.kind = SmootherKind::Custom;
  return s;
}

Hierarchy::Hierarchy(SymMatrix a, SplittingSpec split, Smoother smoother, SymMatrix a_s, SymMatrix a_c)
    : a_(std::move(a)),
      split_(std::move(split)),
      smoother_(std::move(smoother)),
      a_s_(std::move(a_s)),
      a_c_(std::move(a_c)),
      a_chol_(a_),
      a_c_chol_(a_c_),
      ms_lu_(smoother_.M) {
  const Matrix& m = smoother_.M;
  const Cholesky d_chol(symmetrized_margin_matrix(m, a_s_));
  mbar_s_ = SymMatrix(m * d_chol.solve(m.transposed()));
  mtilde_s_ = SymMatrix(m.transposed() * d_chol.solve(m));

  const Matrix ap = a_.matrix() * split_.P;
  pi_a_ = split_.P * a_c_chol_.solve(ap.transposed());

  try {
    mbar_s_ = mbar_s_.certified();
    mtilde_s_ = mtilde_s_.certified();
  } catch (const Error& e) {
    throw Error(ErrorKind::InvariantViolation, std::string("symmetrized smoother not SPD: ") + e.what());
  }

  residuals_.smoother_margin = smoother_validity_margin(m, a_s_);
  const double pi_scale = std::max(pi_a_.max_abs(), 1.0);
  residuals_.pi_idempotency = max_abs_diff(pi_a_ * pi_a_, pi_a_) / pi_scale;
  const Matrix a_pi = a_.matrix() * pi_a_;
  residuals_.a_pi_symmetry = max_abs_diff(a_pi, a_pi.transposed()) / a_.max_abs();

  const SymMatrix as_inv = Cholesky(a_s_).inverse();
  const SymMatrix mt_inv = Cholesky(mtilde_s_).inverse();
  const Vector gap = sym_eigenvalues(SymMatrix(as_inv.matrix() - mt_inv.matrix()));
  const double as_inv_norm = sym_eigenvalues(as_inv).back();
  residuals_.as_minus_mtilde_min = gap.front() / as_inv_norm;

  if (residuals_.pi_idempotency > kProjectorTol) {
    throw Error(ErrorKind::InvariantViolation, "Pi_A is not idempotent");
  }
  if (residuals_.a_pi_symmetry > kProjectorTol) {
    throw Error(ErrorKind::InvariantViolation, "A*Pi_A is not symmetric");
  }
  if (residuals_.as_minus_mtilde_min < -1e-10) {
    throw Error(ErrorKind::InvariantViolation, "A_s^{-1} - Mtilde_s^{-1} is not SPSD");
  }
}

Hierarchy Hierarchy::assemble(const SymMatrix& a, SplittingSpec split, Smoother smoother) {
  const SymMatrix a_cert = a.certified();
  validate_splitting(split);
  if (split.n() != a.size()) throw Error(ErrorKind::DimensionMismatch, "splitting does not match A");
  SymMatrix a_s = galerkin(split.S, a_cert).certified();
  SymMatrix a_c = galerkin(split.P, a_cert).certified();
  require_valid_smoother(smoother.M, a_s);
  return Hierarchy(a_cert, std::move(split), std::move(smoother), std::move(a_s), std::move(a_c));
}

Hierarchy Hierarchy::assemble(const ProblemInstance& problem, SplittingSpec split, Smoother smoother) {
  return assemble(problem.A, std::move(split), std::move(smoother));
}

Hierarchy Hierarchy::assemble(const SymMatrix& a, SplittingSpec split, SmootherKind kind, double omega) {
  if (split.n() != a.size()) throw Error(ErrorKind::DimensionMismatch, "splitting does not match A");
  Smoother smoother = make_smoother(kind, galerkin(split.S, a), omega);
  return assemble(a, std::move(split), std::move(smoother));
}

Vector apply_compatible_relaxation(const Hierarchy& h, std::span<const double> u, std::span<const double> f) {
  Vector r(f.begin(), f.end());
  axpy(-1.0, h.A().matrix() * u, r);
  const Vector correction = h.S() * h.solve_Ms(transpose_times(h.S(), r));
  Vector out(u.begin(), u.end());
  axpy(1.0, correction, out);
  return out;
}

double smoother_contraction(const Hierarchy& h) { return smoother_contraction(h.Ms(), h.As()); }

}  // namespace itl
