#include "itl/two_level.hpp"

#include <algorithm>
#include <cmath>

#include "itl/error.hpp"

namespace itl {

namespace {

Vector residual(const SymMatrix& a, std::span<const double> u, std::span<const double> f) {
  Vector r(f.begin(), f.end());
  axpy(-1.0, a.matrix() * u, r);
  return r;
}

double energy_error(const Hierarchy& h, std::span<const double> u_exact, std::span<const double> u) {
  Vector d(u_exact.begin(), u_exact.end());
  axpy(-1.0, u, d);
  return std::sqrt(std::max(0.0, dot(d, h.A().matrix() * d)));
}

Vector presmooth(const Hierarchy& h, std::span<const double> u0, std::span<const double> f) {
  Vector u(u0.begin(), u0.end());
  axpy(1.0, h.S() * h.solve_Ms(transpose_times(h.S(), residual(h.A(), u0, f))), u);
  return u;
}

Vector postsmooth(const Hierarchy& h, std::span<const double> u2, std::span<const double> f) {
  Vector u(u2.begin(), u2.end());
  axpy(1.0, h.S() * h.solve_Ms_transposed(transpose_times(h.S(), residual(h.A(), u2, f))), u);
  return u;
}

void require_lengths(const Hierarchy& h, std::span<const double> f, std::span<const double> u0) {
  if (f.size() != h.n() || u0.size() != h.n()) throw Error(ErrorKind::DimensionMismatch, "f and u0 must have length n");
}

// I − S·X·SᵀA for X = M_s⁻¹ or M_s⁻ᵀ.
Matrix smoothing_operator(const Hierarchy& h, const Matrix& x) {
  return Matrix::identity(h.n()) - h.S() * (x * (h.S().transposed() * h.A().matrix()));
}

// The exact coarse solve recorded in the same shape as an inner run of length one.
InnerTrace exact_inner_trace(const Hierarchy& h, const Vector& r_c, const Vector& e_c) {
  InnerTrace t;
  Vector r1 = r_c;
  axpy(-1.0, h.Ac().matrix() * e_c, r1);
  const double dual = dual_norm(h.Ac_factor(), r_c);
  const double acc = dual > 0.0 ? coarse_error_norm(h.Ac_factor(), r_c, e_c) / dual : 0.0;
  t.residuals = {r_c, std::move(r1)};
  t.iterates = {e_c};
  t.measured_eps = {acc};
  t.overall_accuracy = acc;
  return t;
}

}  // namespace

void RunConfig::validate() const {
  if (nu < 1) throw Error(ErrorKind::ConfigError, "nu must be at least 1");
  if (outer_sweeps < 1) throw Error(ErrorKind::ConfigError, "outer_sweeps must be at least 1");
  if (inner.size() != 1 && inner.size() != nu) {
    throw Error(ErrorKind::ConfigError, "inner chain must list 1 or nu solvers");
  }
}

std::vector<CoarseSolverPtr> build_chain(const RunConfig& config, const SymMatrix& a_c) {
  config.validate();
  std::vector<CoarseSolverPtr> chain;
  if (config.inner.size() == 1) {
    const CoarseSolverPtr s = make_solver(config.inner.front(), a_c);
    chain.assign(config.nu, s);
  } else {
    for (const auto& spec : config.inner) chain.push_back(make_solver(spec, a_c));
  }
  return chain;
}

Vector exact_two_level_step(const Hierarchy& h, std::span<const double> u0, std::span<const double> f) {
  require_lengths(h, f, u0);
  Vector u = presmooth(h, u0, f);
  const Vector r_c = transpose_times(h.P(), residual(h.A(), u, f));
  axpy(1.0, h.P() * h.solve_Ac(r_c), u);
  return postsmooth(h, u, f);
}

Vector inexact_two_level_step(const Hierarchy& h, std::span<const double> u0, std::span<const double> f,
                              std::span<const CoarseSolverPtr> chain, bool postsmoothing, std::uint64_t stream_seed,
                              InnerTrace* inner, Vector* u1, Vector* u2) {
  require_lengths(h, f, u0);
  Vector u = presmooth(h, u0, f);
  if (u1) *u1 = u;
  const Vector r_c = transpose_times(h.P(), residual(h.A(), u, f));
  InnerResult coarse = run_inner(h, r_c, chain, stream_seed);
  axpy(1.0, h.P() * coarse.e, u);
  if (u2) *u2 = u;
  if (inner) *inner = std::move(coarse.trace);
  return postsmoothing ? postsmooth(h, u, f) : u;
}

RunTrace exact_two_level(const Hierarchy& h, std::span<const double> f, std::span<const double> u0,
                         std::size_t outer_sweeps) {
  require_lengths(h, f, u0);
  if (outer_sweeps < 1) throw Error(ErrorKind::ConfigError, "outer_sweeps must be at least 1");
  const Vector u_exact = h.A_factor().solve(f);
  RunTrace trace;
  trace.solution_energy = energy_error(h, u_exact, Vector(h.n(), 0.0));
  trace.certificate = {0.0, CertMode::Deterministic};
  trace.solver_labels = {"exact"};
  trace.u.assign(u0.begin(), u0.end());
  for (std::size_t t = 0; t < outer_sweeps; ++t) {
    SweepRecord rec;
    rec.err0 = energy_error(h, u_exact, trace.u);
    Vector u = presmooth(h, trace.u, f);
    rec.err1 = energy_error(h, u_exact, u);
    const Vector r_c = transpose_times(h.P(), residual(h.A(), u, f));
    const Vector e_c = h.solve_Ac(r_c);
    axpy(1.0, h.P() * e_c, u);
    rec.err2 = energy_error(h, u_exact, u);
    rec.inner = exact_inner_trace(h, r_c, e_c);
    trace.u = postsmooth(h, u, f);
    rec.err_final = energy_error(h, u_exact, trace.u);
    trace.sweeps.push_back(std::move(rec));
  }
  return trace;
}

RunTrace inexact_two_level(const Hierarchy& h, std::span<const double> f, std::span<const double> u0,
                           const RunConfig& config) {
  require_lengths(h, f, u0);
  const std::vector<CoarseSolverPtr> chain = build_chain(config, h.Ac());
  const Vector u_exact = h.A_factor().solve(f);
  RunTrace trace;
  trace.solution_energy = energy_error(h, u_exact, Vector(h.n(), 0.0));
  trace.certificate = chain_certificate(chain);
  for (const auto& s : chain) trace.solver_labels.push_back(s->label());
  trace.postsmoothing = config.postsmoothing;
  trace.u.assign(u0.begin(), u0.end());
  for (std::size_t t = 0; t < config.outer_sweeps; ++t) {
    SweepRecord rec;
    Vector u1, u2;
    rec.err0 = energy_error(h, u_exact, trace.u);
    trace.u = inexact_two_level_step(h, trace.u, f, chain, config.postsmoothing,
                                     derive_seed(config.seed, {config.trial, t}), &rec.inner, &u1, &u2);
    rec.err1 = energy_error(h, u_exact, u1);
    rec.err2 = energy_error(h, u_exact, u2);
    rec.err_final = energy_error(h, u_exact, trace.u);
    trace.sweeps.push_back(std::move(rec));
  }
  return trace;
}

Hierarchy two_grid_hierarchy(const SymMatrix& a, const Matrix& p, const Matrix& m) {
  return Hierarchy::assemble(a, two_grid_splitting(p), custom_smoother(m));
}

RunTrace inexact_two_grid(const SymMatrix& a, const Matrix& p, const Matrix& m, std::span<const double> f,
                          std::span<const double> u0, const RunConfig& config) {
  return inexact_two_level(two_grid_hierarchy(a, p, m), f, u0, config);
}

Matrix assemble_E_TL_no_post(const Hierarchy& h) {
  const Matrix i_pi = Matrix::identity(h.n()) - h.Pi_A();
  return i_pi * smoothing_operator(h, h.Ms_inverse());
}

Matrix assemble_E_TL(const Hierarchy& h) {
  return smoothing_operator(h, h.Ms_inverse().transposed()) * assemble_E_TL_no_post(h);
}

Matrix assemble_E_TG(const SymMatrix& a, const Matrix& p, const Matrix& m) {
  return assemble_E_TL(two_grid_hierarchy(a, p, m));
}

BtlAssembly assemble_B_TL(const Hierarchy& h) {
  const std::size_t n = h.n();
  const std::size_t ns = h.n_s();
  const std::size_t nc = h.n_c();
  const Matrix& a = h.A().matrix();
  const Matrix& s = h.S();
  const Matrix& p = h.P();
  const Matrix m_inv = h.Ms_inverse();
  const Matrix m_inv_t = m_inv.transposed();
  const Matrix ac_inv = h.Ac_factor().inverse().matrix();
  // M̄_s⁻¹ = M_s⁻ᵀ(M_s + M_sᵀ − A_s)M_s⁻¹
  const Matrix mbar_inv = m_inv_t * ((h.Ms() + h.Ms().transposed() - h.As().matrix()) * m_inv);

  BtlAssembly out;
  {
    const Matrix left = Matrix::identity(n) - s * (m_inv_t * (s.transposed() * a));
    const Matrix right = Matrix::identity(n) - a * (s * (m_inv * s.transposed()));
    out.B_inv = SymMatrix(s * (mbar_inv * s.transposed()) + left * (p * (ac_inv * (p.transposed() * right))));
  }
  {
    // B̂⁻¹ = [[I, −Y],[0, I]]·diag(M̄_s⁻¹, A_c⁻¹)·[[I, 0],[−Yᵀ, I]] with Y = M_s⁻ᵀSᵀAP.
    const Matrix y = m_inv_t * (s.transposed() * (a * p));
    Matrix upper = Matrix::identity(ns + nc);
    for (std::size_t i = 0; i < ns; ++i)
      for (std::size_t j = 0; j < nc; ++j) upper(i, ns + j) = -y(i, j);
    Matrix d(ns + nc, ns + nc);
    for (std::size_t i = 0; i < ns; ++i)
      for (std::size_t j = 0; j < ns; ++j) d(i, j) = mbar_inv(i, j);
    for (std::size_t i = 0; i < nc; ++i)
      for (std::size_t j = 0; j < nc; ++j) d(ns + i, ns + j) = ac_inv(i, j);
    const Matrix sp = hconcat(s, p);
    const Matrix bhat_inv = upper * (d * upper.transposed());
    out.B_inv_hierarchical = SymMatrix(sp * (bhat_inv * sp.transposed()));
  }
  out.form_residual = max_abs_diff(out.B_inv.matrix(), out.B_inv_hierarchical.matrix()) / out.B_inv.max_abs();

  const Matrix e_tl = assemble_E_TL(h);
  out.e_tl2_residual = max_abs_diff(e_tl, Matrix::identity(n) - out.B_inv.matrix() * a);

  const SymMatrix b = inverse_spd(out.B_inv);
  const Vector gap = sym_eigenvalues(SymMatrix(b.matrix() - a));
  out.lambda_min_B_minus_A = gap.front() / sym_eigenvalues(h.A()).back();
  out.spectrum_Binv_A = generalized_eigenvalues(h.A(), b);
  return out;
}

}  // namespace itl
