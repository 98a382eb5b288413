#include "itl/problems.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

#include "itl/error.hpp"
#include "itl/linalg.hpp"
#include "itl/random.hpp"

namespace itl {

namespace {

constexpr int kMaxResamples = 100;

ProblemInstance finish(SymMatrix a, Vector u_star, std::string label) {
  ProblemInstance p;
  p.A = a.certified();
  p.f = p.A.matrix() * u_star;
  p.u_star = std::move(u_star);
  p.label = std::move(label);
  return p;
}

// Sum of the three lowest sine modes on the grid with Gaussian weights.
double smooth_profile(double x, const double (&w)[3]) {
  double v = 0.0;
  for (int k = 0; k < 3; ++k) v += w[k] * std::sin((k + 1) * std::numbers::pi * x);
  return v;
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rng.gaussian();
  return m;
}

// Orthonormal columns by modified Gram–Schmidt with one reorthogonalization pass.
Matrix orthonormalize(const Matrix& g) {
  Matrix q = g;
  for (std::size_t j = 0; j < q.cols(); ++j) {
    Vector v = q.column(j);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < j; ++k) {
        const Vector qk = q.column(k);
        axpy(-dot(qk, v), qk, v);
      }
    }
    const double nv = norm2(v);
    if (nv == 0.0) throw Error(ErrorKind::RankCondition, "Gaussian sample is rank deficient");
    for (double& x : v) x /= nv;
    q.set_column(j, v);
  }
  return q;
}

// 1D linear interpolation from the nodes 1, 3, 5, ... (0-based).
Matrix interpolation_1d(std::size_t m) {
  const std::size_t nc = m / 2;
  Matrix p(m, nc);
  for (std::size_t c = 0; c < nc; ++c) {
    const std::size_t i = 2 * c + 1;
    p(i, c) = 1.0;
    p(i - 1, c) = 0.5;
    if (i + 1 < m) p(i + 1, c) = 0.5;
  }
  return p;
}

Matrix injection(std::size_t n, const std::vector<std::size_t>& nodes) {
  Matrix s(n, nodes.size());
  for (std::size_t c = 0; c < nodes.size(); ++c) s(nodes[c], c) = 1.0;
  return s;
}

// Orthonormal basis of Null(B) from the eigenvectors of BᵀB.
Matrix null_space(const Matrix& b, double rank_tol) {
  const EigDecomp eig = sym_eig(SymMatrix(b.transposed() * b));
  const double lmax = std::max(eig.values.back(), 0.0);
  std::vector<Vector> basis;
  for (std::size_t k = 0; k < eig.values.size(); ++k)
    if (eig.values[k] <= rank_tol * lmax) basis.push_back(eig.vectors.column(k));
  return Matrix::from_columns(basis, b.cols());
}

bool splitting_holds(const SplittingSpec& split, double rank_tol) {
  try {
    validate_splitting(split, rank_tol);
    return true;
  } catch (const Error&) {
    return false;
  }
}

}  // namespace

ProblemInstance poisson1d(std::size_t m, std::uint64_t seed) {
  if (m < 3) throw Error(ErrorKind::InvalidSize, "poisson1d requires m >= 3");
  Matrix a(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    a(i, i) = 2.0;
    if (i > 0) a(i, i - 1) = -1.0;
    if (i + 1 < m) a(i, i + 1) = -1.0;
  }
  Rng rng(derive_seed(seed, {1}));
  const double w[3] = {rng.gaussian(), rng.gaussian(), rng.gaussian()};
  Vector u(m);
  for (std::size_t i = 0; i < m; ++i) u[i] = smooth_profile(double(i + 1) / double(m + 1), w);
  return finish(SymMatrix(a), std::move(u), "poisson1d(m=" + std::to_string(m) + ")");
}

ProblemInstance poisson2d(std::size_t m, std::uint64_t seed) {
  if (m < 3) throw Error(ErrorKind::InvalidSize, "poisson2d requires m >= 3");
  const std::size_t n = m * m;
  Matrix a(n, n);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t k = j * m + i;
      a(k, k) = 4.0;
      if (i > 0) a(k, k - 1) = -1.0;
      if (i + 1 < m) a(k, k + 1) = -1.0;
      if (j > 0) a(k, k - m) = -1.0;
      if (j + 1 < m) a(k, k + m) = -1.0;
    }
  }
  Rng rng(derive_seed(seed, {2}));
  const double wx[3] = {rng.gaussian(), rng.gaussian(), rng.gaussian()};
  const double wy[3] = {rng.gaussian(), rng.gaussian(), rng.gaussian()};
  Vector u(n);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t i = 0; i < m; ++i)
      u[j * m + i] = smooth_profile(double(i + 1) / double(m + 1), wx) * smooth_profile(double(j + 1) / double(m + 1), wy);
  return finish(SymMatrix(a), std::move(u), "poisson2d(m=" + std::to_string(m) + ")");
}

ProblemInstance random_spd(std::size_t n, double cond_target, std::uint64_t seed) {
  if (n < 2) throw Error(ErrorKind::InvalidSize, "random_spd requires n >= 2");
  if (!(cond_target >= 1.0)) throw Error(ErrorKind::InvalidSize, "random_spd requires cond_target >= 1");
  Rng rng(derive_seed(seed, {3}));
  const Matrix q = orthonormalize(gaussian_matrix(n, n, rng));
  Vector lambda(n);
  lambda.front() = 1.0;
  lambda.back() = cond_target;
  for (std::size_t k = 1; k + 1 < n; ++k) lambda[k] = std::pow(cond_target, rng.uniform());
  Matrix ql = q;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) ql(i, j) *= lambda[j];
  const SymMatrix a(ql * q.transposed());

  Vector u(n);
  for (double& x : u) x = rng.gaussian();
  char cond_text[32];
  std::snprintf(cond_text, sizeof cond_text, "%g", cond_target);
  return finish(a, std::move(u),
                "random_spd(n=" + std::to_string(n) + ",cond=" + cond_text + ",seed=" + std::to_string(seed) + ")");
}

ProblemInstance problem_from_matrix(const SymMatrix& a, std::uint64_t seed, std::string label) {
  Rng rng(derive_seed(seed, {4}));
  Vector u(a.size());
  for (double& x : u) x = rng.gaussian();
  return finish(a, std::move(u), std::move(label));
}

SplittingSpec standard_splitting_1d(std::size_t m) {
  if (m < 3 || m % 2 == 0) throw Error(ErrorKind::InvalidSize, "standard_splitting_1d requires odd m >= 3");
  std::vector<std::size_t> fine;
  for (std::size_t i = 0; i < m; i += 2) fine.push_back(i);
  return {injection(m, fine), interpolation_1d(m), "standard_1d(m=" + std::to_string(m) + ")"};
}

SplittingSpec standard_splitting_2d(std::size_t m) {
  if (m < 3) throw Error(ErrorKind::InvalidSize, "standard_splitting_2d requires m >= 3");
  const Matrix p1 = interpolation_1d(m);
  const std::size_t nc1 = p1.cols();
  const std::size_t n = m * m;
  Matrix p(n, nc1 * nc1);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t cj = 0; cj < nc1; ++cj)
        for (std::size_t ci = 0; ci < nc1; ++ci) p(j * m + i, cj * nc1 + ci) = p1(j, cj) * p1(i, ci);
  std::vector<std::size_t> fine;
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t i = 0; i < m; ++i)
      if (i % 2 == 0 || j % 2 == 0) fine.push_back(j * m + i);
  return {injection(n, fine), p, "standard_2d(m=" + std::to_string(m) + ")"};
}

SplittingSpec random_splitting(const SymMatrix& a, std::size_t n_s, std::size_t n_c, std::uint64_t seed,
                               bool force_rank_deficient_sap) {
  const std::size_t n = a.size();
  if (force_rank_deficient_sap && n_s >= n) {
    throw Error(ErrorKind::UnsatisfiableFlag, "A-orthogonal complement of Range(S) is trivial when n_s = n");
  }
  if (!(std::max(n_s, n_c) < n && n <= n_s + n_c) || n_s == 0 || n_c == 0) {
    throw Error(ErrorKind::InvalidSize, "random_splitting requires max{n_s,n_c} < n <= n_s + n_c");
  }
  for (int attempt = 0; attempt < kMaxResamples; ++attempt) {
    Rng rng(derive_seed(seed, {5, static_cast<std::uint64_t>(attempt)}));
    SplittingSpec split{gaussian_matrix(n, n_s, rng), gaussian_matrix(n, n_c, rng),
                        "random(n_s=" + std::to_string(n_s) + ",n_c=" + std::to_string(n_c) +
                            ",seed=" + std::to_string(seed) + (force_rank_deficient_sap ? ",deficient" : "") + ")"};
    if (force_rank_deficient_sap) {
      const Matrix null_sa = null_space(split.S.transposed() * a.matrix(), 1e-10);
      if (null_sa.cols() == 0) continue;
      Vector g(null_sa.cols());
      for (double& x : g) x = rng.gaussian();
      split.P.set_column(n_c - 1, null_sa * g);
      if (numeric_rank(split.S.transposed() * (a.matrix() * split.P)) >= n_c) continue;
    }
    if (splitting_holds(split, 1e-10)) return split;
  }
  throw Error(ErrorKind::RetriesExhausted, "random_splitting: no valid sample in 100 attempts");
}

SplittingSpec a_orthogonal_splitting(const SymMatrix& a, const Matrix& p, const Matrix& s0) {
  const Cholesky ac(galerkin(p, a));
  const Matrix ap = a.matrix() * p;
  // (I − P·A_c⁻¹·PᵀA)·S0
  const Matrix correction = p * ac.solve(ap.transposed() * s0);
  return {s0 - correction, p, "a_orthogonal"};
}

SplittingSpec two_grid_splitting(const Matrix& p) {
  SplittingSpec split{Matrix::identity(p.rows()), p, "two_grid"};
  split.two_grid = true;
  return split;
}

void validate_splitting(const SplittingSpec& split, double rank_tol) {
  const std::size_t n = split.n();
  if (split.P.rows() != n) throw Error(ErrorKind::InvalidSize, "S and P must have the same number of rows");
  const std::size_t n_s = split.n_s();
  const std::size_t n_c = split.n_c();
  const bool sizes_ok = split.two_grid ? (n_s == n && n_c < n && n_c > 0)
                                       : (std::max(n_s, n_c) < n && n <= n_s + n_c && n_s > 0 && n_c > 0);
  if (!sizes_ok) {
    throw Error(ErrorKind::InvalidSize, "splitting sizes violate max{n_s,n_c} < n <= n_s + n_c (n=" +
                                            std::to_string(n) + ", n_s=" + std::to_string(n_s) +
                                            ", n_c=" + std::to_string(n_c) + ")");
  }
  if (numeric_rank(split.S, rank_tol) != n_s) throw Error(ErrorKind::RankCondition, "S lacks full column rank");
  if (numeric_rank(split.P, rank_tol) != n_c) throw Error(ErrorKind::RankCondition, "P lacks full column rank");
  if (numeric_rank(hconcat(split.S, split.P), rank_tol) != n) {
    throw Error(ErrorKind::RankCondition, "rank([S P]) < n");
  }
}

}  // namespace itl
