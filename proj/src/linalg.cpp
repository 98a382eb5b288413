#include "itl/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "itl/error.hpp"

namespace itl {

namespace {

void require_square(const Matrix& a, const char* what) {
  if (!a.square()) throw Error(ErrorKind::DimensionMismatch, what);
}

}  // namespace

Matrix cholesky(const SymMatrix& a) {
  const std::size_t n = a.size();
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, a(i, i));
  const double pivot_tol = kPivotRelTol * max_diag;

  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > pivot_tol)) {
      throw Error(ErrorKind::NotSPD, "Cholesky pivot " + std::to_string(j) + " is " + std::to_string(d));
    }
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

Cholesky::Cholesky(const SymMatrix& a) : l_(cholesky(a)) {}

Vector Cholesky::solve_lower(std::span<const double> b) const {
  const std::size_t n = size();
  if (b.size() != n) throw Error(ErrorKind::DimensionMismatch, "Cholesky solve");
  Vector y(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    double s = y[i];
    for (std::size_t k = 0; k < i; ++k) s -= l_(i, k) * y[k];
    y[i] = s / l_(i, i);
  }
  return y;
}

Vector Cholesky::solve_upper(std::span<const double> b) const {
  const std::size_t n = size();
  if (b.size() != n) throw Error(ErrorKind::DimensionMismatch, "Cholesky solve");
  Vector x(b.begin(), b.end());
  for (std::size_t i = n; i-- > 0;) {
    double s = x[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= l_(k, i) * x[k];
    x[i] = s / l_(i, i);
  }
  return x;
}

Vector Cholesky::solve(std::span<const double> b) const { return solve_upper(solve_lower(b)); }

Matrix Cholesky::solve(const Matrix& b) const {
  Matrix x(b.rows(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j) x.set_column(j, solve(b.column(j)));
  return x;
}

Matrix Cholesky::congruence_inverse(const Matrix& x) const {
  // Y = L⁻¹X column by column, then (L⁻¹Yᵀ)ᵀ = L⁻¹XL⁻ᵀ.
  Matrix y(x.rows(), x.cols());
  for (std::size_t j = 0; j < x.cols(); ++j) y.set_column(j, solve_lower(x.column(j)));
  Matrix yt = y.transposed();
  Matrix z(yt.rows(), yt.cols());
  for (std::size_t j = 0; j < yt.cols(); ++j) z.set_column(j, solve_lower(yt.column(j)));
  return z.transposed();
}

SymMatrix Cholesky::inverse() const {
  return SymMatrix(solve(Matrix::identity(size())), SpdState::VerifiedSpd);
}

Lu::Lu(const Matrix& a) : lu_(a), perm_(a.rows()) {
  require_square(a, "LU of non-square matrix");
  const std::size_t n = a.rows();
  std::iota(perm_.begin(), perm_.end(), std::size_t{0});
  const double scale = std::max(a.max_abs(), std::numeric_limits<double>::min());
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(lu_(i, k)) > std::abs(lu_(p, k))) p = i;
    if (std::abs(lu_(p, k)) <= 1e-14 * scale) {
      throw Error(ErrorKind::InvalidSize, "LU: matrix is numerically singular");
    }
    if (p != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(p, j));
      std::swap(perm_[k], perm_[p]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double m = lu_(i, k) / lu_(k, k);
      lu_(i, k) = m;
      if (m == 0.0) continue;
      for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= m * lu_(k, j);
    }
  }
}

Vector Lu::solve(std::span<const double> b) const {
  const std::size_t n = size();
  if (b.size() != n) throw Error(ErrorKind::DimensionMismatch, "LU solve");
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < i; ++k) x[i] -= lu_(i, k) * x[k];
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t k = i + 1; k < n; ++k) x[i] -= lu_(i, k) * x[k];
    x[i] /= lu_(i, i);
  }
  return x;
}

Vector Lu::solve_transposed(std::span<const double> b) const {
  // PA = LU  =>  Aᵀ = Uᵀ Lᵀ P, so solve Uᵀz = b, Lᵀw = z, x = Pᵀw.
  const std::size_t n = size();
  if (b.size() != n) throw Error(ErrorKind::DimensionMismatch, "LU transposed solve");
  Vector z(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) z[i] -= lu_(k, i) * z[k];
    z[i] /= lu_(i, i);
  }
  for (std::size_t i = n; i-- > 0;)
    for (std::size_t k = i + 1; k < n; ++k) z[i] -= lu_(k, i) * z[k];
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i) x[perm_[i]] = z[i];
  return x;
}

Matrix Lu::solve(const Matrix& b) const {
  Matrix x(b.rows(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j) x.set_column(j, solve(b.column(j)));
  return x;
}

Matrix Lu::solve_transposed(const Matrix& b) const {
  Matrix x(b.rows(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j) x.set_column(j, solve_transposed(b.column(j)));
  return x;
}

Matrix Lu::inverse() const { return solve(Matrix::identity(size())); }

EigDecomp sym_eig(const SymMatrix& input) {
  const std::size_t n = input.size();
  Matrix a = input.matrix();
  Matrix v = Matrix::identity(n);

  const double norm_f = a.frobenius();
  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  const double target = 1e-14 * norm_f;
  bool converged = norm_f == 0.0;
  for (int sweep = 0; sweep < kJacobiMaxSweeps && !converged; ++sweep) {
    if (off_norm() <= target) {
      converged = true;
      break;
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        // Entries negligible against both diagonals are dropped once the sweep is settled.
        const double g = 100.0 * std::abs(apq);
        if (sweep > 3 && std::abs(app) + g == std::abs(app) && std::abs(aqq) + g == std::abs(aqq)) {
          a(p, q) = 0.0;
          a(q, p) = 0.0;
          continue;
        }
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (!converged && off_norm() > target) {
    throw Error(ErrorKind::NoConvergence, "Jacobi eigensolver exceeded " + std::to_string(kJacobiMaxSweeps) + " sweeps");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });
  EigDecomp out{Vector(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

Vector sym_eigenvalues(const SymMatrix& a) { return sym_eig(a).values; }

namespace {

// Rebuilds Q·diag(f(λ))·Qᵀ.
template <typename F>
SymMatrix spectral_map(const EigDecomp& eig, F f) {
  const std::size_t n = eig.values.size();
  Matrix out(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const double fk = f(eig.values[k]);
    if (fk == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) {
      const double qik = fk * eig.vectors(i, k);
      for (std::size_t j = 0; j < n; ++j) out(i, j) += qik * eig.vectors(j, k);
    }
  }
  return SymMatrix(out);
}

double spectral_scale(const Vector& values) {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

void require_spsd(const Vector& values, double rank_tol, const char* what) {
  if (values.empty()) return;
  const double scale = spectral_scale(values);
  if (values.front() < -rank_tol * scale) {
    throw Error(ErrorKind::NegativeSpectrum,
                std::string(what) + ": smallest eigenvalue " + std::to_string(values.front()));
  }
}

}  // namespace

SymMatrix pseudo_inverse(const SymMatrix& a, double rank_tol) {
  const EigDecomp eig = sym_eig(a);
  require_spsd(eig.values, rank_tol, "pseudo_inverse");
  const double cutoff = rank_tol * spectral_scale(eig.values);
  return spectral_map(eig, [&](double l) { return l > cutoff ? 1.0 / l : 0.0; });
}

std::size_t numeric_rank(const Matrix& b, double rank_tol, double reference) {
  if (b.empty()) return 0;
  const Vector values = sym_eigenvalues(SymMatrix(b.transposed() * b));
  const double lmax = std::max(spectral_scale(values), reference * reference);
  if (lmax == 0.0) return 0;
  // Squaring loses everything below √ε·σ_max, so the cut is applied to λ(BᵀB) directly.
  return static_cast<std::size_t>(
      std::count_if(values.begin(), values.end(), [&](double l) { return l > rank_tol * lmax; }));
}

double energy_norm(std::span<const double> v, const SymMatrix& a) {
  if (v.size() != a.size()) throw Error(ErrorKind::DimensionMismatch, "energy_norm");
  if (a.spd_state() != SpdState::VerifiedSpd) cholesky(a);
  return std::sqrt(std::max(0.0, dot(v, a.matrix() * v)));
}

SymMatrix sym_sqrt(const SymMatrix& a, double rank_tol) {
  const EigDecomp eig = sym_eig(a);
  require_spsd(eig.values, rank_tol, "sym_sqrt");
  return spectral_map(eig, [](double l) { return std::sqrt(std::max(l, 0.0)); });
}

SymMatrix inv_sqrt(const SymMatrix& a) {
  if (a.spd_state() != SpdState::VerifiedSpd) cholesky(a);
  const EigDecomp eig = sym_eig(a);
  return spectral_map(eig, [](double l) { return 1.0 / std::sqrt(l); });
}

Vector spectrum_of_spsd_product(const SymMatrix& x, const SymMatrix& n, double rank_tol) {
  if (x.size() != n.size()) throw Error(ErrorKind::DimensionMismatch, "spectrum_of_spsd_product");
  const std::size_t dim = x.size();
  const EigDecomp eig = sym_eig(x);
  require_spsd(eig.values, rank_tol, "spectrum_of_spsd_product");
  const double cutoff = rank_tol * spectral_scale(eig.values);

  // Restrict to Range(X): with X^{1/2} = V₊Λ₊^{1/2}V₊ᵀ the nonzero spectrum is that of
  // Λ₊^{1/2}V₊ᵀ N V₊Λ₊^{1/2}.
  std::vector<std::size_t> kept;
  for (std::size_t k = 0; k < dim; ++k)
    if (eig.values[k] > cutoff) kept.push_back(k);
  Matrix w(dim, kept.size());
  for (std::size_t c = 0; c < kept.size(); ++c) {
    const double s = std::sqrt(eig.values[kept[c]]);
    for (std::size_t i = 0; i < dim; ++i) w(i, c) = s * eig.vectors(i, kept[c]);
  }
  Vector values = kept.empty() ? Vector{} : sym_eigenvalues(galerkin(w, n));
  values.resize(dim, 0.0);
  std::sort(values.begin(), values.end());
  return values;
}

Vector generalized_eigenvalues(const SymMatrix& x, const SymMatrix& b) {
  if (x.size() != b.size()) throw Error(ErrorKind::DimensionMismatch, "generalized_eigenvalues");
  const Cholesky chol(b);
  return sym_eigenvalues(SymMatrix(chol.congruence_inverse(x.matrix())));
}

double energy_operator_norm(const Matrix& e, const SymMatrix& a) {
  if (!e.square() || e.rows() != a.size()) throw Error(ErrorKind::DimensionMismatch, "energy_operator_norm");
  // ‖E‖²_A = λ_max of the pencil (EᵀAE, A).
  const Matrix eae = e.transposed() * (a.matrix() * e);
  const Vector values = generalized_eigenvalues(SymMatrix(eae), a);
  return std::sqrt(std::max(0.0, values.back()));
}

double lambda_min_positive(std::span<const double> ascending, double rank_tol, double reference) {
  double scale = reference;
  for (double v : ascending) scale = std::max(scale, std::abs(v));
  for (double v : ascending)
    if (v > rank_tol * scale) return v;
  return std::numeric_limits<double>::quiet_NaN();
}

SymMatrix inverse_spd(const SymMatrix& a) { return Cholesky(a).inverse(); }

SymMatrix galerkin(const Matrix& s, const SymMatrix& a) {
  if (s.rows() != a.size()) throw Error(ErrorKind::DimensionMismatch, "galerkin product");
  return SymMatrix(s.transposed() * (a.matrix() * s));
}

}  // namespace itl
