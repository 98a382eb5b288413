#include "itl/coarse_solvers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>

#include "itl/error.hpp"
#include "itl/hierarchy.hpp"

namespace itl {

namespace {

constexpr double kShortCircuitRel = 1e-14;

std::string fmt_g(double x) {
  char text[64];
  std::snprintf(text, sizeof text, "%g", x);
  return text;
}

void require_length(std::span<const double> r, std::size_t n) {
  if (r.size() != n) throw Error(ErrorKind::DimensionMismatch, "coarse right-hand side has wrong length");
}

class ExactSolver final : public CoarseSolver {
 public:
  explicit ExactSolver(const SymMatrix& a_c) : n_(a_c.size()), chol_(a_c) {}

  Vector apply(std::span<const double> r, Rng&) const override {
    require_length(r, n_);
    return chol_.solve(r);
  }
  AccuracyCert epsilon_apriori() const override { return {0.0, CertMode::Deterministic}; }
  std::string label() const override { return "exact"; }

 private:
  std::size_t n_;
  Cholesky chol_;
};

void require_steps(std::size_t ell) {
  if (ell < 1) throw Error(ErrorKind::ConfigError, "inner solver needs ell >= 1");
}

class CgSolver final : public CoarseSolver {
 public:
  CgSolver(const SymMatrix& a_c, std::size_t ell)
      : a_(a_c), ell_(ell), eps_(cg_epsilon(spectral_condition_number(a_c), ell)) {}

  // Directions are A-conjugated against all previous ones. In exact arithmetic this is
  // the r + βp recurrence; in floating point it keeps finite termination at ℓ = n_c.
  // Past n_c steps the Krylov space is exhausted and the loop stops.
  Vector apply(std::span<const double> b, Rng&) const override {
    require_length(b, a_.size());
    Vector x(b.size(), 0.0);
    Vector r(b.begin(), b.end());
    const double rr0 = dot(r, r);
    std::vector<Vector> dirs, a_dirs;
    std::vector<double> curvature;
    for (std::size_t it = 0; it < std::min(ell_, a_.size()) && dot(r, r) > 1e-32 * rr0; ++it) {
      Vector p = r;
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t j = 0; j < dirs.size(); ++j) axpy(-dot(p, a_dirs[j]) / curvature[j], dirs[j], p);
      Vector ap = a_.matrix() * p;
      const double pap = dot(p, ap);
      if (!(pap > 0.0)) throw Error(ErrorKind::BreakdownNumerical, "CG: p^T A_c p <= 0");
      const double alpha = dot(p, r) / pap;
      axpy(alpha, p, x);
      axpy(-alpha, ap, r);
      dirs.push_back(std::move(p));
      a_dirs.push_back(std::move(ap));
      curvature.push_back(pap);
    }
    return x;
  }
  AccuracyCert epsilon_apriori() const override { return {eps_, CertMode::Deterministic}; }
  std::string label() const override { return "cg(ell=" + std::to_string(ell_) + ")"; }

 private:
  SymMatrix a_;
  std::size_t ell_;
  double eps_;
};

class RcdSolver final : public CoarseSolver {
 public:
  RcdSolver(const SymMatrix& a_c, std::size_t ell) : a_(a_c), ell_(ell) {
    const Vector d = a_.diag();
    for (double x : d)
      if (!(x > 0.0)) throw Error(ErrorKind::NotSPD, "RCD needs a positive diagonal");
    cumulative_.resize(d.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) cumulative_[i] = acc += d[i];
    const double lmin = sym_eigenvalues(a_).front();
    eps_ = std::pow(std::max(0.0, 1.0 - lmin / a_.trace()), 0.5 * double(ell));
  }

  Vector apply(std::span<const double> b, Rng& rng) const override {
    require_length(b, a_.size());
    Vector x(b.size(), 0.0);
    Vector res(b.begin(), b.end());
    for (std::size_t it = 0; it < ell_; ++it) {
      const std::size_t i = draw(rng);
      const double delta = res[i] / a_(i, i);
      x[i] += delta;
      for (std::size_t k = 0; k < res.size(); ++k) res[k] -= delta * a_(k, i);
    }
    return x;
  }
  AccuracyCert epsilon_apriori() const override { return {eps_, CertMode::InExpectation}; }
  std::string label() const override { return "rcd(ell=" + std::to_string(ell_) + ")"; }

 private:
  std::size_t draw(Rng& rng) const {
    const double u = rng.uniform() * cumulative_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return std::min<std::size_t>(it - cumulative_.begin(), cumulative_.size() - 1);
  }

  SymMatrix a_;
  std::size_t ell_;
  Vector cumulative_;
  double eps_ = 1.0;
};

SymMatrix principal_block(const SymMatrix& a, const std::vector<std::size_t>& block) {
  Matrix b(block.size(), block.size());
  for (std::size_t i = 0; i < block.size(); ++i)
    for (std::size_t j = 0; j < block.size(); ++j) b(i, j) = a(block[i], block[j]);
  return SymMatrix(b);
}

void validate_partition(const Partition& blocks, std::size_t n) {
  if (blocks.empty()) throw Error(ErrorKind::InvalidSize, "RBCD needs at least one block");
  std::vector<int> seen(n, 0);
  for (const auto& block : blocks) {
    if (block.empty()) throw Error(ErrorKind::InvalidSize, "RBCD block is empty");
    for (std::size_t i : block) {
      if (i >= n) throw Error(ErrorKind::InvalidSize, "RBCD block index out of range");
      if (seen[i]++) throw Error(ErrorKind::InvalidSize, "RBCD blocks overlap");
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw Error(ErrorKind::InvalidSize, "RBCD blocks do not cover the coarse space");
  }
}

Cholesky block_factor(const SymMatrix& a, const std::vector<std::size_t>& block) {
  try {
    return Cholesky(principal_block(a, block));
  } catch (const Error&) {
    throw Error(ErrorKind::SingularBlock, "RBCD diagonal block is not SPD");
  }
}

// C = (1/m)·Σ I_Ω·A_ΩΩ⁻¹·I_Ωᵀ, so that W = C·A_c.
SymMatrix rbcd_averaged_inverse(const SymMatrix& a, const Partition& blocks) {
  Matrix c(a.size(), a.size());
  for (const auto& block : blocks) {
    const SymMatrix inv = block_factor(a, block).inverse();
    for (std::size_t i = 0; i < block.size(); ++i)
      for (std::size_t j = 0; j < block.size(); ++j) c(block[i], block[j]) += inv(i, j);
  }
  c *= 1.0 / double(blocks.size());
  return SymMatrix(c);
}

class RbcdSolver final : public CoarseSolver {
 public:
  RbcdSolver(const SymMatrix& a_c, std::size_t ell, Partition blocks) : a_(a_c), ell_(ell), blocks_(std::move(blocks)) {
    validate_partition(blocks_, a_.size());
    for (const auto& block : blocks_) factors_.push_back(block_factor(a_, block));
    eps_ = std::pow(std::max(0.0, 1.0 - rbcd_lambda_min(a_, blocks_)), 0.5 * double(ell));
  }

  Vector apply(std::span<const double> b, Rng& rng) const override {
    require_length(b, a_.size());
    Vector x(b.size(), 0.0);
    Vector res(b.begin(), b.end());
    for (std::size_t it = 0; it < ell_; ++it) {
      const std::size_t k = static_cast<std::size_t>(rng.below(blocks_.size()));
      const auto& block = blocks_[k];
      Vector rhs(block.size());
      for (std::size_t i = 0; i < block.size(); ++i) rhs[i] = res[block[i]];
      const Vector delta = factors_[k].solve(rhs);
      for (std::size_t i = 0; i < block.size(); ++i) {
        x[block[i]] += delta[i];
        for (std::size_t row = 0; row < res.size(); ++row) res[row] -= delta[i] * a_(row, block[i]);
      }
    }
    return x;
  }
  AccuracyCert epsilon_apriori() const override { return {eps_, CertMode::InExpectation}; }
  std::string label() const override {
    return "rbcd(ell=" + std::to_string(ell_) + ",blocks=" + std::to_string(blocks_.size()) + ")";
  }

 private:
  SymMatrix a_;
  std::size_t ell_;
  Partition blocks_;
  std::vector<Cholesky> factors_;
  double eps_ = 1.0;
};

class StationarySolver final : public CoarseSolver {
 public:
  StationarySolver(const SymMatrix& a_c, const SymMatrix& b_c) : n_(a_c.size()), chol_(factor(b_c)) {
    if (b_c.size() != a_c.size()) throw Error(ErrorKind::DimensionMismatch, "B_c must match A_c");
    const Vector lambda = stationary_spectrum(a_c, b_c);
    eps_ = std::max(std::abs(1.0 - lambda.front()), std::abs(1.0 - lambda.back()));
  }

  Vector apply(std::span<const double> r, Rng&) const override {
    require_length(r, n_);
    return chol_.solve(r);
  }
  AccuracyCert epsilon_apriori() const override { return {eps_, CertMode::Deterministic}; }
  std::string label() const override { return "stationary"; }

 private:
  static Cholesky factor(const SymMatrix& b) {
    try {
      return Cholesky(b);
    } catch (const Error&) {
      throw Error(ErrorKind::NotSPD, "stationary B_c must be SPD");
    }
  }

  std::size_t n_;
  Cholesky chol_;
  double eps_ = 1.0;
};

}  // namespace

std::string to_string(CertMode mode) {
  return mode == CertMode::Deterministic ? "deterministic" : "in_expectation";
}

CoarseSolverPtr exact_solver(const SymMatrix& a_c) { return std::make_shared<ExactSolver>(a_c); }
CoarseSolverPtr exact_solver(const Hierarchy& h) { return exact_solver(h.Ac()); }

double spectral_condition_number(const SymMatrix& a) {
  const Vector lambda = sym_eigenvalues(a);
  if (!(lambda.front() > 0.0)) throw Error(ErrorKind::NotSPD, "condition number of a non-SPD matrix");
  return lambda.back() / lambda.front();
}

double cg_epsilon(double kappa, std::size_t ell) {
  const double s = std::sqrt(kappa);
  return 2.0 * std::pow((s - 1.0) / (s + 1.0), double(ell));
}

double cg_ell_threshold(double kappa) {
  const double s = std::sqrt(kappa);
  if (s <= 1.0) return 0.0;
  return 1.0 / std::log2((s + 1.0) / (s - 1.0));
}

CoarseSolverPtr cg_solver(const SymMatrix& a_c, std::size_t ell) {
  require_steps(ell);
  return std::make_shared<CgSolver>(a_c, ell);
}

CoarseSolverPtr rcd_solver(const SymMatrix& a_c, std::size_t ell) {
  require_steps(ell);
  return std::make_shared<RcdSolver>(a_c, ell);
}

CoarseSolverPtr rbcd_solver(const SymMatrix& a_c, std::size_t ell, Partition blocks) {
  require_steps(ell);
  return std::make_shared<RbcdSolver>(a_c, ell, std::move(blocks));
}

Matrix rbcd_block_matrix(const SymMatrix& a_c, const std::vector<std::size_t>& block) {
  const Cholesky f = block_factor(a_c, block);
  Matrix rows(block.size(), a_c.size());
  for (std::size_t i = 0; i < block.size(); ++i)
    for (std::size_t j = 0; j < a_c.size(); ++j) rows(i, j) = a_c(block[i], j);
  const Matrix sol = f.solve(rows);
  Matrix out(a_c.size(), a_c.size());
  for (std::size_t i = 0; i < block.size(); ++i)
    for (std::size_t j = 0; j < a_c.size(); ++j) out(block[i], j) = sol(i, j);
  return out;
}

Matrix rbcd_expected_matrix(const SymMatrix& a_c, const Partition& blocks) {
  validate_partition(blocks, a_c.size());
  Matrix w(a_c.size(), a_c.size());
  for (const auto& block : blocks) w += rbcd_block_matrix(a_c, block);
  w *= 1.0 / double(blocks.size());
  return w;
}

double rbcd_lambda_min(const SymMatrix& a_c, const Partition& blocks) {
  validate_partition(blocks, a_c.size());
  return spectrum_of_spsd_product(rbcd_averaged_inverse(a_c, blocks), a_c).front();
}

Partition contiguous_partition(std::size_t n, std::size_t block_size) {
  if (block_size == 0) throw Error(ErrorKind::InvalidSize, "block size must be positive");
  Partition blocks;
  for (std::size_t start = 0; start < n; start += block_size) {
    std::vector<std::size_t> block;
    for (std::size_t i = start; i < std::min(n, start + block_size); ++i) block.push_back(i);
    blocks.push_back(std::move(block));
  }
  return blocks;
}

CoarseSolverPtr stationary_solver(const SymMatrix& a_c, const SymMatrix& b_c) {
  return std::make_shared<StationarySolver>(a_c, b_c);
}

Vector stationary_spectrum(const SymMatrix& a_c, const SymMatrix& b_c) { return generalized_eigenvalues(a_c, b_c); }

double InnerTrace::eps_product() const {
  double p = 1.0;
  for (double e : measured_eps) p *= e;
  return p;
}

double coarse_error_norm(const Cholesky& a_c_factor, std::span<const double> r, std::span<const double> e) {
  Vector d = a_c_factor.solve_lower(r);
  axpy(-1.0, transpose_times(a_c_factor.lower(), e), d);
  return norm2(d);
}

double dual_norm(const Cholesky& a_c_factor, std::span<const double> r) { return norm2(a_c_factor.solve_lower(r)); }

InnerResult run_inner(const SymMatrix& a_c, const Cholesky& a_c_factor, std::span<const double> r_c,
                      std::span<const CoarseSolverPtr> solvers, std::uint64_t stream_seed) {
  require_length(r_c, a_c.size());
  if (solvers.empty()) throw Error(ErrorKind::ConfigError, "inner solver chain is empty");
  InnerResult out;
  out.e.assign(r_c.size(), 0.0);
  InnerTrace& trace = out.trace;
  trace.residuals.emplace_back(r_c.begin(), r_c.end());
  const double r0_norm = dual_norm(a_c_factor, r_c);

  for (std::size_t k = 0; k < solvers.size(); ++k) {
    const Vector& r = trace.residuals.back();
    const double r_norm = dual_norm(a_c_factor, r);
    if (r0_norm == 0.0 || r_norm <= kShortCircuitRel * r0_norm) {
      trace.short_circuited = true;
      for (; k < solvers.size(); ++k) {
        trace.measured_eps.push_back(0.0);
        trace.iterates.push_back(out.e);
        trace.residuals.push_back(trace.residuals.back());
      }
      break;
    }
    Rng rng(derive_seed(stream_seed, {static_cast<std::uint64_t>(k + 1)}));
    const Vector step = solvers[k]->apply(r, rng);
    trace.measured_eps.push_back(coarse_error_norm(a_c_factor, r, step) / r_norm);
    axpy(1.0, step, out.e);
    trace.iterates.push_back(out.e);
    Vector next(r_c.begin(), r_c.end());
    axpy(-1.0, a_c.matrix() * out.e, next);
    trace.residuals.push_back(std::move(next));
  }
  trace.overall_accuracy = r0_norm == 0.0 ? 0.0 : coarse_error_norm(a_c_factor, r_c, out.e) / r0_norm;
  return out;
}

InnerResult run_inner(const Hierarchy& h, std::span<const double> r_c, std::span<const CoarseSolverPtr> solvers,
                      std::uint64_t stream_seed) {
  return run_inner(h.Ac(), h.Ac_factor(), r_c, solvers, stream_seed);
}

std::string SolverSpec::label() const {
  if (kind == "exact") return "exact";
  if (kind == "stationary") return matrix == "scaled" ? "stationary(scaled=" + fmt_g(scale) + ")" : "stationary(diag)";
  return kind + "(ell=" + std::to_string(ell) + ")";
}

CoarseSolverPtr make_solver(const SolverSpec& spec, const SymMatrix& a_c) {
  if (spec.kind == "exact") return exact_solver(a_c);
  if (spec.kind == "cg") return cg_solver(a_c, spec.ell);
  if (spec.kind == "rcd") return rcd_solver(a_c, spec.ell);
  if (spec.kind == "rbcd") {
    Partition blocks = spec.blocks.empty() ? contiguous_partition(a_c.size(), spec.block_size) : spec.blocks;
    return rbcd_solver(a_c, spec.ell, std::move(blocks));
  }
  if (spec.kind == "stationary") {
    if (spec.matrix == "diag") return stationary_solver(a_c, SymMatrix::diagonal(a_c.diag()));
    if (spec.matrix == "scaled") {
      if (!(spec.scale > 0.0)) throw Error(ErrorKind::ConfigError, "stationary scale must be positive");
      return stationary_solver(a_c, SymMatrix(a_c.matrix() * spec.scale));
    }
    throw Error(ErrorKind::ConfigError, "stationary matrix must be 'diag' or 'scaled'");
  }
  throw Error(ErrorKind::UnknownSolver, "unknown inner solver '" + spec.kind + "'");
}

AccuracyCert chain_certificate(std::span<const CoarseSolverPtr> solvers) {
  AccuracyCert cert{1.0, CertMode::Deterministic};
  for (const auto& s : solvers) {
    const AccuracyCert c = s->epsilon_apriori();
    cert.epsilon *= c.epsilon;
    if (c.mode == CertMode::InExpectation) cert.mode = CertMode::InExpectation;
  }
  return cert;
}

}  // namespace itl
