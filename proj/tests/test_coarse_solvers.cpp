#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "itl/coarse_solvers.hpp"
#include "itl/hierarchy.hpp"
#include "support.hpp"

using namespace itl;

namespace {

struct Measured {
  double error;  // ‖A⁻¹r − e‖_A
  double dual;   // ‖r‖_{A⁻¹}
};

// Reference norms through an eigendecomposition, independent of the Cholesky path.
Measured measure(const SymMatrix& a, const Vector& r, const Vector& e) {
  const EigDecomp eig = sym_eig(a);
  double err2 = 0.0, dual2 = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const Vector q = eig.vectors.column(k);
    const double rk = dot(q, r);
    const double ek = dot(q, e);
    const double lambda = eig.values[k];
    // A⁻¹r − e in the eigenbasis, weighted by λ.
    err2 += lambda * (rk / lambda - ek) * (rk / lambda - ek);
    dual2 += rk * rk / lambda;
  }
  return {std::sqrt(err2), std::sqrt(dual2)};
}

double accuracy(const SymMatrix& a, const Vector& r, const Vector& e) {
  const Measured m = measure(a, r, e);
  return m.error / m.dual;
}

SymMatrix poisson15_coarse() {
  const Hierarchy h = Hierarchy::assemble(poisson1d(15).A, standard_splitting_1d(15), SmootherKind::Jacobi);
  return h.Ac();
}

}  // namespace

TEST(ExactSolver, Examples) {
  const Hierarchy h = Hierarchy::assemble(poisson1d(3).A, standard_splitting_1d(3), SmootherKind::Jacobi);
  const CoarseSolverPtr s = exact_solver(h);
  Rng rng(0);
  EXPECT_EQ(s->apply(Vector{0.0}, rng), Vector{0.0});
  EXPECT_DOUBLE_EQ(s->apply(Vector{5.0}, rng)[0], 5.0);
  EXPECT_EQ(s->epsilon_apriori().epsilon, 0.0);
  EXPECT_EQ(s->epsilon_apriori().mode, CertMode::Deterministic);

  const SymMatrix a = test::gram_spd(6, 3);
  const CoarseSolverPtr e = exact_solver(a);
  for (std::uint64_t k = 0; k < 20; ++k) {
    const Vector r = test::gaussian_vector(6, 10 + k);
    EXPECT_LE(accuracy(a, r, e->apply(r, rng)), 1e-12);
  }
  EXPECT_ITL_ERROR(e->apply(Vector{1.0}, rng), ErrorKind::DimensionMismatch);
}

TEST(CgSolver, EpsilonFormula) {
  EXPECT_DOUBLE_EQ(cg_epsilon(9.0, 2), 0.5);
  EXPECT_DOUBLE_EQ(cg_epsilon(9.0, 1), 1.0);
  EXPECT_DOUBLE_EQ(cg_epsilon(1.0, 1), 0.0);
  EXPECT_DOUBLE_EQ(cg_ell_threshold(9.0), 1.0);
  EXPECT_EQ(cg_ell_threshold(1.0), 0.0);

  const CoarseSolverPtr s1 = cg_solver(SymMatrix::diagonal(Vector{1.0, 9.0}), 1);
  EXPECT_DOUBLE_EQ(s1->epsilon_apriori().epsilon, 1.0);
  EXPECT_FALSE(s1->epsilon_apriori().usable());
  const CoarseSolverPtr s2 = cg_solver(SymMatrix::diagonal(Vector{1.0, 4.0, 9.0}), 2);
  EXPECT_DOUBLE_EQ(s2->epsilon_apriori().epsilon, 0.5);
  EXPECT_TRUE(s2->epsilon_apriori().usable());
}

TEST(CgSolver, IdentityIsSolvedInOneStep) {
  const CoarseSolverPtr s = cg_solver(SymMatrix::identity(4), 1);
  Rng rng(0);
  const Vector r{1.0, -2.0, 3.0, 0.5};
  EXPECT_EQ(s->apply(r, rng), r);
  EXPECT_EQ(s->epsilon_apriori().epsilon, 0.0);
}

TEST(CgSolver, FiniteTermination) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const SymMatrix a = random_spd(7, 50.0, seed).A;
    const CoarseSolverPtr s = cg_solver(a, 7);
    Rng rng(0);
    const Vector r = test::gaussian_vector(7, seed + 20);
    EXPECT_LE(accuracy(a, r, s->apply(r, rng)), 1e-10);
  }
}

TEST(CgSolver, RejectsZeroSteps) { EXPECT_ITL_ERROR(cg_solver(SymMatrix::identity(2), 0), ErrorKind::ConfigError); }

TEST(RcdSolver, EpsilonFormula) {
  EXPECT_DOUBLE_EQ(rcd_solver(SymMatrix::diagonal(Vector{1.0, 3.0}), 4)->epsilon_apriori().epsilon, 0.5625);
  for (std::size_t ell : {1u, 2u, 5u}) {
    const AccuracyCert c = rcd_solver(SymMatrix::identity(2), ell)->epsilon_apriori();
    EXPECT_DOUBLE_EQ(c.epsilon, std::pow(0.5, 0.5 * double(ell)));
    EXPECT_EQ(c.mode, CertMode::InExpectation);
  }
}

TEST(RcdSolver, SingleStepTouchesOneCoordinate) {
  const CoarseSolverPtr s = rcd_solver(SymMatrix::identity(2), 1);
  const Vector r{3.0, -7.0};
  int hits[2] = {0, 0};
  for (std::uint64_t k = 0; k < 200; ++k) {
    Rng rng(k);
    const Vector e = s->apply(r, rng);
    const bool first = e[0] != 0.0;
    EXPECT_EQ(first ? e[0] : e[1], first ? r[0] : r[1]);
    EXPECT_EQ(first ? e[1] : e[0], 0.0);
    ++hits[first ? 0 : 1];
  }
  EXPECT_GT(hits[0], 50);
  EXPECT_GT(hits[1], 50);
}

TEST(RcdSolver, MonteCarloMeanSquareBound) {
  const SymMatrix a{{2.0, 1.0}, {1.0, 3.0}};
  const std::size_t ell = 3;
  const CoarseSolverPtr s = rcd_solver(a, ell);
  const Vector r{1.0, -2.0};
  const int trials = 100000;
  Rng rng(derive_seed(17, {1}));
  double sum = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Measured m = measure(a, r, s->apply(r, rng));
    sum += m.error * m.error;
  }
  const Measured ref = measure(a, r, Vector{0.0, 0.0});
  const Vector lambda = sym_eigenvalues(a);
  const double rate = std::pow(1.0 - lambda.front() / a.trace(), double(ell));
  EXPECT_LE(sum / trials, rate * ref.dual * ref.dual * (1.0 + 3.0 / std::sqrt(double(trials))));
}

TEST(RbcdSolver, SingleBlockIsExact) {
  const SymMatrix a = test::gram_spd(5, 7);
  const CoarseSolverPtr s = rbcd_solver(a, 1, {{0, 1, 2, 3, 4}});
  EXPECT_NEAR(s->epsilon_apriori().epsilon, 0.0, 1e-7);
  EXPECT_LE(max_abs_diff(rbcd_expected_matrix(a, {{0, 1, 2, 3, 4}}), Matrix::identity(5)), 1e-10);
  Rng rng(1);
  const Vector r = test::gaussian_vector(5, 8);
  EXPECT_LE(accuracy(a, r, s->apply(r, rng)), 1e-12);
}

TEST(RbcdSolver, SingletonBlocksMatchUniformRcd) {
  // Constant diagonal: RCD samples uniformly, like RBCD over singletons.
  SymMatrix a = test::gram_spd(4, 9);
  Matrix m = a.matrix();
  const Vector d = a.diag();
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) m(i, j) /= std::sqrt(d[i] * d[j]);
  a = SymMatrix(m);
  const Partition singletons = contiguous_partition(4, 1);
  const double eps_rbcd = rbcd_solver(a, 3, singletons)->epsilon_apriori().epsilon;
  const double eps_rcd = rcd_solver(a, 3)->epsilon_apriori().epsilon;
  EXPECT_NEAR(eps_rbcd, eps_rcd, 1e-12);
  // W = D⁻¹A / n_c for singletons.
  EXPECT_LE(max_abs_diff(rbcd_expected_matrix(a, singletons), 0.25 * a.matrix()), 1e-12);
}

TEST(RbcdSolver, ExpectedMatrixMatchesSampledSteps) {
  // E[one RBCD step applied to A_c·x] = W·x, so the sample mean of single-step outputs
  // estimates W column by column.
  const SymMatrix a = random_spd(4, 20.0, 31).A;
  const Partition blocks{{0, 1}, {2, 3}};
  const Matrix w = rbcd_expected_matrix(a, blocks);
  const CoarseSolverPtr s = rbcd_solver(a, 1, blocks);
  const int trials = 4000;
  Rng rng(derive_seed(31, {2}));
  for (std::size_t j = 0; j < 4; ++j) {
    Vector x(4, 0.0);
    x[j] = 1.0;
    const Vector r = a.matrix() * x;
    Vector sum(4, 0.0), sum_sq(4, 0.0);
    for (int t = 0; t < trials; ++t) {
      const Vector e = s->apply(r, rng);
      for (std::size_t i = 0; i < 4; ++i) {
        sum[i] += e[i];
        sum_sq[i] += e[i] * e[i];
      }
    }
    for (std::size_t i = 0; i < 4; ++i) {
      const double mean = sum[i] / trials;
      const double var = std::max(sum_sq[i] / trials - mean * mean, 0.0);
      EXPECT_LE(std::abs(mean - w(i, j)), 4.0 * std::sqrt(var / trials) + 1e-12) << i << "," << j;
    }
  }
  const Vector lambda_w = spectrum_of_spsd_product(a, SymMatrix(w * inverse_spd(a).matrix()));
  EXPECT_NEAR(rbcd_lambda_min(a, blocks), lambda_w.front(), 1e-10);
}

TEST(RbcdSolver, RejectsBadPartitions) {
  const SymMatrix a = SymMatrix::identity(4);
  EXPECT_ITL_ERROR(rbcd_solver(a, 1, {}), ErrorKind::InvalidSize);
  EXPECT_ITL_ERROR(rbcd_solver(a, 1, {{0, 1}, {1, 2, 3}}), ErrorKind::InvalidSize);
  EXPECT_ITL_ERROR(rbcd_solver(a, 1, {{0, 1}, {2}}), ErrorKind::InvalidSize);
  EXPECT_ITL_ERROR(rbcd_solver(a, 1, {{0, 1}, {2, 7}}), ErrorKind::InvalidSize);
  const SymMatrix broken{{1.0, 0.0}, {0.0, -1.0}};
  EXPECT_ITL_ERROR(rbcd_solver(broken, 1, {{0}, {1}}), ErrorKind::SingularBlock);
}

TEST(StationarySolver, ScaledCopies) {
  const SymMatrix a = test::gram_spd(5, 40);
  EXPECT_NEAR(stationary_solver(a, a)->epsilon_apriori().epsilon, 0.0, 1e-12);
  EXPECT_NEAR(stationary_solver(a, SymMatrix(2.0 * a.matrix()))->epsilon_apriori().epsilon, 0.5, 1e-12);
  EXPECT_ITL_ERROR(stationary_solver(a, SymMatrix(-1.0 * a.matrix())), ErrorKind::NotSPD);
}

TEST(StationarySolver, DiagonalOnPoissonCoarseMatrix) {
  // The Galerkin coarse matrix of poisson1d(15) is tridiag(−1,2,−1)/2 with unit diagonal,
  // so ε = max |1 − λ| = cos(π/8).
  const SymMatrix a_c = poisson15_coarse();
  ASSERT_EQ(a_c.size(), 7u);
  EXPECT_LE(max_abs_diff(a_c, 0.5 * test::tridiag(7, -1, 2, -1)), 1e-14);
  const CoarseSolverPtr s = stationary_solver(a_c, SymMatrix::diagonal(a_c.diag()));
  EXPECT_NEAR(s->epsilon_apriori().epsilon, std::cos(std::numbers::pi / 8.0), 1e-12);
}

TEST(Certificates, DeterministicCertsHoldForRandomInputs) {
  const SymMatrix a = random_spd(6, 30.0, 50).A;
  const std::vector<CoarseSolverPtr> solvers{exact_solver(a), cg_solver(a, 2), cg_solver(a, 4),
                                             stationary_solver(a, SymMatrix(1.6 * a.matrix())),
                                             stationary_solver(a, SymMatrix::diagonal(a.diag()))};
  Rng rng(0);
  for (const auto& s : solvers) {
    ASSERT_EQ(s->epsilon_apriori().mode, CertMode::Deterministic);
    const double cert = s->epsilon_apriori().epsilon;
    for (std::uint64_t k = 0; k < 200; ++k) {
      const Vector r = test::gaussian_vector(6, 1000 + k);
      EXPECT_LE(accuracy(a, r, s->apply(r, rng)), cert + 1e-10) << s->label();
    }
  }
}

TEST(RunInner, ExactSingleStep) {
  const SymMatrix a = test::gram_spd(5, 60);
  const Cholesky f(a);
  const Vector r = test::gaussian_vector(5, 61);
  const std::vector<CoarseSolverPtr> chain{exact_solver(a)};
  const InnerResult res = run_inner(a, f, r, chain, 7);
  EXPECT_LE(norm2(res.trace.residuals.back()), 1e-12 * norm2(r));
  EXPECT_LE(norm2(a.matrix() * res.e - r), 1e-12 * norm2(r));
  EXPECT_EQ(res.trace.residuals.front(), r);
  EXPECT_LE(res.trace.overall_accuracy, 1e-12);
}

TEST(RunInner, ProductOfStationaryAccuracies) {
  const SymMatrix a = random_spd(6, 10.0, 62).A;
  const Cholesky f(a);
  SolverSpec half;
  half.kind = "stationary";
  half.matrix = "scaled";
  half.scale = 2.0;
  SolverSpec fifth = half;
  fifth.scale = 1.25;
  const std::vector<CoarseSolverPtr> chain{make_solver(half, a), make_solver(fifth, a)};
  EXPECT_NEAR(chain_certificate(chain).epsilon, 0.1, 1e-12);
  const Vector r = test::gaussian_vector(6, 63);
  const InnerResult res = run_inner(a, f, r, chain, 1);
  EXPECT_NEAR(res.trace.measured_eps[0], 0.5, 1e-12);
  EXPECT_NEAR(res.trace.measured_eps[1], 0.2, 1e-12);
  EXPECT_NEAR(res.trace.eps_product(), 0.1, 1e-12);
  EXPECT_LE(res.trace.overall_accuracy, 0.1 + 1e-12);
  EXPECT_NEAR(accuracy(a, r, res.e), res.trace.overall_accuracy, 1e-12);
}

TEST(RunInner, HybridChainInvariants) {
  const SymMatrix a = random_spd(8, 80.0, 64).A;
  const Cholesky f(a);
  const std::vector<CoarseSolverPtr> chain{cg_solver(a, 2), rcd_solver(a, 10), rbcd_solver(a, 3, contiguous_partition(8, 3))};
  EXPECT_EQ(chain_certificate(chain).mode, CertMode::InExpectation);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Vector r = test::gaussian_vector(8, 200 + seed);
    const InnerResult res = run_inner(a, f, r, chain, seed);
    const InnerTrace& tr = res.trace;
    ASSERT_EQ(tr.iterates.size(), 3u);
    ASSERT_EQ(tr.residuals.size(), 4u);
    const double dual = measure(a, r, Vector(8, 0.0)).dual;
    for (std::size_t k = 1; k <= 3; ++k) {
      EXPECT_LE(norm2(tr.residuals[k] - (r - a.matrix() * tr.iterates[k - 1])), 1e-12 * norm2(r));
      const double lhs = measure(a, r, tr.iterates[k - 1]).error;
      const double rhs = measure(a, tr.residuals[k], Vector(8, 0.0)).dual;
      EXPECT_NEAR(lhs, rhs, 1e-10 * dual);
      EXPECT_NEAR(tr.measured_eps[k - 1], accuracy(a, tr.residuals[k - 1], tr.iterates[k - 1] - (k > 1 ? tr.iterates[k - 2] : Vector(8, 0.0))), 1e-10);
    }
    const double eps = tr.overall_accuracy;
    EXPECT_LE(eps, tr.eps_product() + 1e-10);
    // Sandwich inequalities.
    const double rte = dot(r, res.e);
    const double e_norm = energy_norm(res.e, a);
    EXPECT_GE(rte, (1.0 - eps) * dual * dual - 1e-10 * dual * dual);
    EXPECT_LE(rte, (1.0 + eps) * dual * dual + 1e-10 * dual * dual);
    EXPECT_GE(e_norm, (1.0 - eps) * dual - 1e-10 * dual);
    EXPECT_LE(e_norm, (1.0 + eps) * dual + 1e-10 * dual);
    // Same seed, same realization.
    EXPECT_EQ(run_inner(a, f, r, chain, seed).e, res.e);
  }
}

TEST(RunInner, ZeroResidualShortCircuits) {
  const SymMatrix a = test::gram_spd(4, 70);
  const Cholesky f(a);
  const std::vector<CoarseSolverPtr> chain{cg_solver(a, 1), rcd_solver(a, 3)};
  const InnerResult res = run_inner(a, f, Vector(4, 0.0), chain, 0);
  EXPECT_TRUE(res.trace.short_circuited);
  EXPECT_EQ(res.e, Vector(4, 0.0));
  for (double eps : res.trace.measured_eps) EXPECT_EQ(eps, 0.0);
  EXPECT_ITL_ERROR(run_inner(a, f, Vector(4, 1.0), std::vector<CoarseSolverPtr>{}, 0), ErrorKind::ConfigError);
}

TEST(MakeSolver, Kinds) {
  const SymMatrix a = test::gram_spd(4, 80);
  SolverSpec spec;
  EXPECT_EQ(make_solver(spec, a)->label(), "exact");
  spec.kind = "cg";
  spec.ell = 3;
  EXPECT_EQ(make_solver(spec, a)->label(), "cg(ell=3)");
  spec.kind = "rbcd";
  EXPECT_EQ(make_solver(spec, a)->label(), "rbcd(ell=3,blocks=2)");
  spec.kind = "stationary";
  EXPECT_EQ(make_solver(spec, a)->epsilon_apriori().mode, CertMode::Deterministic);
  spec.matrix = "lumped";
  EXPECT_ITL_ERROR(make_solver(spec, a), ErrorKind::ConfigError);
  spec.kind = "multigrid";
  EXPECT_ITL_ERROR(make_solver(spec, a), ErrorKind::UnknownSolver);
  EXPECT_EQ(to_string(CertMode::InExpectation), "in_expectation");
}
