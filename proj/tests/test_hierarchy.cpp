#include <gtest/gtest.h>

#include <cmath>

#include "itl/hierarchy.hpp"
#include "itl/linalg.hpp"
#include "support.hpp"

using namespace itl;

namespace {

Hierarchy random_hierarchy(std::uint64_t seed, SmootherKind kind, bool deficient = false) {
  const ProblemInstance p = random_spd(9, 40.0, seed);
  return Hierarchy::assemble(p.A, random_splitting(p.A, 5, 5, seed + 100, deficient), kind, 0.7);
}

}  // namespace

TEST(Assemble, PoissonThreeHasUnitCoarseMatrix) {
  const ProblemInstance p = poisson1d(3);
  const Hierarchy h = Hierarchy::assemble(p.A, standard_splitting_1d(3), SmootherKind::Jacobi);
  ASSERT_EQ(h.Ac().size(), 1u);
  EXPECT_DOUBLE_EQ(h.Ac()(0, 0), 1.0);
  EXPECT_EQ(h.As().matrix(), (Matrix{{2.0, 0.0}, {0.0, 2.0}}));
}

TEST(Assemble, ExactSmootherSymmetrizesToItself) {
  const Hierarchy h = random_hierarchy(1, SmootherKind::Exact);
  EXPECT_LE(max_abs_diff(h.Mbar_s(), h.As()), 1e-10 * h.As().max_abs());
  EXPECT_LE(max_abs_diff(h.Mtilde_s(), h.As()), 1e-10 * h.As().max_abs());
}

TEST(Assemble, SymmetricSmootherGivesEqualSymmetrizations) {
  const Hierarchy h = random_hierarchy(2, SmootherKind::WeightedJacobi);
  EXPECT_LE(max_abs_diff(h.Mbar_s(), h.Mtilde_s()), 1e-12 * h.Mbar_s().max_abs());
  const Hierarchy g = random_hierarchy(2, SmootherKind::GaussSeidel);
  EXPECT_GT(max_abs_diff(g.Mbar_s(), g.Mtilde_s()), 1e-6);
}

TEST(Assemble, GalerkinProductsAndProjector) {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const Hierarchy h = random_hierarchy(seed, SmootherKind::GaussSeidel, seed % 2 == 0);
    EXPECT_LE(max_abs_diff(h.As(), h.S().transposed() * h.A().matrix() * h.S()), 1e-12 * h.A().max_abs() * 100);
    EXPECT_LE(max_abs_diff(h.Ac(), h.P().transposed() * h.A().matrix() * h.P()), 1e-12 * h.A().max_abs() * 100);
    const Matrix& pi = h.Pi_A();
    EXPECT_LE(max_abs_diff(pi * pi, pi), 1e-9 * std::max(pi.max_abs(), 1.0));
    const Matrix api = h.A().matrix() * pi;
    EXPECT_LE(max_abs_diff(api, api.transposed()), 1e-9 * h.A().max_abs());
    EXPECT_LE(h.residuals().pi_idempotency, 1e-9);
    EXPECT_LE(h.residuals().a_pi_symmetry, 1e-9);
  }
}

TEST(Assemble, MtildeBoundsAsFromBelow) {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const Hierarchy h = random_hierarchy(seed, SmootherKind::GaussSeidel);
    const SymMatrix gap(inverse_spd(h.As()).matrix() - inverse_spd(h.Mtilde_s()).matrix());
    const double scale = sym_eigenvalues(inverse_spd(h.As())).back();
    EXPECT_GE(sym_eigenvalues(gap).front(), -1e-10 * scale);

    const Matrix s_mt_st = h.S() * inverse_spd(h.Mtilde_s()).matrix() * h.S().transposed();
    const SymMatrix a_inv = inverse_spd(h.A());
    EXPECT_GE(sym_eigenvalues(SymMatrix(a_inv.matrix() - s_mt_st)).front(),
              -1e-10 * sym_eigenvalues(a_inv).back());
  }
}

TEST(Assemble, SmootherProductIdentity) {
  // I − X·M̃⁻¹·X = (I − X·M⁻¹·X)(I − X·M⁻ᵀ·X) with X = A_s^{1/2}.
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Hierarchy h = random_hierarchy(seed, SmootherKind::GaussSeidel);
    const std::size_t ns = h.n_s();
    const Matrix x = sym_sqrt(h.As()).matrix();
    const Matrix m_inv = h.Ms_inverse();
    const Matrix id = Matrix::identity(ns);
    const Matrix lhs = id - x * inverse_spd(h.Mtilde_s()).matrix() * x;
    const Matrix rhs = (id - x * m_inv * x) * (id - x * m_inv.transposed() * x);
    EXPECT_LE(max_abs_diff(lhs, rhs), 1e-9);
  }
}

TEST(Assemble, RejectsInvalidSmoother) {
  const ProblemInstance p = random_spd(9, 40.0, 3);
  const SplittingSpec split = random_splitting(p.A, 5, 5, 4);
  const SymMatrix a_s = galerkin(split.S, p.A);
  const Matrix quarter = 0.25 * a_s.matrix();
  EXPECT_LT(smoother_validity_margin(quarter, a_s), 0.0);
  EXPECT_GE(smoother_contraction(quarter, a_s), 1.0);
  EXPECT_ITL_ERROR(Hierarchy::assemble(p.A, split, custom_smoother(quarter)), ErrorKind::SmootherInvalid);
}

TEST(Assemble, RejectsMismatchedSplitting) {
  const ProblemInstance p = poisson1d(5);
  EXPECT_ITL_ERROR(Hierarchy::assemble(p.A, standard_splitting_1d(7), SmootherKind::Jacobi),
                   ErrorKind::DimensionMismatch);
  SplittingSpec bad = standard_splitting_1d(5);
  bad.S.set_column(0, bad.P.column(0));
  EXPECT_ITL_ERROR(Hierarchy::assemble(p.A, bad, SmootherKind::Jacobi), ErrorKind::RankCondition);
}

TEST(MakeSmoother, Examples) {
  const Smoother id = make_smoother(SmootherKind::Jacobi, SymMatrix::identity(3));
  EXPECT_EQ(id.M, Matrix::identity(3));

  const SymMatrix t(test::tridiag(3, -1, 2, -1));
  const Smoother j = make_smoother(SmootherKind::Jacobi, t);
  EXPECT_EQ(j.M, 2.0 * Matrix::identity(3));
  EXPECT_NO_THROW(cholesky(SymMatrix(test::tridiag(3, 1, 2, 1))));
  EXPECT_NEAR(smoother_validity_margin(j.M, t), 2.0 - std::sqrt(2.0), 1e-14);

  const Smoother w = make_smoother(SmootherKind::WeightedJacobi, t, 0.5);
  EXPECT_EQ(w.M, 4.0 * Matrix::identity(3));
  EXPECT_EQ(w.label(), "weighted_jacobi(0.5)");

  const Smoother gs = make_smoother(SmootherKind::GaussSeidel, t);
  EXPECT_EQ(gs.M, (Matrix{{2.0, 0.0, 0.0}, {-1.0, 2.0, 0.0}, {0.0, -1.0, 2.0}}));
}

TEST(MakeSmoother, GaussSeidelMarginIsTheDiagonal) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const SymMatrix a = test::gram_spd(6, seed);
    const Smoother gs = make_smoother(SmootherKind::GaussSeidel, a);
    const Matrix d = gs.M + gs.M.transposed() - a.matrix();
    EXPECT_LE(max_abs_diff(d, Matrix::diagonal(a.diag())), 1e-14 * a.max_abs());
  }
}

TEST(MakeSmoother, JacobiFailureIsReported) {
  // Strong positive off-diagonal coupling: 2·diag − A is indefinite.
  const SymMatrix a{{1.0, 0.9, 0.9}, {0.9, 1.0, 0.9}, {0.9, 0.9, 1.0}};
  EXPECT_ITL_ERROR(make_smoother(SmootherKind::Jacobi, a), ErrorKind::SmootherInvalid);
  EXPECT_ITL_ERROR(make_smoother(SmootherKind::WeightedJacobi, a, -1.0), ErrorKind::SmootherInvalid);
}

TEST(SmootherContraction, Examples) {
  const SymMatrix a = test::gram_spd(5, 9);
  EXPECT_NEAR(smoother_contraction(a.matrix(), a), 0.0, 1e-12);
  EXPECT_NEAR(smoother_contraction(2.0 * a.matrix(), a), 0.5, 1e-12);
}

TEST(SmootherContraction, PoissonSevenJacobiBaseline) {
  const ProblemInstance p = poisson1d(7);
  const Hierarchy h = Hierarchy::assemble(p.A, standard_splitting_1d(7), SmootherKind::Jacobi);
  // A_s = 2I at the injected nodes, so Jacobi is exact there.
  EXPECT_EQ(h.As().matrix(), 2.0 * Matrix::identity(4));
  EXPECT_NEAR(smoother_contraction(h), 0.0, 1e-15);

  const Hierarchy g = Hierarchy::assemble(poisson2d(5).A, standard_splitting_2d(5), SmootherKind::Jacobi);
  const double c = smoother_contraction(g);
  EXPECT_GT(c, 0.0);
  EXPECT_LT(c, 1.0);
  // ‖I − D⁻¹A_s‖ in the A_s norm equals the spectral radius, max |1 − λ(A_s)/4|.
  const Vector lambda = sym_eigenvalues(SymMatrix(0.25 * g.As().matrix()));
  EXPECT_NEAR(c, std::max(std::abs(1.0 - lambda.front()), std::abs(1.0 - lambda.back())), 1e-12);
}

TEST(SmootherContraction, AgreesWithValidity) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const SymMatrix a = test::gram_spd(4, 50 + seed);
    const Matrix m = test::gaussian(4, 4, 80 + seed) + Matrix::diagonal(a.diag());
    const double margin = smoother_validity_margin(m, a);
    if (std::abs(margin) < 1e-8) continue;
    EXPECT_EQ(margin > 0.0, smoother_contraction(m, a) < 1.0) << "seed " << seed;
  }
}

TEST(CompatibleRelaxation, FixedPoint) {
  const ProblemInstance p = poisson2d(4, 3);
  const Hierarchy h = Hierarchy::assemble(p.A, standard_splitting_2d(4), SmootherKind::GaussSeidel);
  const Vector u = apply_compatible_relaxation(h, p.u_star, p.f);
  EXPECT_LE(norm2(u - p.u_star), 1e-13 * norm2(p.u_star));
}

TEST(CompatibleRelaxation, ExactSmootherProjectsAlongRangeS) {
  const ProblemInstance p = random_spd(9, 40.0, 12);
  const Hierarchy h = Hierarchy::assemble(p.A, random_splitting(p.A, 5, 5, 13), SmootherKind::Exact);
  // e ∈ Range(S) is removed.
  const Vector e = h.S() * test::gaussian_vector(5, 14);
  const Vector u0 = p.u_star - e;
  const Vector e_new = p.u_star - apply_compatible_relaxation(h, u0, p.f);
  EXPECT_LE(energy_norm(e_new, h.A()), 1e-10 * energy_norm(e, h.A()));
  // e ∈ Null(SᵀA) is untouched.
  const Matrix sa = h.S().transposed() * h.A().matrix();
  const EigDecomp eig = sym_eig(SymMatrix(sa.transposed() * sa));
  const Vector z = eig.vectors.column(0);
  ASSERT_LE(eig.values.front(), 1e-20 * eig.values.back() + 1e-20);
  const Vector e_z = p.u_star - apply_compatible_relaxation(h, p.u_star - z, p.f);
  EXPECT_LE(norm2(e_z - z), 1e-10);
}
