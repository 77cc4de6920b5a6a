#include <cmath>

#include <gtest/gtest.h>

#include "lebdec/psd_core.hpp"
#include "lebdec/random.hpp"
#include "test_helpers.hpp"

using namespace lebdec;
using lebdec::testing::diag;
using lebdec::testing::mat;
using lebdec::testing::near;
using lebdec::testing::psd;

TEST(EigHermitian, Identity) {
  const auto e = eig_hermitian(PsdMatrix::identity(2));
  EXPECT_NEAR(e.values(0), 1.0, 1e-15);
  EXPECT_NEAR(e.values(1), 1.0, 1e-15);
  EXPECT_TRUE(near(e.vectors.adjoint() * e.vectors, CMatrix::Identity(2, 2), 1e-14));
}

TEST(EigHermitian, DiagonalIsSortedDescending) {
  const auto e = eig_hermitian(diag({1, 3}));
  EXPECT_DOUBLE_EQ(e.values(0), 3.0);
  EXPECT_DOUBLE_EQ(e.values(1), 1.0);
  // columns are a permutation of the identity, up to phase
  EXPECT_NEAR(std::abs(e.vectors(1, 0)), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(e.vectors(0, 1)), 1.0, 1e-15);
}

TEST(EigHermitian, TwoByTwoHandSolution) {
  // characteristic polynomial (2 - l)^2 - 1 = 0  ->  l = 3, 1
  const auto e = eig_hermitian(psd({{2, 1}, {1, 2}}));
  EXPECT_NEAR(e.values(0), 3.0, 1e-14);
  EXPECT_NEAR(e.values(1), 1.0, 1e-14);
  // compare projectors, which do not depend on the eigenvector phase
  const CVector v0 = e.vectors.col(0), v1 = e.vectors.col(1);
  EXPECT_TRUE(near(v0 * v0.adjoint(), mat({{0.5, 0.5}, {0.5, 0.5}}), 1e-14));
  EXPECT_TRUE(near(v1 * v1.adjoint(), mat({{0.5, -0.5}, {-0.5, 0.5}}), 1e-14));
}

TEST(PsdMatrix, RejectsAsymmetricAndIndefiniteInput) {
  EXPECT_THROW(PsdMatrix::checked(mat({{1, 2}, {0, 1}})), InvalidInput);
  EXPECT_THROW(PsdMatrix::checked(mat({{1, 0}, {0, -1}})), InvalidInput);
  EXPECT_THROW(PsdMatrix::checked(CMatrix::Zero(2, 3)), InvalidInput);
  // asymmetry inside recon_tol is averaged away
  const auto p = PsdMatrix::checked(mat({{1, 1e-13}, {0, 1}}));
  EXPECT_EQ(p(0, 1), p(1, 0));
}

TEST(PsdMatrix, ComplexEntriesStayHermitian) {
  const auto p = PsdMatrix::checked(mat({{2, {0, 1}}, {{0, -1}, 2}}));
  EXPECT_EQ(p(0, 1), std::conj(p(1, 0)));
}

TEST(Pinv, Examples) {
  EXPECT_TRUE(near(pinv(diag({2, 0})), diag({0.5, 0}), 1e-15));
  EXPECT_TRUE(near(pinv(PsdMatrix::identity(3)), PsdMatrix::identity(3), 1e-14));
  // rank one vv* with v = (1,1): pinv = vv* / |v|^4
  EXPECT_TRUE(near(pinv(psd({{1, 1}, {1, 1}})), mat({{0.25, 0.25}, {0.25, 0.25}}), 1e-14));
}

TEST(Pinv, RelativeCutoff) {
  const Tolerances tol;
  // 1e-11 relative to 1 is below rank_rtol and is dropped
  EXPECT_TRUE(near(pinv(diag({1, 1e-11}), tol), diag({1, 0}), 1e-14));
  // the same ratio at a different scale gives the same rank decision
  EXPECT_TRUE(near(pinv(diag({1e-6, 1e-17}), tol), diag({1e6, 0}), 1e-6));
  EXPECT_TRUE(near(pinv(diag({1, 1e-9}), tol), diag({1, 1e9}), 1e-3));
}

TEST(RangeProjection, Examples) {
  EXPECT_TRUE(near(range_projection(diag({2, 0})), diag({1, 0}), 1e-15));
  EXPECT_TRUE(near(range_projection(PsdMatrix::zero(3)), PsdMatrix::zero(3), 0.0));
  EXPECT_TRUE(near(range_projection(psd({{1, 1}, {1, 1}})), mat({{0.5, 0.5}, {0.5, 0.5}}), 1e-14));
  EXPECT_TRUE(near(kernel_projection(diag({2, 0})), diag({0, 1}), 1e-15));
}

TEST(LoewnerLeq, Examples) {
  const auto b = psd({{2, 1}, {1, 3}});
  EXPECT_TRUE(loewner_leq(PsdMatrix::zero(2), b));
  EXPECT_TRUE(loewner_leq(diag({1, 2}), diag({2, 2})));
  // ones(2) - diag(2,0) = [[-1,1],[1,1]] has eigenvalues +-sqrt(2)
  EXPECT_FALSE(loewner_leq(diag({2, 0}), psd({{1, 1}, {1, 1}})));
  EXPECT_THROW(loewner_leq(diag({1}), diag({1, 1})), InvalidInput);
}

TEST(Tolerances, Validation) {
  Tolerances t;
  EXPECT_NO_THROW(t.validate());
  t.iter_tol = 0;
  EXPECT_THROW(t.validate(), InvalidInput);
  t = {};
  t.max_iter = 0;
  EXPECT_THROW(t.validate(), InvalidInput);
}

TEST(PsdCoreProperties, RandomMatrices) {
  random::Engine rng(7);
  const Tolerances tol;
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 1 + trial % 12;
    const Index r = static_cast<Index>(rng() % (n + 1));
    const PsdMatrix m = random::psd(n, r, rng);
    const CMatrix& mm = m.matrix();

    const auto e = eig_hermitian(m, tol);
    const CMatrix rebuilt = e.vectors * e.values.cast<Complex>().asDiagonal() * e.vectors.adjoint();
    EXPECT_LE((mm - rebuilt).norm(), tol.recon_tol * (1 + m.norm()));
    EXPECT_LE((e.vectors.adjoint() * e.vectors - CMatrix::Identity(n, n)).norm(), tol.recon_tol);
    for (Index i = 1; i < n; ++i) EXPECT_GE(e.values(i - 1), e.values(i));
    EXPECT_EQ(e.rank(tol.rank_rtol), r);

    // the four Moore-Penrose identities
    const CMatrix p = pinv(m, tol).matrix();
    const double s = tol.recon_tol * (1 + m.norm()) * (1 + p.norm());
    EXPECT_LE((mm * p * mm - mm).norm(), s);
    EXPECT_LE((p * mm * p - p).norm(), s * (1 + p.norm()));
    EXPECT_LE((mm * p - (mm * p).adjoint()).norm(), s);
    EXPECT_LE((p * mm - (p * mm).adjoint()).norm(), s);

    const CMatrix proj = range_projection(m, tol).matrix();
    EXPECT_LE((proj * proj - proj).norm(), tol.recon_tol);
    EXPECT_LE((proj - proj.adjoint()).norm(), tol.recon_tol);
    EXPECT_LE((proj * mm - mm).norm(), tol.recon_tol * (1 + m.norm()));
    EXPECT_NEAR(proj.trace().real(), static_cast<double>(r), 1e-9);

    // reflexive and transitive on a chain A <= A+P <= A+P+Q
    const PsdMatrix a = m;
    const PsdMatrix ap = a + random::psd(n, 1 + rng() % n, rng);
    const PsdMatrix apq = ap + random::psd(n, 1 + rng() % n, rng);
    EXPECT_TRUE(loewner_leq(a, a, tol));
    EXPECT_TRUE(loewner_leq(a, ap, tol));
    EXPECT_TRUE(loewner_leq(ap, apq, tol));
    EXPECT_TRUE(loewner_leq(a, apq, tol));
  }
}
