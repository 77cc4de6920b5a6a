#include <gtest/gtest.h>

#include "lebdec/functionals.hpp"
#include "lebdec/random.hpp"
#include "test_helpers.hpp"

using namespace lebdec;
using lebdec::testing::diag;
using lebdec::testing::mat;
using lebdec::testing::near;

namespace {

Functional functional(const StarAlgebra& alg, std::vector<PsdMatrix> rho) {
  return {alg, std::move(rho)};
}

Functional random_functional(const StarAlgebra& alg, random::Engine& rng, bool full_rank = false) {
  Functional w{alg, {}};
  for (Index d : alg.block_dims())
    w.densities.push_back(random::psd(d, full_rank ? d : rng() % (d + 1), rng));
  return w;
}

}  // namespace

TEST(StarAlgebra, Layout) {
  const StarAlgebra alg({2, 3, 1});
  EXPECT_EQ(alg.total_dim(), 14);
  EXPECT_EQ(alg.index(0, 1, 0), 2);
  EXPECT_EQ(alg.index(1, 0, 0), 4);
  EXPECT_EQ(alg.index(2, 0, 0), 13);
  EXPECT_THROW(StarAlgebra(std::vector<Index>{}), InvalidInput);
  EXPECT_THROW(StarAlgebra({2, 0}), InvalidInput);
  const auto e = AlgebraElement::matrix_unit(alg, 7);  // block 1, E_{1,0}
  EXPECT_EQ(e.blocks[1](1, 0), Complex(1.0));
  EXPECT_EQ(AlgebraElement::from_coordinates(alg, e.coordinates(alg)).blocks[1], e.blocks[1]);
}

TEST(Eval, Examples) {
  const StarAlgebra alg({2, 3});
  const auto w = functional(alg, {PsdMatrix::identity(2), PsdMatrix::identity(3)});
  EXPECT_NEAR(eval(w, AlgebraElement::unit(alg)).real(), 5.0, 1e-15);
  const auto a = AlgebraElement::matrix_unit(alg, 3);
  EXPECT_EQ(eval(Functional::zero(alg), a), Complex(0.0));

  // tr(diag(1,0) E_12) = 0
  const StarAlgebra m2({2});
  AlgebraElement e12 = AlgebraElement::zero(m2);
  e12.blocks[0](0, 1) = 1.0;
  EXPECT_EQ(eval(functional(m2, {diag({1, 0})}), e12), Complex(0.0));
  EXPECT_THROW(eval(functional(m2, {diag({1, 0})}), AlgebraElement::unit(alg)), InvalidInput);
}

TEST(InducedForm, Examples) {
  const StarAlgebra c({1});
  EXPECT_TRUE(near(induced_form(Functional::zero(c)).gram(), PsdMatrix::zero(1), 0.0));
  EXPECT_TRUE(near(induced_form(functional(c, {diag({2})})).gram(), diag({2}), 0.0));

  // w(E_kl* E_mn) = delta_km rho(n, l) with rho = diag(1, 0), basis E11, E12, E21, E22
  const StarAlgebra m2({2});
  const auto g = induced_form(functional(m2, {diag({1, 0})})).gram();
  EXPECT_TRUE(near(g, diag({1, 0, 1, 0}), 0.0));
}

TEST(InducedForm, MatchesDefinitionOnRandomElements) {
  random::Engine rng(40);
  const StarAlgebra alg({2, 3, 1});
  const auto w = random_functional(alg, rng);
  const auto t = induced_form(w);
  for (int k = 0; k < 10; ++k) {
    const auto a = AlgebraElement::from_coordinates(alg, random::vector(alg.total_dim(), rng));
    const auto b = AlgebraElement::from_coordinates(alg, random::vector(alg.total_dim(), rng));
    const Complex direct = eval(w, b.adjoint() * a);
    EXPECT_LT(std::abs(t(a.coordinates(alg), b.coordinates(alg)) - direct), 1e-12);
  }
}

TEST(Gns, ZeroFunctional) {
  EXPECT_EQ(gns(Functional::zero(StarAlgebra({2, 1}))).space_dim(), 0);
}

TEST(Gns, ScalarAlgebra) {
  const StarAlgebra c({1});
  const auto g = gns(functional(c, {diag({2})}));
  ASSERT_EQ(g.space_dim(), 1);
  EXPECT_NEAR(std::abs(g.cyclic_vector()(0)), std::sqrt(2.0), 1e-15);
  AlgebraElement a = AlgebraElement::unit(c);
  a.blocks[0](0, 0) = Complex(3, -1);
  EXPECT_LT(std::abs(g.rep(a)(0, 0) - Complex(3, -1)), 1e-14);
}

TEST(Gns, RankOneStateOnM2IsTheIdentityRepresentation) {
  // kernel = {a : a e_1 = 0}, so H_w = M_2 e_1 = C^2
  const StarAlgebra m2({2});
  const auto w = functional(m2, {diag({1, 0})});
  const auto g = gns(w);
  ASSERT_EQ(g.space_dim(), 2);
  for (Index p = 0; p < 4; ++p) {
    const auto e = AlgebraElement::matrix_unit(m2, p);
    // irreducible 2-dimensional representations of M_2 are fixed by their character
    EXPECT_LT(std::abs(g.rep(e).trace() - e.blocks[0].trace()), 1e-14);
  }
  EXPECT_NEAR(g.cyclic_vector().squaredNorm(), 1.0, 1e-14);
}

TEST(FunctionalParallelSum, Examples) {
  const StarAlgebra c({1});
  const auto one = functional(c, {diag({1})});
  EXPECT_TRUE(near(functional_parallel_sum(one, one).densities[0], diag({0.5}), 1e-15));
  EXPECT_TRUE(near(functional_parallel_sum(one, Functional::zero(c)).densities[0], diag({0}), 0.0));

  const StarAlgebra cc({1, 1});
  const auto w = functional(cc, {diag({1}), diag({0})});
  const auto v = functional(cc, {diag({0}), diag({1})});
  const auto s = functional_parallel_sum(w, v);
  EXPECT_TRUE(near(s.densities[0], diag({0}), 1e-15));
  EXPECT_TRUE(near(s.densities[1], diag({0}), 1e-15));
  EXPECT_THROW(functional_parallel_sum(w, one), InvalidInput);
}

TEST(FunctionalDecompose, Examples) {
  random::Engine rng(41);
  const StarAlgebra alg({2, 1});
  const auto w = random_functional(alg, rng);
  const auto v = random_functional(alg, rng, true);
  auto d = functional_decompose(w, v, Method::direct);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_TRUE(near(d.ac.densities[i], w.densities[i], 1e-12));
    EXPECT_TRUE(near(d.sing.densities[i], PsdMatrix::zero(w.densities[i].dim()), 1e-12));
  }
  d = functional_decompose(w, Functional::zero(alg), Method::direct);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_TRUE(near(d.ac.densities[i], PsdMatrix::zero(w.densities[i].dim()), 0.0));
    EXPECT_TRUE(near(d.sing.densities[i], w.densities[i], 1e-15));
  }

  const StarAlgebra cc({1, 1});
  d = functional_decompose(functional(cc, {diag({3}), diag({5})}),
                           functional(cc, {diag({2}), diag({0})}), Method::iterate);
  EXPECT_TRUE(near(d.ac.densities[0], diag({3}), 1e-9));
  EXPECT_TRUE(near(d.ac.densities[1], diag({0}), 1e-9));
  EXPECT_TRUE(near(d.sing.densities[0], diag({0}), 1e-9));
  EXPECT_TRUE(near(d.sing.densities[1], diag({5}), 1e-9));
}

TEST(FunctionalProperties, RandomFunctionalsOnMixedAlgebra) {
  random::Engine rng(42);
  const Tolerances tol;
  const StarAlgebra alg({2, 3, 1});
  for (int trial = 0; trial < 20; ++trial) {
    const auto w = random_functional(alg, rng);
    const auto v = random_functional(alg, rng);

    const auto g = gns(w, tol);
    const CVector& zeta = g.cyclic_vector();
    for (Index p = 0; p < alg.total_dim(); ++p) {
      const auto e = AlgebraElement::matrix_unit(alg, p);
      const Complex value = eval(w, e);
      EXPECT_LE(std::abs(value - zeta.dot(g.rep(e) * zeta)), tol.recon_tol * (1 + std::abs(value)));
      const auto f = AlgebraElement::matrix_unit(alg, (p * 7 + 3) % alg.total_dim());
      EXPECT_TRUE(near(g.rep(e * f), g.rep(e) * g.rep(f), tol.recon_tol));
      EXPECT_TRUE(near(g.rep(e.adjoint()), g.rep(e).adjoint(), tol.recon_tol));
    }

    const auto wv = functional_parallel_sum(w, v, tol);
    EXPECT_TRUE(near(induced_form(wv).gram(),
                     parallel_sum(induced_form(w).gram(), induced_form(v).gram(), tol),
                     tol.recon_tol));

    const auto d = functional_decompose(w, v, Method::direct, tol);
    for (std::size_t i = 0; i < alg.num_blocks(); ++i) {
      EXPECT_TRUE(loewner_leq(PsdMatrix::zero(d.ac.densities[i].dim()), d.ac.densities[i], tol));
      EXPECT_TRUE(
          loewner_leq(PsdMatrix::zero(d.sing.densities[i].dim()), d.sing.densities[i], tol));
      // blockwise: the densities decompose like the matrices themselves
      const auto md = direct_decompose(v.densities[i], w.densities[i], tol);
      EXPECT_TRUE(near(d.ac.densities[i], md.ac, 1e-6));
    }
    for (Index p = 0; p < alg.total_dim(); ++p) {
      const auto e = AlgebraElement::matrix_unit(alg, p);
      EXPECT_LT(std::abs(eval(w, e) - eval(d.ac, e) - eval(d.sing, e)), tol.recon_tol);
    }
    const auto sv = functional_parallel_sum(d.sing, v, tol);
    for (const auto& rho : sv.densities) EXPECT_LE(rho.norm(), 1e-8);
  }
}

TEST(FunctionalProperties, MajorizedFunctionalHasNoSingularPart) {
  random::Engine rng(43);
  const StarAlgebra alg({2, 3, 1});
  for (int trial = 0; trial < 10; ++trial) {
    const auto w = random_functional(alg, rng);
    Functional v{alg, {}};
    for (std::size_t i = 0; i < alg.num_blocks(); ++i)
      v.densities.push_back(w.densities[i] + random::psd(w.densities[i].dim(), rng() % 2, rng));
    const auto d = functional_decompose(w, v, Method::direct);
    for (const auto& rho : d.sing.densities) EXPECT_LE(rho.norm(), 1e-8);
  }
}
