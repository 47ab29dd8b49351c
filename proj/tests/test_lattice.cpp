#include <gtest/gtest.h>

#include <set>

#include "lsrt/lattice.hpp"

using namespace lsrt;

namespace {

Mode mode(int n, std::initializer_list<int> m) {
  Mode v;
  v.n = n;
  int i = 0;
  for (int x : m) v.m[i++] = x;
  return v;
}

EquationSpec nls_default() {
  auto s = cubic_spec(Family::NLS, 2, 0.3);
  s.mu_exact = mpq_class(3, 10);
  s.eps0 = 0.1;
  return s;
}

}  // namespace

TEST(Eigenvalue, FamilyFormulas) {
  auto s = nls_default();
  EXPECT_NEAR(eigenvalue(s, mode(1, {1, 1}), 0.0), 0.0, 1e-15);
  EXPECT_NEAR(eigenvalue(s, mode(1, {1, 1}), 0.01), 0.01, 1e-15);
  EquationSpec b;
  b.family = Family::NLB;
  b.D = 2;
  b.mu = 0;
  b.eps0 = 0.1;
  EXPECT_NEAR(eigenvalue(b, mode(2, {1, 1}), 0.05), 4 * 0.05, 1e-15);
  auto w = cubic_spec(Family::NLW, 2, 0.3);
  w.eps0 = 0.1;
  EXPECT_NEAR(eigenvalue(w, mode(1, {1, 1}), 0.02), 0.02, 1e-15);
  EXPECT_THROW(eigenvalue(s, mode(1, {1, 1}), 0.2), Error);
}

TEST(Eigenvalue, AffineWithExactSlope) {
  auto s = nls_default();
  for (const auto& f : {Family::NLS, Family::NLW}) {
    s.family = f;
    for (const auto& nu : enumerate_shell(s, 6)) {
      double a = eigenvalue(s, nu, 0.0), b = eigenvalue(s, nu, 0.05), c = eigenvalue(s, nu, 0.1);
      EXPECT_NEAR(b - a, c - b, 1e-12);
      EXPECT_NEAR((c - a) / 0.1, eigenvalue_slope(s, nu), 1e-9);
    }
  }
}

TEST(Classify, Examples) {
  auto s = nls_default();
  auto grid = uniform_grid(s.eps0, 101);
  EXPECT_EQ(classify(s, mode(1, {1, 1}), grid).label, SetLabel::Q);
  EXPECT_EQ(classify(s, mode(0, {1, 0}), grid).label, SetLabel::R);
  // delta(2,(1,2)) = 0.7 + 2 eps stays above 1/2.
  EXPECT_NEAR(eigenvalue(s, mode(2, {1, 2}), 0.0), 0.7, 1e-12);
  EXPECT_EQ(classify(s, mode(2, {1, 2}), grid).label, SetLabel::R);
  // delta(0,(0,0)) = mu = 0.3.
  EXPECT_EQ(classify(s, mode(0, {0, 0}), grid).label, SetLabel::O);
}

TEST(Classify, StableUnderGridRefinement) {
  auto s = nls_default();
  s.mu_exact.reset();
  s.mu = golden_mu();
  auto coarse = uniform_grid(s.eps0, 11), fine = uniform_grid(s.eps0, 1001);
  for (const auto& nu : enumerate_shell(s, 8)) {
    auto a = classify(s, nu, coarse), b = classify(s, nu, fine);
    if (!a.boundary_ambiguous && !b.boundary_ambiguous) EXPECT_EQ(a.label, b.label);
  }
}

TEST(Classify, ResonantKernelIsParabola) {
  EquationSpec s;
  s.family = Family::NLS;
  s.resonant = true;
  s.mu = 0;
  s.D = 2;
  s.boundary = Boundary::Periodic;
  auto grid = uniform_grid(s.eps0, 11);
  for (const auto& nu : enumerate_shell(s, 10))
    EXPECT_EQ(classify(s, nu, grid).label == SetLabel::Q, nu.n == nu.m2());
}

TEST(Shell, Counts) {
  auto s = cubic_spec(Family::NLS, 1, 0.3, Boundary::Periodic);
  EXPECT_EQ(enumerate_shell(s, 1).size(), 5u);
  s.boundary = Boundary::Dirichlet;
  EXPECT_EQ(enumerate_shell(s, 1).size(), 4u);
  auto p = cubic_spec(Family::NLS, 2, 0.3, Boundary::Periodic);
  EXPECT_EQ(enumerate_shell(p, 2).size(), 25u);
}

TEST(Shell, MatchesBruteForceAndIsOrdered) {
  auto s = cubic_spec(Family::NLS, 3, 0.3, Boundary::Periodic);
  auto shell = enumerate_shell(s, 4);
  std::set<Mode> brute;
  for (int n = -4; n <= 4; ++n)
    for (int a = -4; a <= 4; ++a)
      for (int b = -4; b <= 4; ++b)
        for (int c = -4; c <= 4; ++c)
          if (std::abs(n) + std::abs(a) + std::abs(b) + std::abs(c) <= 4) brute.insert(mode(n, {a, b, c}));
  EXPECT_EQ(shell.size(), brute.size());
  EXPECT_TRUE(std::is_sorted(shell.begin(), shell.end()));
  EXPECT_TRUE(std::equal(shell.begin(), shell.end(), brute.begin()));
}

TEST(Dirichlet, OrbitRoundTrip) {
  auto nu = mode(3, {2, 5});
  auto orbit = dirichlet_orbit(nu, 2);
  ASSERT_EQ(orbit.size(), 4u);
  for (const auto& [img, par] : orbit) {
    auto [c, s] = canonicalize(img, 2);
    EXPECT_EQ(c, nu);
    EXPECT_EQ(s, par);
  }
  EXPECT_EQ(canonicalize(mode(1, {0, 2}), 2).second, 0);
}

TEST(ModeKey, RoundTrip) {
  for (const auto& nu : {mode(-7, {3, -2, 9}), mode(0, {0, 0, 0}), mode(100, {-100, 5, -1})})
    EXPECT_EQ(Mode::from_key(nu.key()), nu);
}

TEST(SpectrumCheck, GoldenMassPasses) {
  auto s = cubic_spec(Family::NLS, 2, golden_mu());
  auto grid = uniform_grid(s.eps0, 1001);
  auto rep = validate_spectrum(s, 20, grid);
  EXPECT_TRUE(rep.kernel_ok);
  EXPECT_TRUE(rep.pairs_ok);
  EXPECT_GT(rep.small_pairs, 0);
  EXPECT_GT(rep.gamma0, 0);
  EXPECT_DOUBLE_EQ(rep.c0, 1.0);
  EXPECT_LE(rep.c1, 1.0);
  EXPECT_GE(rep.c2, 1.0);
  EXPECT_LE(rep.c2, 1.0 + 1e-12);
  EXPECT_DOUBLE_EQ(rep.c3, 1.0);
}

TEST(SpectrumCheck, RationalMassGivesWitness) {
  auto s = nls_default();
  auto rep = validate_spectrum(s, 30, uniform_grid(s.eps0, 11));
  EXPECT_FALSE(rep.kernel_ok);
  ASSERT_TRUE(rep.witness.has_value());
  EXPECT_NE(rep.witness->n, 1);
  EXPECT_TRUE(in_kernel(s, *rep.witness));
}

TEST(ContinuedFraction, GoldenMass) {
  std::vector<long> q = {0, 3};
  for (int i = 0; i < 30; ++i) q.push_back(4);
  auto cf = continued_fraction(q);
  EXPECT_NEAR(cf.value, golden_mu(), 1e-15);
  EXPECT_EQ(cf.convergents[1], mpq_class(1, 3));
}
