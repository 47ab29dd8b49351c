#include <gtest/gtest.h>

#include "lsrt/series.hpp"

using namespace lsrt;

namespace {

SeriesOptions opts(int Lambda) {
  SeriesOptions o;
  o.Lambda = Lambda;
  o.grid_points = 21;
  return o;
}

}  // namespace

TEST(Base, DirichletAndPeriodic) {
  for (int D : {1, 2}) {
    auto spec = cubic_spec(Family::NLS, D, golden_mu());
    Field q = base_solution(spec, 4);
    const double c = std::pow(3.0, -D / 2.0);
    Mode f{1, {}};
    for (int i = 0; i < D; ++i) f.m[i] = 1;
    EXPECT_NEAR(q.get(f).real(), c, 1e-14);
    EXPECT_EQ(q.nonzeros().size(), std::size_t{1} << D);
    // fixed point of the kernel equation
    Field g = nonlinearity(spec, q, 0.0, 4);
    for (const auto& [nu, z] : q.nonzeros()) EXPECT_NEAR(std::abs(g.get(nu) - z), 0, 1e-14);
  }
  auto per = cubic_spec(Family::NLS, 2, golden_mu(), Boundary::Periodic);
  Field q = base_solution(per, 3);
  EXPECT_EQ(q.nonzeros().size(), 1u);
  EXPECT_NEAR(q.get(Mode{1, {1, 1}}).real(), 1.0, 1e-14);
  EXPECT_THROW(base_solution(cubic_spec(Family::NLW, 1, golden_mu()), 3), Error);
}

TEST(Recursion, FirstOrderMatchesClosedForm) {
  auto spec = generic_cubic_spec(2);
  const double eps = 3e-3;
  SeriesContext ctx(spec, eps, BlockMatrix{}, opts(8));
  auto st = run_recursion(ctx, Counterterms{}, 2);
  EXPECT_TRUE(st.u[1].is_zero());
  Field f0 = nonlinearity(spec, ctx.q0(), 0.0, 8);
  for (const auto& nu : ctx.modes()) {
    if (ctx.label(nu) == SetLabel::Q) continue;
    const cplx want = f0.get(nu) / ctx.delta(nu);
    EXPECT_NEAR(std::abs(st.u[2].get(nu) - want), 0, 1e-12 * std::max(1.0, std::abs(want))) << nu.str(2);
  }
  // kernel rows solve the linearized kernel equation exactly
  Field F2 = nonlinearity_order(spec, st.u, 2, 8, 8);
  for (const auto& q : ctx.Q()) EXPECT_NEAR(std::abs(static_cast<double>(q.n) * st.u[2].get(q) - F2.get(q)), 0, 1e-12);
  EXPECT_LT(st.dual_path_defect, 1e-12);
  EXPECT_FALSE(ctx.blocks().blocks().empty());
}

TEST(Recursion, OddOrdersVanishForEvenNonlinearityDegree) {
  auto spec = cubic_spec(Family::NLS, 1, golden_mu());
  SeriesContext ctx(spec, 5e-3, BlockMatrix{}, opts(8));
  auto st = run_recursion(ctx, Counterterms{}, 7);
  for (int k = 1; k <= 7; k += 2) EXPECT_TRUE(st.u[k].sup() < 1e-15) << k;
  for (int k = 2; k <= 6; k += 2) EXPECT_GT(st.u[k].sup(), 1e-6) << k;
  EXPECT_THROW(recursion_step(ctx, st, Counterterms{}, 3), Error);
}

TEST(Newton, ConvergesAndZeroEps) {
  auto spec = cubic_spec(Family::NLS, 2, golden_mu());
  auto r0 = newton_oracle(spec, 0.0, 6, 1e-12);
  EXPECT_TRUE(r0.converged);
  EXPECT_EQ(r0.iterations, 0);
  auto r = newton_oracle(spec, 1e-3, 12, 1e-12);
  ASSERT_TRUE(r.converged);
  EXPECT_FALSE(r.diverged);
  auto rep = residual(spec, r.u, 1e-3, 2);
  EXPECT_LT(rep.galerkin, 1e-10);
  EXPECT_LE(rep.interior, rep.galerkin);
  EXPECT_GE(rep.full, rep.galerkin);
  auto g = gevrey_fit(r.u);
  EXPECT_GT(g.kappa, 0);
  EXPECT_GT(g.r2, 0.8);
  EXPECT_THROW(newton_oracle(cubic_spec(Family::NLS, 2, golden_mu(), Boundary::Periodic), 1e-3, 4, 1e-10), Error);
}

TEST(Series, ApproachesNewtonAsOrderGrows) {
  auto spec = cubic_spec(Family::NLS, 1, golden_mu());
  const double eps = 4e-3;
  const int L = 10;
  auto nt = newton_oracle(spec, eps, L, 1e-13);
  ASSERT_TRUE(nt.converged);
  SeriesContext ctx(spec, eps, BlockMatrix{}, opts(L));
  auto st = run_recursion(ctx, Counterterms{}, 8);
  double prev = 1e300;
  for (int K : {0, 2, 4, 6, 8}) {
    const double d = partial_sum(st, ctx.eta(), K).sup_diff(nt.u);
    EXPECT_LT(d, prev) << K;
    prev = d;
    const double rg = residual(spec, partial_sum(st, ctx.eta(), K), eps, 0).galerkin;
    EXPECT_LT(rg, 10 * std::pow(ctx.eta(), K + 2)) << K;
  }
}

TEST(Series, GuardsAndErrors) {
  EXPECT_THROW(SeriesContext(cubic_spec(Family::NLB, 1, 0.0), 1e-3, BlockMatrix{}, opts(4)), Error);
  auto spec = cubic_spec(Family::NLS, 1, golden_mu());
  EXPECT_THROW(SeriesContext(spec, 1.0, BlockMatrix{}, opts(4)), Error);
  SeriesContext ctx(spec, 1e-3, BlockMatrix{}, opts(4));
  EXPECT_THROW(ctx.label(Mode{9, {}}), Error);
}

TEST(Measure, WindowsAreNested) {
  auto spec = generic_cubic_spec(2);
  MultiscaleParams prm;
  auto m = measure_scan(spec, 200, prm, 12);
  ASSERT_EQ(m.windows.size(), 7u);
  for (std::size_t j = 0; j < m.windows.size(); ++j) {
    EXPECT_GE(m.fractions[j], 0.0);
    EXPECT_LE(m.fractions[j], 1.0);
    if (j) EXPECT_LE(m.counts[j], m.counts[j - 1]);
  }
  EXPECT_EQ(m.counts[0], 200);
}
