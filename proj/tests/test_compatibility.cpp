#include <gtest/gtest.h>

#include "lsrt/compatibility.hpp"

using namespace lsrt;

namespace {

SeriesOptions opts(int Lambda) {
  SeriesOptions o;
  o.Lambda = Lambda;
  o.grid_points = 21;
  return o;
}

}  // namespace

TEST(Fixpoint, NoBlocksGivesZero) {
  auto spec = cubic_spec(Family::NLS, 1, golden_mu());
  auto r = counterterm_fixpoint(spec, 5e-3, opts(8));
  EXPECT_FALSE(r.excluded);
  EXPECT_TRUE(r.M.empty());
  EXPECT_EQ(r.iterations, 1);
  EXPECT_EQ(r.diffs.front(), 0.0);
}

TEST(Fixpoint, ConvergesToCompatibleCounterterm) {
  auto spec = generic_cubic_spec(1);
  const double eps = 5e-3;
  auto r = counterterm_fixpoint(spec, eps, opts(8));
  ASSERT_FALSE(r.excluded);
  EXPECT_LT(r.ratio, 0.5);
  EXPECT_LT(r.diffs.back(), 1e-10);
  EXPECT_FALSE(r.M.empty());
  EXPECT_LT(r.M.self_adjoint_defect(), 1e-12);
  // M is a fixed point: recomputing the update at M returns M
  SeriesContext ctx(spec, eps, r.M, opts(8));
  auto again = compatibility_update(ctx, counterterms(ctx, spec.N + 2));
  EXPECT_LT(again.distance(r.M, 0.5), 1e-10);
  const double lip = update_lipschitz(spec, eps, opts(8), r.M);
  EXPECT_LE(r.ratio, lip + 1e-9);
  auto fit = fit_counterterm_decay(r.M, eps);
  EXPECT_GT(fit.K2, 0);
  EXPECT_TRUE(decay_bound_holds(r.M, eps, fit));
  EXPECT_LT(r.M.max_abs(), fit.K2 * eps * (1 + 1e-12));
}

TEST(Fixpoint, ExclusionAndCaps) {
  auto spec = generic_cubic_spec(1);
  auto o = opts(8);
  // put gamma_bar exactly on |delta| of an O mode
  const Mode w{3, {3}};
  const double eps = 5e-3;
  o.ms.gamma_bar = std::abs(eigenvalue(spec, w, eps));
  auto r = counterterm_fixpoint(spec, eps, o);
  EXPECT_TRUE(r.excluded);
  ASSERT_TRUE(r.witness.has_value());
  EXPECT_EQ(r.witness->size(), w.size());
  EXPECT_FALSE(r.reason.empty());
  FixpointOptions f;
  f.max_iter = 1;
  f.tol = 0;
  EXPECT_THROW(counterterm_fixpoint(spec, 5e-3, opts(8), f), Error);
}
