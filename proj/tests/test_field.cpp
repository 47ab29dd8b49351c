#include <gtest/gtest.h>

#include <random>

#include "lsrt/field.hpp"

using namespace lsrt;

namespace {

Field random_field(std::mt19937& rng, int D, int R) {
  std::uniform_real_distribution<double> U(-1, 1);
  Field f(D, R);
  for (const auto& nu : full_ball(D, R)) f.set(nu, cplx(U(rng), U(rng)));
  return f;
}

// Samples on a uniform grid of the (1+D)-torus, pointwise product, then projection back.
std::vector<cplx> sample(const Field& f, int n) {
  const int D = f.D();
  std::size_t total = 1;
  for (int i = 0; i <= D; ++i) total *= n;
  std::vector<cplx> out(total);
  const auto nz = f.nonzeros();
  for (std::size_t k = 0; k < total; ++k) {
    std::size_t r = k;
    std::array<double, kMaxDim + 1> th{};
    for (int i = D; i >= 0; --i) {
      th[i] = 2 * M_PI * static_cast<double>(r % n) / n;
      r /= n;
    }
    cplx s = 0;
    for (const auto& [nu, z] : nz) {
      double ph = nu.n * th[0];
      for (int i = 0; i < D; ++i) ph += nu.m[i] * th[i + 1];
      s += z * std::polar(1.0, ph);
    }
    out[k] = s;
  }
  return out;
}

cplx coefficient(const std::vector<cplx>& vals, const Mode& nu, int D, int n) {
  cplx s = 0;
  for (std::size_t k = 0; k < vals.size(); ++k) {
    std::size_t r = k;
    double ph = 0;
    for (int i = D; i >= 0; --i) {
      const double th = 2 * M_PI * static_cast<double>(r % n) / n;
      ph += (i == 0 ? nu.n : nu.m[i - 1]) * th;
      r /= n;
    }
    s += vals[k] * std::polar(1.0, -ph);
  }
  return s / static_cast<double>(vals.size());
}

}  // namespace

TEST(Field, BallCount) {
  EXPECT_EQ(full_ball(1, 2).size(), 13u);
  EXPECT_EQ(full_ball(2, 1).size(), 7u);
  EXPECT_EQ(full_ball(2, 2).size(), 25u);
}

TEST(Field, StorageAndConjugate) {
  Field f(2, 3);
  Mode a{1, {2, 0}};
  f.set(a, cplx(1, 2));
  EXPECT_EQ(f.get(a), cplx(1, 2));
  EXPECT_EQ(f.get_sigma(a, -1), cplx(1, -2));
  EXPECT_EQ(f.conj_reflect().get(-a), cplx(1, -2));
  EXPECT_EQ(f.get(Mode{3, {1, 0}}), cplx{});
  EXPECT_THROW(f.set(Mode{3, {1, 0}}, 1.0), Error);
  EXPECT_EQ(f.nonzeros().size(), 1u);
}

TEST(Field, CubicMatchesGridProduct) {
  std::mt19937 rng(7);
  const int R = 3, Rout = 9, n = 32;
  auto spec = cubic_spec(Family::NLS, 1, golden_mu(), Boundary::Periodic);
  spec.terms = {Term{2, 1, {}, cplx(1.0, 0.5)}, Term{3, 0, {}, cplx(-0.3, 0.0)}};
  Field u = random_field(rng, 1, R);
  Field f = nonlinearity(spec, u, 1.0, Rout);
  auto vals = sample(u, n);
  std::vector<cplx> prod(vals.size());
  for (std::size_t k = 0; k < vals.size(); ++k) {
    const cplx z = vals[k];
    prod[k] = cplx(1.0, 0.5) * z * z * std::conj(z) + cplx(-0.3, 0.0) * z * z * z;
  }
  double err = 0;
  for (const auto& nu : full_ball(1, Rout)) err = std::max(err, std::abs(coefficient(prod, nu, 1, n) - f.get(nu)));
  EXPECT_LT(err, 1e-10);
}

TEST(Field, ZeroAndSingleModeSupport) {
  auto spec = cubic_spec(Family::NLS, 2, golden_mu());
  Field z(2, 4);
  EXPECT_TRUE(nonlinearity(spec, z, 1.0, 12).is_zero());
  Field e(2, 4);
  Mode a{1, {1, 1}};
  e.set(a, 2.0);
  auto f = nonlinearity(spec, e, 1.0, 12).nonzeros();
  ASSERT_EQ(f.size(), 1u);
  EXPECT_EQ(f[0].first, a);
  EXPECT_NEAR(std::abs(f[0].second - 8.0), 0, 1e-14);
}

TEST(Field, SeriesOrderMatchesExpansion) {
  // order-k coefficient of (u0 + eta u1 + eta^2 u2)^2 conj(...) against a numerical expansion in eta
  std::mt19937 rng(3);
  auto spec = cubic_spec(Family::NLS, 1, golden_mu(), Boundary::Periodic);
  FieldSeries u{random_field(rng, 1, 2), random_field(rng, 1, 2), random_field(rng, 1, 2)};
  const int Rout = 6;
  std::vector<Field> orders;
  for (int k = 0; k <= 6; ++k) orders.push_back(nonlinearity_order(spec, u, k, 2, Rout));
  for (double eta : {0.3, -0.7, 1.1}) {
    Field s = u[0] + u[1] * eta;
    s += u[2] * (eta * eta);
    Field direct = nonlinearity(spec, s, 1.0, Rout);
    Field sum(1, Rout);
    double w = 1;
    for (int k = 0; k <= 6; ++k, w *= eta) sum += orders[k] * w;
    EXPECT_LT(direct.sup_diff(sum), 1e-10);
  }
  auto sp = spec;
  sp.terms = {Term{2, 1, {1, 0, 0}, 1.0}};
  EXPECT_THROW(nonlinearity(sp, u[0], 1.0, 4), Error);
}

TEST(Field, LinearizationIsDerivative) {
  std::mt19937 rng(11);
  auto spec = cubic_spec(Family::NLS, 1, golden_mu(), Boundary::Periodic);
  spec.terms = {Term{2, 1, {}, 1.0}, Term{1, 2, {}, cplx(0.2, -0.1)}};
  Field u = random_field(rng, 1, 2), v = random_field(rng, 1, 2);
  const int Rout = 6;
  auto [K1, K2] = linearization_kernels(spec, u, 1.0, Rout);
  Field lin = convolve(K1, v, Rout);
  lin += convolve(K2, v.conj_reflect(), Rout);
  const double h = 1e-6;
  Field fp = nonlinearity(spec, u + v * h, 1.0, Rout), fm = nonlinearity(spec, u + v * (-h), 1.0, Rout);
  fp -= fm;
  fp *= 1.0 / (2 * h);
  EXPECT_LT(fp.sup_diff(lin), 1e-7);
}
