#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "lsrt/algebraic.hpp"

using namespace lsrt;
using boost::multiprecision::cpp_dec_float_50;

namespace {

AlgebraicNumber s2() { return AlgebraicNumber::sqrt_prime(2); }
AlgebraicNumber s3() { return AlgebraicNumber::sqrt_prime(3); }

}  // namespace

TEST(AlgebraicRing, DefiningRelation) {
  EXPECT_EQ(s2() * s2(), AlgebraicNumber(2));
  EXPECT_EQ((AlgebraicNumber(1) + s2()) * (AlgebraicNumber(1) - s2()), AlgebraicNumber(-1));
}

TEST(AlgebraicRing, SquareOfSumOfRoots) {
  AlgebraicNumber x = s2() + s3();
  AlgebraicNumber sq = (x * x).promoted({2, 3});
  EXPECT_EQ(sq.coeff(0), 5);
  EXPECT_EQ(sq.coeff(1), 0);
  EXPECT_EQ(sq.coeff(2), 0);
  EXPECT_EQ(sq.coeff(3), 2);
}

TEST(AlgebraicRing, SqrtOfRational) {
  AlgebraicNumber r = AlgebraicNumber::sqrt(mpq_class(8, 3));
  EXPECT_EQ(r.primes(), (std::vector<long>{2, 3}));
  EXPECT_EQ(r.coeff(3), mpq_class(2, 3));
  EXPECT_EQ(r * r, AlgebraicNumber(mpq_class(8, 3)));
  EXPECT_EQ(AlgebraicNumber::sqrt(mpq_class(49, 4)), AlgebraicNumber(mpq_class(7, 2)));
  EXPECT_THROW(AlgebraicNumber::sqrt(mpq_class(-1)), Error);
}

TEST(AlgebraicRing, RejectsBadPrimes) {
  EXPECT_THROW(AlgebraicNumber({4}, {1, 1}), Error);
  EXPECT_THROW(AlgebraicNumber({3, 2}, {1, 1, 1, 1}), Error);
}

TEST(AlgebraicRing, AxiomsOnRandomTriples) {
  std::mt19937_64 rng(7);
  const std::vector<std::vector<long>> lists = {{2}, {3, 5}, {2, 7}, {2, 3, 5}};
  for (int t = 0; t < 200; ++t) {
    auto x = random_element(rng, lists[t % 4]);
    auto y = random_element(rng, lists[(t + 1) % 4]);
    auto z = random_element(rng, lists[(t + 2) % 4]);
    EXPECT_EQ((x * y) * z, x * (y * z));
    EXPECT_EQ(x * (y + z), x * y + x * z);
    EXPECT_EQ(x + y, y + x);
    EXPECT_EQ(x * y, y * x);
    EXPECT_NEAR((x * y).to_double(), x.to_double() * y.to_double(), 1e-9 * (1 + std::abs(x.to_double() * y.to_double())));
  }
}

TEST(AlgebraicRing, InverseAndNorm) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 50; ++t) {
    auto x = random_element(rng, {2, 3, 5}, true);
    EXPECT_EQ(x * x.inverse(), AlgebraicNumber(1));
    auto orbit = x.galois_orbit();
    AlgebraicNumber prod = 1;
    for (const auto& o : orbit) prod *= o;
    EXPECT_TRUE(prod.is_rational());
    EXPECT_EQ(prod.rational_part(), x.norm());
  }
}

TEST(AlgebraicRing, GaloisOrbit) {
  auto orbit = AlgebraicNumber(mpq_class(3, 7)).promoted({2, 3}).galois_orbit();
  ASSERT_EQ(orbit.size(), 4u);
  for (const auto& o : orbit) EXPECT_EQ(o, AlgebraicNumber(mpq_class(3, 7)));
  auto o2 = s2().galois_orbit();
  ASSERT_EQ(o2.size(), 2u);
  EXPECT_EQ(o2[0], s2());
  EXPECT_EQ(o2[1], -s2());
  EXPECT_EQ((AlgebraicNumber(1) + s2()).norm(), -1);
}

TEST(AlgebraicRing, FiftyDigitEvaluationSeparatesZero) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    auto x = random_element(rng, {2, 3, 5, 7}, true);
    EXPECT_FALSE(x.is_zero());
    cpp_dec_float_50 v = abs(x.evaluate<cpp_dec_float_50>());
    EXPECT_GT(v, cpp_dec_float_50("1e-30"));
    auto z = x * x.inverse() - AlgebraicNumber(1);
    EXPECT_TRUE(z.is_zero());
    EXPECT_LT(abs(z.evaluate<cpp_dec_float_50>()), cpp_dec_float_50("1e-30"));
  }
}

TEST(Determinant, SmallCases) {
  EXPECT_EQ(det_exact(alg_identity(3)), AlgebraicNumber(1));
  AlgebraicNumber t = s2() * mpq_class(2);
  AlgMatrix A = {{1, t}, {t, 3}};
  EXPECT_EQ(det_exact(A), AlgebraicNumber(-5));
  EXPECT_THROW(det_exact(alg_identity(5), 4), Error);
}

TEST(Determinant, TransposeAndGaloisInvariance) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    AlgMatrix A(4, std::vector<AlgebraicNumber>(4));
    for (auto& row : A)
      for (auto& x : row) x = random_element(rng, {2, 3});
    auto d = det_exact(A);
    EXPECT_EQ(d, det_exact(alg_transpose(A)));
    for (unsigned f = 0; f < 4; ++f) {
      AlgMatrix B = A;
      for (auto& row : B)
        for (auto& x : row) x = x.promoted({2, 3}).tau(f);
      EXPECT_EQ(det_exact(B), d.promoted({2, 3}).tau(f));
    }
  }
}

TEST(Determinant, AgreesWithCofactorExpansion) {
  std::function<AlgebraicNumber(const AlgMatrix&)> cofactor = [&](const AlgMatrix& A) -> AlgebraicNumber {
    if (A.size() == 1) return A[0][0];
    AlgebraicNumber sum = 0;
    for (std::size_t j = 0; j < A.size(); ++j) {
      AlgMatrix minor;
      for (std::size_t i = 1; i < A.size(); ++i) {
        std::vector<AlgebraicNumber> row;
        for (std::size_t k = 0; k < A.size(); ++k)
          if (k != j) row.push_back(A[i][k]);
        minor.push_back(row);
      }
      AlgebraicNumber term = A[0][j] * cofactor(minor);
      sum += j % 2 ? -term : term;
    }
    return sum;
  };
  std::mt19937_64 rng(9);
  for (int t = 0; t < 10; ++t) {
    AlgMatrix A(4, std::vector<AlgebraicNumber>(4));
    for (auto& row : A)
      for (auto& x : row) x = random_element(rng, {2, 5});
    EXPECT_EQ(det_exact(A), cofactor(A));
  }
}

TEST(Parity, InvertibleCases) {
  AlgMatrix A = {{1, s2() * mpq_class(2)}, {s2() * mpq_class(2), 1}};
  EXPECT_TRUE(parity_invertible(A));
  EXPECT_FALSE(det_exact(A).is_zero());
  AlgMatrix D = {{3, 0, 0}, {0, 5, 0}, {0, 0, 7}};
  EXPECT_TRUE(parity_invertible(D));
  AlgMatrix E = {{2, 0}, {0, 3}};
  try {
    parity_invertible(E);
    FAIL() << "expected precondition-violated";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "precondition-violated");
  }
}

TEST(Parity, ImpliesNonzeroDeterminantOnRandomBlocks) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> size(1, 8);
  const std::vector<std::vector<long>> lists = {{2}, {2, 3}, {3, 5, 7}};
  for (int t = 0; t < 60; ++t) {
    auto A = random_parity_block(rng, size(rng), lists[t % 3]);
    EXPECT_TRUE(parity_invertible(A));
    EXPECT_FALSE(det_exact(A).is_zero());
  }
}

TEST(InvertBlock, KnownInverses) {
  AlgMatrix D = {{15, 0}, {0, 45}};
  auto Di = invert_block(D);
  EXPECT_EQ(Di[0][0], AlgebraicNumber(mpq_class(1, 15)));
  EXPECT_EQ(Di[1][1], AlgebraicNumber(mpq_class(1, 45)));
  AlgebraicNumber t = s2() * mpq_class(2);
  AlgMatrix A = {{3, t}, {t, 3}};
  auto Ai = invert_block(A);
  EXPECT_EQ(Ai[0][0], AlgebraicNumber(3));
  EXPECT_EQ(Ai[0][1], -t);
  EXPECT_EQ(Ai[1][0], -t);
  EXPECT_EQ(Ai[1][1], AlgebraicNumber(3));
  AlgMatrix S = {{1, 2}, {2, 4}};
  EXPECT_THROW(invert_block(S), Error);
}

TEST(InvertBlock, ProductIsIdentity) {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 10; ++t) {
    auto A = random_parity_block(rng, 4, {2, 3});
    auto P = alg_multiply(A, invert_block(A));
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(P[i][j], AlgebraicNumber(i == j ? 1 : 0));
  }
}
