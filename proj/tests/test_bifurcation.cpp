#include <gtest/gtest.h>

#include "lsrt/bifurcation.hpp"

using namespace lsrt;

namespace {

IVec v(std::initializer_list<int> m) {
  IVec out{};
  int i = 0;
  for (int x : m) out[i++] = x;
  return out;
}

// Floating-point residual of the odd-extended profile, computed from the defining sum over m1 + m2 - m3 = m.
double float_residual(const AmplitudeProfile& prof, const IVec& m, int radius) {
  std::map<IVec, double> a;
  for (const auto& [k, val] : prof.amplitude)
    for (unsigned f = 0; f < (1u << prof.D); ++f) {
      IVec img = k;
      double s = 1;
      for (int i = 0; i < prof.D; ++i)
        if (f >> i & 1u) {
          img[i] = -img[i];
          s = -s;
        }
      a[img] = s * val.to_double();
    }
  auto get = [&](const IVec& k) {
    auto it = a.find(k);
    return it == a.end() ? 0.0 : it->second;
  };
  double rhs = 0;
  for (const auto& m1 : ball(prof.D, radius))
    for (const auto& m2 : ball(prof.D, radius)) {
      IVec m3 = sub(add(m1, m2), m);
      if (dot(sub(m1, m3), sub(m2, m3)) == 0) rhs += get(m1) * get(m2) * get(m3);
    }
  return get(m) * spatial_power(prof.family, m) - rhs;
}

AmplitudeProfile corrected(const std::vector<IVec>& support, Family f, int D) {
  auto c = candidate_profile(support, f, D, SignConvention::SignCorrected);
  EXPECT_TRUE(std::holds_alternative<AmplitudeProfile>(c));
  return std::get<AmplitudeProfile>(c);
}

}  // namespace

TEST(Quadruples, MatchBruteForce) {
  for (int D : {1, 2}) {
    const IVec m = D == 1 ? v({3}) : v({1, 2});
    auto got = enumerate_quadruples(m, D, 5);
    std::vector<Quadruple> want;
    for (const auto& m1 : ball(D, 5))
      for (const auto& m2 : ball(D, 5))
        for (const auto& m3 : ball(D, 5)) {
          if (add(m1, m2) != add(m, m3)) continue;
          long lhs = norm2(m1) + norm2(m2) - norm2(m3);
          if (lhs == norm2(m)) want.push_back({m1, m2, m3, m});
        }
    std::sort(want.begin(), want.end());
    EXPECT_EQ(got, want) << "D=" << D;
  }
}

TEST(Candidate, ExampleCoefficient) {
  EXPECT_EQ(amplitude_c1(3, 2), mpq_class(16, 43));
  EXPECT_EQ(amplitude_c1(2, 5), mpq_class(8, 41));
  EXPECT_EQ(amplitude_c1(3, 3), mpq_class(16, 59));
  EXPECT_EQ(amplitude_c1(1, 1), mpq_class(4, 3));
}

TEST(Candidate, LiteralSingleModeInadmissible) {
  auto c = candidate_profile({v({1})}, Family::NLS, 1);
  ASSERT_TRUE(std::holds_alternative<Inadmissible>(c));
  EXPECT_EQ(std::get<Inadmissible>(c).radicand, mpq_class(-1, 3));
}

TEST(Candidate, RejectsSupportOutsideZ1) {
  EXPECT_THROW(candidate_profile({v({2, 2})}, Family::NLS, 2), Error);
  EXPECT_THROW(candidate_profile({v({1, 0})}, Family::NLS, 2), Error);
  EXPECT_THROW(candidate_profile({v({1, 2}), v({1, 2})}, Family::NLS, 2), Error);
}

TEST(Candidate, LiteralConventionNeverAdmissibleInHigherDimension) {
  for (int D : {2, 3})
    for (Family f : {Family::NLS, Family::NLB}) {
      auto res = search_supports(f, D, D == 2 ? 7 : 7, D == 2 ? 3 : 2, SignConvention::Literal);
      ASSERT_FALSE(res.empty());
      for (const auto& r : res) EXPECT_FALSE(r.admissible);
    }
}

TEST(Candidate, CorrectedSingleModeSolvesTheResonantSystem) {
  for (int D : {1, 2, 3})
    for (Family f : {Family::NLS, Family::NLB}) {
      IVec m{};
      m[0] = 1;
      for (int i = 1; i < D; ++i) m[i] = 2;
      auto prof = corrected({m}, f, D);
      EXPECT_EQ(prof.amplitude.at(m) * prof.amplitude.at(m) * mpq_class(pow_int(3, D)), AlgebraicNumber(spatial_power(f, m)));
      EXPECT_TRUE(q_residual(prof, 2 * l1(m) + 1).zero());
      EXPECT_NEAR(float_residual(prof, m, 2 * l1(m) + 1), 0.0, 1e-12);
    }
}

TEST(Candidate, AlgebraicResidualAgreesWithFloatOracle) {
  std::optional<AmplitudeProfile> found;
  for (const auto& r : search_supports(Family::NLS, 2, 13, 2, SignConvention::SignCorrected))
    if (r.profile && r.support.size() == 2 && !r.residual_zero) {
      found = r.profile;
      break;
    }
  ASSERT_TRUE(found);
  const auto& prof = *found;
  int maxm = 0;
  for (const auto& m : prof.support) maxm = std::max(maxm, l1(m));
  auto res = q_residual(prof, 2 * maxm + 1);
  for (const auto& m : ball(2, maxm)) {
    double want = float_residual(prof, m, 2 * maxm + 1);
    double got = res.nonzero.count(m) ? res.nonzero.at(m).to_double() : 0.0;
    EXPECT_NEAR(got, want, 1e-9) << m[0] << "," << m[1];
  }
}

TEST(Candidate, PerturbedAmplitudeLeavesResidual) {
  auto prof = corrected({v({1, 2})}, Family::NLS, 2);
  prof.amplitude.begin()->second = prof.amplitude.begin()->second * mpq_class(11, 10);
  auto res = q_residual(prof, 7);
  EXPECT_FALSE(res.zero());
}

TEST(Candidate, BeamSumFormMatchesReducedForm) {
  for (int D : {1, 2}) {
    auto search = search_supports(Family::NLB, D, D == 1 ? 7 : 5, 2, SignConvention::SignCorrected);
    int checked = 0;
    for (const auto& r : search) {
      if (!r.profile) continue;
      int maxm = 0;
      for (const auto& m : r.support) maxm = std::max(maxm, l1(m));
      auto a = q_residual(*r.profile, 2 * maxm + 1);
      auto b = q_residual_beam_sum_form(*r.profile, 2 * maxm + 1);
      EXPECT_EQ(a.nonzero.size(), b.nonzero.size());
      for (const auto& [m, d] : a.nonzero) {
        ASSERT_TRUE(b.nonzero.count(m));
        EXPECT_EQ(b.nonzero.at(m), d);
      }
      ++checked;
    }
    EXPECT_GT(checked, 0);
  }
}

TEST(Candidate, SearchReportsZeroResiduals) {
  auto res = search_supports(Family::NLS, 2, 5, 2, SignConvention::SignCorrected);
  int zero = 0;
  for (const auto& r : res)
    if (r.admissible && r.residual_zero) {
      ++zero;
      EXPECT_TRUE(q_residual(*r.profile, 11).zero());
    }
  EXPECT_GT(zero, 0);
}

TEST(Jacobian, SymmetricWithParityStructure) {
  for (int D : {1, 2}) {
    IVec m{};
    m[0] = 1;
    for (int i = 1; i < D; ++i) m[i] = 2;
    auto prof = corrected({m}, Family::NLS, D);
    auto J = assemble_J(prof, D == 1 ? 9 : 7);
    EXPECT_TRUE(J.symmetric());
    const mpq_class z = z_factor(D, 1);
    for (std::size_t b = 0; b < J.blocks.size(); ++b) {
      auto B = J.block(b, z);
      EXPECT_TRUE(in_parity_normal_form(B)) << "D=" << D << " block " << b;
      for (std::size_t i = 0; i < B.size(); ++i) EXPECT_TRUE(B[i][i].is_rational() && is_odd_integer(B[i][i].rational_part()));
    }
  }
}

TEST(SignChoice, HoldsOnZ1) {
  for (int D : {1, 2, 3}) {
    auto rep = sign_choice_brute_force(D, D == 3 ? 5 : 7);
    EXPECT_GT(rep.triples, 0);
    EXPECT_EQ(rep.counterexamples(), 0) << "D=" << D;
  }
}

TEST(SignChoice, ControlOnFullLatticeFails) {
  auto rep = sign_choice_brute_force(2, 4, false);
  EXPECT_GT(rep.forbidden_patterns, 0);
}

TEST(SingleMode, AmplitudeMatchesCoupling) {
  for (int D : {1, 2, 3}) {
    for (Family f : {Family::NLS, Family::NLW}) {
      auto q0 = single_mode_q0(f, D);
      mpq_class g = single_mode_coupling(f, D);
      EXPECT_EQ(q0 * q0 * g, AlgebraicNumber(1)) << "D=" << D;
      EXPECT_NEAR(single_mode_coupling_grid(f, D), g.get_d(), 1e-12);
    }
  }
  EXPECT_EQ(single_mode_q0(Family::NLS, 2), AlgebraicNumber(mpq_class(4, 3)));
  EXPECT_THROW(single_mode_q0(Family::NLB, 2), Error);
}
