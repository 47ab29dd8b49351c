#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "lsrt/algebraic.hpp"
#include "lsrt/clusters.hpp"
#include "lsrt/lattice.hpp"

namespace lsrt {

inline bool in_Z1(const IVec& m, int D) {
  if (m[0] % 2 == 0) return false;
  for (int i = 1; i < D; ++i)
    if (m[i] % 2 != 0) return false;
  return true;
}

// Positive components only: under Dirichlet conditions a vanishing component carries no amplitude.
inline bool in_Z1_plus(const IVec& m, int D) {
  if (!in_Z1(m, D)) return false;
  for (int i = 0; i < D; ++i)
    if (m[i] <= 0) return false;
  return true;
}

inline std::vector<IVec> ball(int D, int radius) {
  std::vector<IVec> out;
  IVec cur{};
  std::function<void(int, int)> rec = [&](int i, int left) {
    if (i == D) {
      out.push_back(cur);
      return;
    }
    for (int v = -left; v <= left; ++v) {
      cur[i] = v;
      rec(i + 1, left - std::abs(v));
    }
    cur[i] = 0;
  };
  rec(0, radius);
  return out;
}

inline std::vector<IVec> Z1_plus_modes(int D, int radius) {
  std::vector<IVec> out;
  for (const auto& m : ball(D, radius))
    if (in_Z1_plus(m, D)) out.push_back(m);
  return out;
}

inline long spatial_power(Family f, const IVec& m) {
  long q = norm2(m);
  return f == Family::NLB ? q * q : q;
}

struct Quadruple {
  IVec m1, m2, m3, m;
  auto operator<=>(const Quadruple&) const = default;
};

inline bool rectangle(const IVec& m1, const IVec& m2, const IVec& m3) {
  return dot(sub(m1, m3), sub(m2, m3)) == 0;
}

// All (m1, m2, m3) with |m_i| <= radius, m1 + m2 - m3 = m and <m1 - m3, m2 - m3> = 0.
// The beam family uses the same constraint after the q_{-m} parity reduction.
inline std::vector<Quadruple> enumerate_quadruples(const IVec& m, int D, int radius, Family = Family::NLS) {
  std::vector<Quadruple> out;
  const auto B = ball(D, radius);
  for (const auto& m1 : B)
    for (const auto& m2 : B) {
      IVec m3 = sub(add(m1, m2), m);
      if (l1(m3) > radius) continue;
      if (rectangle(m1, m2, m3)) out.push_back({m1, m2, m3, m});
    }
  std::sort(out.begin(), out.end());
  return out;
}

struct AmplitudeProfile {
  Family family = Family::NLS;
  int D = 2;
  std::vector<IVec> support;
  std::map<IVec, AlgebraicNumber> amplitude;  // on the fundamental domain
  std::size_t N0() const { return support.size(); }
};

// Odd extension a_{S_i m} = -a_m over the full sign orbit.
inline std::map<IVec, AlgebraicNumber> odd_extension(const AmplitudeProfile& prof) {
  std::map<IVec, AlgebraicNumber> full;
  std::vector<long> P;
  for (const auto& [m, a] : prof.amplitude) P = AlgebraicNumber::merge(P, a.trimmed().primes());
  for (const auto& [m, a] : prof.amplitude) {
    if (a.is_zero()) continue;
    AlgebraicNumber base = a.trimmed().promoted(P);
    for (unsigned f = 0; f < (1u << prof.D); ++f) {
      IVec img = m;
      int par = 1;
      for (int i = 0; i < prof.D; ++i)
        if (f >> i & 1u) {
          img[i] = -img[i];
          par = -par;
        }
      full[img] = par > 0 ? base : -base;
    }
  }
  return full;
}

struct Residual {
  std::map<IVec, AlgebraicNumber> nonzero;  // m -> LHS - RHS where nonzero
  long points = 0;                          // lattice points where either side is nonzero
  long contributing_triples = 0;
  bool zero() const { return nonzero.empty(); }
};

// Residual of |m|^{2 or 4} a_m = sum over rectangles of a a a, exactly, over the full lattice.
inline Residual q_residual(const AmplitudeProfile& prof, int radius) {
  const auto full = odd_extension(prof);
  int maxm = 0;
  for (const auto& [m, a] : full) maxm = std::max(maxm, l1(m));
  if (radius < 2 * maxm + 1)
    fail("radius-too-small", "need radius >= " + std::to_string(2 * maxm + 1));
  std::vector<std::pair<IVec, AlgebraicNumber>> pts(full.begin(), full.end());
  std::map<IVec, AlgebraicNumber> rhs;
  Residual res;
  for (const auto& [m1, a1] : pts)
    for (const auto& [m2, a2] : pts) {
      AlgebraicNumber a12 = a1 * a2;
      for (const auto& [m3, a3] : pts) {
        if (!rectangle(m1, m2, m3)) continue;
        ++res.contributing_triples;
        IVec m = sub(add(m1, m2), m3);
        rhs[m] += a12 * a3;
      }
    }
  std::set<IVec> where;
  for (const auto& [m, v] : rhs) where.insert(m);
  for (const auto& [m, v] : full) where.insert(m);
  res.points = static_cast<long>(where.size());
  for (const auto& m : where) {
    AlgebraicNumber lhs = 0;
    if (auto it = full.find(m); it != full.end()) lhs = it->second * mpq_class(spatial_power(prof.family, m));
    AlgebraicNumber r = rhs.count(m) ? rhs[m] : AlgebraicNumber(0);
    AlgebraicNumber d = lhs - r;
    if (!d.is_zero()) res.nonzero[m] = d.trimmed();
  }
  return res;
}

// Beam residual written with the original sign-choice sum over m1 + m2 + m3 = m.
inline Residual q_residual_beam_sum_form(const AmplitudeProfile& prof, int radius) {
  const auto full = odd_extension(prof);
  int maxm = 0;
  for (const auto& [m, a] : full) maxm = std::max(maxm, l1(m));
  if (radius < 2 * maxm + 1)
    fail("radius-too-small", "need radius >= " + std::to_string(2 * maxm + 1));
  const mpq_class sgnD = prof.D % 2 ? -1 : 1;
  std::map<IVec, AlgebraicNumber> rhs;
  Residual res;
  for (const auto& [m1, a1] : full)
    for (const auto& [m2, a2] : full)
      for (const auto& [m3, a3] : full) {
        if (dot(add(m1, m3), add(m2, m3)) != 0) continue;
        ++res.contributing_triples;
        rhs[add(add(m1, m2), m3)] += a1 * a2 * a3 * sgnD;
      }
  std::set<IVec> where;
  for (const auto& [m, v] : rhs) where.insert(m);
  for (const auto& [m, v] : full) where.insert(m);
  for (const auto& m : where) {
    AlgebraicNumber lhs = 0;
    if (auto it = full.find(m); it != full.end()) lhs = it->second * mpq_class(spatial_power(prof.family, m));
    AlgebraicNumber d = lhs - (rhs.count(m) ? rhs[m] : AlgebraicNumber(0));
    if (!d.is_zero()) res.nonzero[m] = d.trimmed();
  }
  return res;
}

enum class SignConvention {
  Literal,       // denominator 2^{D+1} - 3^D
  SignCorrected  // denominator 3^D - 2^{D+1}, from the single-orbit reduction
};

struct Inadmissible {
  IVec m{};
  mpq_class radicand;
};

inline long pow_int(long b, int e) {
  long r = 1;
  while (e-- > 0) r *= b;
  return r;
}

inline mpq_class amplitude_c1(int D, long N0) {
  const long t = pow_int(2, D + 1), th = pow_int(3, D);
  return mpq_class(t, t * (N0 - 1) + th);
}

inline long z_factor(int D, long N0) {
  const long t = pow_int(2, D + 1), th = pow_int(3, D);
  return (t - th) * (t * (N0 - 1) + th);
}

inline std::variant<AmplitudeProfile, Inadmissible> candidate_profile(const std::vector<IVec>& support, Family family, int D,
                                                                      SignConvention conv = SignConvention::Literal) {
  if (support.empty()) fail("bad-input", "empty support");
  std::set<IVec> uniq(support.begin(), support.end());
  if (uniq.size() != support.size()) fail("bad-input", "duplicate support modes");
  for (const auto& m : support)
    if (!in_Z1_plus(m, D)) fail("support-not-in-Z1", "mode outside Z^D_{1,+}");
  const long N0 = static_cast<long>(support.size());
  const mpq_class c1 = amplitude_c1(D, N0);
  mpq_class sum = 0;
  for (const auto& m : support) sum += spatial_power(family, m);
  long den = pow_int(2, D + 1) - pow_int(3, D);
  if (conv == SignConvention::SignCorrected) den = -den;
  AmplitudeProfile prof;
  prof.family = family;
  prof.D = D;
  prof.support.assign(uniq.begin(), uniq.end());
  for (const auto& m : prof.support) {
    mpq_class rad = (mpq_class(spatial_power(family, m)) - c1 * sum) / den;
    rad.canonicalize();
    if (sgn(rad) < 0) return Inadmissible{m, rad};
    prof.amplitude[m] = AlgebraicNumber::sqrt(rad);
  }
  return prof;
}

struct JMatrix {
  std::vector<IVec> index;  // rows/columns: Z^D_1 points of the shell
  std::map<std::pair<int, int>, AlgebraicNumber> entries;  // nonzero entries only
  std::vector<std::vector<int>> blocks;

  AlgebraicNumber at(int i, int j) const {
    auto it = entries.find({i, j});
    return it == entries.end() ? AlgebraicNumber(0) : it->second;
  }
  AlgMatrix block(std::size_t b, const mpq_class& scale = 1) const {
    const auto& idx = blocks.at(b);
    AlgMatrix B(idx.size(), std::vector<AlgebraicNumber>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < idx.size(); ++j) B[i][j] = at(idx[i], idx[j]) * scale;
    return B;
  }
  bool symmetric() const {
    for (const auto& [ij, v] : entries)
      if (at(ij.second, ij.first) != v) return false;
    return true;
  }
};

// Linearized operator of the resonant Q equation on Z^D_1 points with |m| <= radius, in the
// form |m|^2 Q_m - 2 sum Q_{m1} a a - 2 sum_{m1 > m2} a a Q_{m3}.
inline JMatrix assemble_J(const AmplitudeProfile& prof, int radius) {
  for (const auto& m : prof.support)
    if (!in_Z1_plus(m, prof.D)) fail("support-not-in-Z1", "support outside Z^D_{1,+}");
  const auto full = odd_extension(prof);
  JMatrix out;
  for (const auto& m : ball(prof.D, radius))
    if (in_Z1(m, prof.D)) out.index.push_back(m);
  std::map<IVec, int> pos;
  for (std::size_t i = 0; i < out.index.size(); ++i) pos[out.index[i]] = static_cast<int>(i);
  const int n = static_cast<int>(out.index.size());
  for (int i = 0; i < n; ++i) out.entries[{i, i}] = mpq_class(spatial_power(prof.family, out.index[i]));
  const mpq_class two = 2;
  for (const auto& [ma, aa] : full)
    for (const auto& [mb, ab] : full) {
      const AlgebraicNumber prod = aa * ab * two;
      for (int c = 0; c < n; ++c) {
        const IVec& mp = out.index[c];
        // Q_{m1} a_{m2} a_{m3}: column m1, row m1 + m2 - m3.
        if (rectangle(mp, ma, mb))
          if (auto it = pos.find(sub(add(mp, ma), mb)); it != pos.end()) out.entries[{it->second, c}] -= prod;
        // a_{m1} a_{m2} Q_{m3} with m1 > m2: column m3, row m1 + m2 - m3.
        if (mb < ma && rectangle(ma, mb, mp))
          if (auto it = pos.find(sub(add(ma, mb), mp)); it != pos.end()) out.entries[{it->second, c}] -= prod;
      }
    }
  for (auto it = out.entries.begin(); it != out.entries.end();) {
    if (it->second.is_zero()) it = out.entries.erase(it);
    else {
      it->second = it->second.trimmed();
      ++it;
    }
  }
  DisjointSets ds(n);
  for (const auto& [ij, v] : out.entries) ds.unite(ij.first, ij.second);
  std::map<std::size_t, std::vector<int>> comp;
  for (int i = 0; i < n; ++i) comp[ds.find(i)].push_back(i);
  for (auto& [r, v] : comp) out.blocks.push_back(v);
  return out;
}

struct SignChoiceReport {
  long triples = 0;
  long identity_failures = 0;   // pattern (+,+,-) versus <m1+m3, m2+m3> = 0
  long forbidden_patterns = 0;  // all-plus or two-minus patterns equal to +|m|^2
  long equivalence_failures = 0;
  long counterexamples() const { return identity_failures + forbidden_patterns + equivalence_failures; }
};

// Brute force over m_i in Z^D_1 (or all of Z^D when restrict_Z1 is false) with |m_i| <= R.
inline SignChoiceReport sign_choice_brute_force(int D, int R, bool restrict_Z1 = true) {
  std::vector<IVec> pts;
  for (const auto& m : ball(D, R))
    if (!restrict_Z1 || in_Z1(m, D)) pts.push_back(m);
  SignChoiceReport rep;
  for (const auto& m1 : pts)
    for (const auto& m2 : pts)
      for (const auto& m3 : pts) {
        ++rep.triples;
        const IVec m = add(add(m1, m2), m3);
        const long q1 = norm2(m1), q2 = norm2(m2), q3 = norm2(m3), q = norm2(m);
        auto equals = [&](int s1, int s2, int s3) { return s1 * q1 + s2 * q2 + s3 * q3 == q; };
        const bool c1 = dot(add(m2, m1), add(m3, m1)) == 0;
        const bool c2 = dot(add(m1, m2), add(m3, m2)) == 0;
        const bool c3 = dot(add(m1, m3), add(m2, m3)) == 0;
        if (equals(1, 1, -1) != c3) ++rep.identity_failures;
        if (equals(1, 1, 1) || equals(1, -1, -1) || equals(-1, 1, -1) || equals(-1, -1, 1)) ++rep.forbidden_patterns;
        bool any = false;
        for (int s = 0; s < 8; ++s) {
          const int s1 = s & 1 ? -1 : 1, s2 = s & 2 ? -1 : 1, s3 = s & 4 ? -1 : 1;
          any = any || equals(s1, s2, s3) || equals(-s1, -s2, -s3);
        }
        if (any != (c1 || c2 || c3)) ++rep.equivalence_failures;
      }
  return rep;
}

// Closed-form single-mode amplitude: |q0| for NLS, q0 for NLW.
inline AlgebraicNumber single_mode_q0(Family f, int D) {
  if (f == Family::NLB) fail("bad-family", "single-mode amplitude is for NLS and NLW");
  const int e = f == Family::NLS ? D : D + 1;
  mpq_class q = 1;
  for (int i = 0; i < e; ++i) q *= mpq_class(4, 3);
  return AlgebraicNumber::sqrt(q);
}

// Self-coupling of the Dirichlet fundamental mode by brute-force cubic convolution, exact.
// NLS: e^{it} prod sin x_i with u u conj(u); NLW: cos t prod sin x_i with v^3.
inline mpq_class single_mode_coupling(Family f, int D) {
  struct P {
    int n;
    IVec m;
    mpq_class c;  // coefficient normalized by the sin / cos basis factors
  };
  std::vector<P> pts;
  const std::vector<int> ns = f == Family::NLS ? std::vector<int>{1} : std::vector<int>{1, -1};
  for (int n : ns)
    for (unsigned s = 0; s < (1u << D); ++s) {
      P p{n, {}, 1};
      for (int i = 0; i < D; ++i) {
        p.m[i] = s >> i & 1u ? -1 : 1;
        if (s >> i & 1u) p.c = -p.c;
      }
      pts.push_back(p);
    }
  // sin x = (e^{ix} - e^{-ix}) / (2i). With u_nu = par / (2i)^D, a product of three coefficients
  // divided by the target coefficient leaves par1 par2 par3 / (2i)^{2D} = par1 par2 par3 (-1/4)^D
  // (the conjugate factor in u u conj(u) contributes conj(1/(2i)^D) = (-1)^D/(2i)^D).
  mpq_class total = 0;
  const IVec target = [&] {
    IVec t{};
    for (int i = 0; i < D; ++i) t[i] = 1;
    return t;
  }();
  mpq_class quarter = 1;
  for (int i = 0; i < D; ++i) quarter *= mpq_class(-1, 4);
  for (const auto& a : pts)
    for (const auto& b : pts)
      for (const auto& c : pts) {
        if (f == Family::NLS) {
          if (a.n + b.n - c.n != 1 || sub(add(a.m, b.m), c.m) != target) continue;
          mpq_class conj_sign = D % 2 ? -1 : 1;
          total += a.c * b.c * c.c * quarter * conj_sign;
        } else {
          if (a.n + b.n + c.n != 1 || add(add(a.m, b.m), c.m) != target) continue;
          total += a.c * b.c * c.c * quarter * mpq_class(1, 4);
        }
      }
  return total;
}

// Same coupling by pointwise products on a uniform grid and projection (numerical check).
inline double single_mode_coupling_grid(Family f, int D, int points = 16) {
  const double pi = std::acos(-1.0);
  const int dims = f == Family::NLS ? D : D + 1;
  long total = 1;
  for (int i = 0; i < dims; ++i) total *= points;
  double num = 0, den = 0;
  std::vector<int> idx(dims, 0);
  for (long k = 0; k < total; ++k) {
    long r = k;
    double phi = 1;
    for (int i = 0; i < dims; ++i) {
      idx[i] = r % points;
      r /= points;
      double x = 2 * pi * idx[i] / points;
      phi *= (f == Family::NLW && i == D) ? std::cos(x) : std::sin(x);
    }
    num += phi * phi * phi * phi;
    den += phi * phi;
  }
  return num / den;
}

struct SupportResult {
  std::vector<IVec> support;
  SignConvention convention;
  bool admissible = false;
  bool residual_zero = false;
  long residual_nonzero = 0;
  std::optional<Inadmissible> reason;
  std::optional<AmplitudeProfile> profile;
};

// Scans subsets of Z^D_{1,+} within the radius, candidate by candidate; the exact residual decides.
inline std::vector<SupportResult> search_supports(Family family, int D, int radius, int max_N0, SignConvention conv,
                                                  int residual_radius = -1) {
  const auto modes = Z1_plus_modes(D, radius);
  std::vector<SupportResult> out;
  std::vector<IVec> cur;
  std::function<void(std::size_t)> rec = [&](std::size_t start) {
    if (!cur.empty()) {
      SupportResult r;
      r.support = cur;
      r.convention = conv;
      auto cand = candidate_profile(cur, family, D, conv);
      if (auto* bad = std::get_if<Inadmissible>(&cand)) {
        r.reason = *bad;
      } else {
        r.admissible = true;
        auto& prof = std::get<AmplitudeProfile>(cand);
        int maxm = 0;
        for (const auto& m : prof.support) maxm = std::max(maxm, l1(m));
        int rr = std::max(residual_radius, 2 * maxm + 1);
        auto res = q_residual(prof, rr);
        r.residual_zero = res.zero();
        r.residual_nonzero = static_cast<long>(res.nonzero.size());
        r.profile = prof;
      }
      out.push_back(std::move(r));
    }
    if (static_cast<int>(cur.size()) == max_N0) return;
    for (std::size_t i = start; i < modes.size(); ++i) {
      cur.push_back(modes[i]);
      rec(i + 1);
      cur.pop_back();
    }
  };
  rec(0);
  return out;
}

}  // namespace lsrt
