#pragma once

#include <gmpxx.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lsrt/common.hpp"

namespace lsrt {

constexpr int kMaxDim = 3;

using IVec = std::array<int, kMaxDim>;

// Lattice point nu = (n, m); unused trailing components of m are zero.
struct Mode {
  int n = 0;
  IVec m{};

  int size() const {
    int s = std::abs(n);
    for (int x : m) s += std::abs(x);
    return s;
  }
  long m2() const {
    long s = 0;
    for (int x : m) s += static_cast<long>(x) * x;
    return s;
  }
  Mode operator+(const Mode& o) const {
    Mode r;
    r.n = n + o.n;
    for (int i = 0; i < kMaxDim; ++i) r.m[i] = m[i] + o.m[i];
    return r;
  }
  Mode operator-(const Mode& o) const {
    Mode r;
    r.n = n - o.n;
    for (int i = 0; i < kMaxDim; ++i) r.m[i] = m[i] - o.m[i];
    return r;
  }
  Mode operator-() const { return Mode{} - *this; }
  Mode scaled(int s) const {
    Mode r;
    r.n = s * n;
    for (int i = 0; i < kMaxDim; ++i) r.m[i] = s * m[i];
    return r;
  }
  auto operator<=>(const Mode&) const = default;

  // 12 bits per component, enough for |component| < 2048.
  std::uint64_t key() const {
    auto enc = [](int v) { return static_cast<std::uint64_t>(v + 2048) & 0xFFFu; };
    return enc(n) << 36 | enc(m[0]) << 24 | enc(m[1]) << 12 | enc(m[2]);
  }
  static Mode from_key(std::uint64_t k) {
    auto dec = [](std::uint64_t v) { return static_cast<int>(v & 0xFFFu) - 2048; };
    Mode r;
    r.n = dec(k >> 36);
    r.m = {dec(k >> 24), dec(k >> 12), dec(k)};
    return r;
  }

  std::string str(int D) const {
    std::string s = "(" + std::to_string(n) + ",(";
    for (int i = 0; i < D; ++i) s += (i ? "," : "") + std::to_string(m[i]);
    return s + "))";
  }
};

inline long dot(const IVec& a, const IVec& b) {
  long s = 0;
  for (int i = 0; i < kMaxDim; ++i) s += static_cast<long>(a[i]) * b[i];
  return s;
}
inline IVec add(const IVec& a, const IVec& b) {
  IVec r;
  for (int i = 0; i < kMaxDim; ++i) r[i] = a[i] + b[i];
  return r;
}
inline IVec sub(const IVec& a, const IVec& b) {
  IVec r;
  for (int i = 0; i < kMaxDim; ++i) r[i] = a[i] - b[i];
  return r;
}
inline int l1(const IVec& a) {
  int s = 0;
  for (int x : a) s += std::abs(x);
  return s;
}
inline long norm2(const IVec& a) { return dot(a, a); }

enum class Family { NLS, NLW, NLB };
enum class Boundary { Dirichlet, Periodic };
enum class SetLabel { Q, O, R };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::NLS: return "NLS";
    case Family::NLW: return "NLW";
    case Family::NLB: return "NLB";
  }
  return "?";
}
inline const char* to_string(SetLabel s) {
  switch (s) {
    case SetLabel::Q: return "Q";
    case SetLabel::O: return "O";
    case SetLabel::R: return "R";
  }
  return "?";
}

// One monomial a * u^r * conj(u)^s * e^{i m.x} of the nonlinearity.
struct Term {
  int r = 0;
  int s = 0;
  IVec m{};
  std::complex<double> a{0.0, 0.0};
};

struct EquationSpec {
  Family family = Family::NLS;
  int D = 2;
  double mu = 0.3;
  std::optional<mpq_class> mu_exact;  // set when mu is rational
  Boundary boundary = Boundary::Dirichlet;
  bool resonant = false;  // omega_0 = 1 with mu = 0
  int N = 2;
  std::vector<Term> terms;
  double eps0 = 1e-2;

  void validate() const {
    if (D < 1 || D > kMaxDim) fail("invalid-spec", "D out of range");
    if (N < 1) fail("invalid-spec", "N must be positive");
    if (mu < 0) fail("invalid-spec", "mu must be nonnegative");
    if (!(eps0 > 0)) fail("invalid-spec", "eps0 must be positive");
    if (family == Family::NLB && mu != 0) fail("invalid-spec", "beam family is the resonant mu = 0 case");
    for (const auto& t : terms)
      if (t.r < 0 || t.s < 0 || t.r + t.s < N + 1)
        fail("invalid-spec", "terms must have degree at least N+1");
  }

  bool is_resonant() const { return resonant || family == Family::NLB; }

  // |m|^2 or |m|^4 depending on the family.
  long spatial(const IVec& m) const {
    long q = norm2(m);
    return family == Family::NLB ? q * q : q;
  }

  double omega0() const { return is_resonant() ? 1.0 : D + mu; }
};

// Cubic |u|^2 u, i.e. r=2, s=1 with unit coefficient.
inline EquationSpec cubic_spec(Family f, int D, double mu, Boundary b = Boundary::Dirichlet) {
  EquationSpec s;
  s.family = f;
  s.D = D;
  s.mu = mu;
  s.boundary = b;
  s.N = 2;
  if (f == Family::NLS) s.terms = {Term{2, 1, {}, 1.0}};
  else s.terms = {Term{3, 0, {}, 1.0}};
  return s;
}

inline void check_window(const EquationSpec& spec, double eps) {
  if (!(eps >= 0.0) || eps > spec.eps0 * (1 + 1e-12))
    fail("eps-out-of-window", "eps = " + std::to_string(eps));
}

// delta_nu(eps); affine in eps for all three families.
inline double eigenvalue(const EquationSpec& spec, const Mode& nu, double eps) {
  check_window(spec, eps);
  const double m2 = static_cast<double>(nu.m2());
  const double n = nu.n;
  switch (spec.family) {
    case Family::NLS:
      if (spec.is_resonant()) return -(1.0 - eps) * n + m2;
      return -(spec.D + spec.mu - eps) * n + m2 + spec.mu;
    case Family::NLW:
      if (spec.is_resonant()) return -(1.0 - eps) * n * n + m2;
      return -(spec.D + spec.mu - eps) * n * n + m2 + spec.mu;
    case Family::NLB:
      return -(1.0 - eps) * n * n + m2 * m2;
  }
  fail("unknown-family", "");
}

inline double eigenvalue_slope(const EquationSpec& spec, const Mode& nu) {
  return spec.family == Family::NLS ? static_cast<double>(nu.n) : static_cast<double>(nu.n) * nu.n;
}

// delta_nu(0) in exact rational arithmetic when mu is rational.
inline std::optional<mpq_class> eigenvalue0_exact(const EquationSpec& spec, const Mode& nu) {
  const mpz_class m2 = nu.m2();
  const mpz_class n = nu.n;
  if (spec.is_resonant()) {
    if (spec.family == Family::NLS) return mpq_class(m2 - n);
    if (spec.family == Family::NLW) return mpq_class(m2 - n * n);
    return mpq_class(m2 * m2 - n * n);
  }
  if (!spec.mu_exact) return std::nullopt;
  const mpq_class mu = *spec.mu_exact;
  if (spec.family == Family::NLS) return mpq_class(-(spec.D + mu) * n + m2 + mu);
  return mpq_class(-(spec.D + mu) * n * n + m2 + mu);
}

inline bool in_kernel(const EquationSpec& spec, const Mode& nu, double tol = 1e-12) {
  if (auto e = eigenvalue0_exact(spec, nu)) return sgn(*e) == 0;
  return std::abs(eigenvalue(spec, nu, 0.0)) < tol;
}

inline std::vector<double> uniform_grid(double eps0, int points) {
  std::vector<double> g(points);
  for (int i = 0; i < points; ++i) g[i] = points == 1 ? 0.0 : eps0 * i / (points - 1);
  return g;
}

struct Classification {
  SetLabel label = SetLabel::R;
  bool boundary_ambiguous = false;
};

inline Classification classify(const EquationSpec& spec, const Mode& nu, const std::vector<double>& grid,
                               double resolution = 1e-9) {
  if (grid.empty() || grid.front() != 0.0) fail("bad-grid", "grid must start at 0");
  Classification c;
  if (in_kernel(spec, nu)) {
    c.label = SetLabel::Q;
    return c;
  }
  double closest = std::numeric_limits<double>::infinity();
  bool small = false;
  for (double e : grid) {
    double d = std::abs(eigenvalue(spec, nu, e));
    small = small || d < 0.5;
    closest = std::min(closest, std::abs(d - 0.5));
  }
  // delta is affine in eps, so the window minimum sits at an endpoint or a zero crossing.
  const double a = eigenvalue(spec, nu, 0.0);
  const double b = eigenvalue(spec, nu, grid.back());
  const double mn = (a < 0) != (b < 0) ? 0.0 : std::min(std::abs(a), std::abs(b));
  small = small || mn < 0.5;
  c.label = small ? SetLabel::O : SetLabel::R;
  c.boundary_ambiguous = closest < resolution;
  return c;
}

inline int min_m(Boundary b, int bound) { return b == Boundary::Dirichlet ? 0 : -bound; }

// All canonical points with |nu| <= radius, ordered lexicographically by (n, m).
inline std::vector<Mode> enumerate_shell(const EquationSpec& spec, int radius) {
  std::vector<Mode> out;
  if (radius < 0) return out;
  Mode cur;
  std::function<void(int, int)> rec = [&](int i, int left) {
    if (i == spec.D) {
      out.push_back(cur);
      return;
    }
    for (int v = min_m(spec.boundary, left); v <= left; ++v) {
      cur.m[i] = v;
      rec(i + 1, left - std::abs(v));
    }
    cur.m[i] = 0;
  };
  for (int n = -radius; n <= radius; ++n) {
    cur.n = n;
    rec(0, radius - std::abs(n));
  }
  return out;
}

// Images of nu under the sign flips of the space components, with the parity sign prod s_i.
struct OrbitPoint {
  Mode nu;
  int parity;
};

inline std::vector<OrbitPoint> dirichlet_orbit(const Mode& nu, int D) {
  std::vector<OrbitPoint> out;
  for (unsigned f = 0; f < (1u << D); ++f) {
    Mode img = nu;
    int par = 1;
    bool dup = false;
    for (int i = 0; i < D; ++i)
      if (f >> i & 1u) {
        if (nu.m[i] == 0) dup = true;
        img.m[i] = -img.m[i];
        par = -par;
      }
    if (!dup) out.push_back({img, par});
  }
  return out;
}

// Canonical representative and the sign u_nu = sign * u_canonical.
inline std::pair<Mode, int> canonicalize(const Mode& nu, int D) {
  Mode c = nu;
  int s = 1;
  for (int i = 0; i < D; ++i) {
    if (c.m[i] == 0) s = 0;
    else if (c.m[i] < 0) {
      c.m[i] = -c.m[i];
      s = -s;
    }
  }
  return {c, s};
}

inline bool is_mu_rational_resonant(const EquationSpec& spec, const Mode& nu) {
  // Kernel modes other than the bifurcating frequency.
  if (spec.is_resonant() || !in_kernel(spec, nu)) return false;
  return spec.family == Family::NLS ? nu.n != 1 : std::abs(nu.n) != 1;
}

// Value of [a0; a1, a2, ...] via backward recurrence, and its convergents.
struct ContinuedFraction {
  double value;
  std::vector<mpq_class> convergents;
};

inline ContinuedFraction continued_fraction(const std::vector<long>& quotients) {
  if (quotients.empty()) fail("bad-input", "empty continued fraction");
  ContinuedFraction cf;
  mpz_class h1 = 1, h2 = 0, k1 = 0, k2 = 1;
  for (std::size_t i = 0; i < quotients.size(); ++i) {
    const long a = quotients[i];
    if (i > 0 && a <= 0) fail("bad-input", "partial quotients must be positive");
    mpz_class h = a * h1 + h2, k = a * k1 + k2;
    h2 = h1;
    h1 = h;
    k2 = k1;
    k1 = k;
    cf.convergents.emplace_back(h, k);
    cf.convergents.back().canonicalize();
  }
  cf.value = cf.convergents.back().get_d();
  return cf;
}

// mu = [0; 3, 4, 4, 4, ...] = (sqrt(5) - 1) / 4.
inline double golden_mu() { return (std::sqrt(5.0) - 1.0) / 4.0; }

struct SpectrumReport {
  double gamma0 = 0, tau0 = 0;
  double c0 = 0, c1 = 0, c2 = 0, c3 = 0;
  long small_pairs = 0;
  bool kernel_ok = true, pairs_ok = true;
  std::optional<Mode> witness;
  std::optional<std::pair<Mode, Mode>> witness_pair;
  std::string message;
};

// Interval of window eps where |delta| < 1/2, empty when lo > hi.
inline std::pair<double, double> small_interval(const EquationSpec& spec, const Mode& nu, double eps0) {
  const double a = eigenvalue(spec, nu, 0.0);
  const double s = eigenvalue_slope(spec, nu);
  double lo = 0, hi = eps0;
  if (s == 0) {
    if (std::abs(a) >= 0.5) return {1, 0};
    return {lo, hi};
  }
  double e1 = (-0.5 - a) / s, e2 = (0.5 - a) / s;
  if (e1 > e2) std::swap(e1, e2);
  lo = std::max(lo, e1);
  hi = std::min(hi, e2);
  return {lo, hi};
}

inline bool interval_has_grid_point(double lo, double hi, const std::vector<double>& grid) {
  if (lo > hi) return false;
  auto it = std::lower_bound(grid.begin(), grid.end(), lo);
  return it != grid.end() && *it < hi + 1e-15;
}

inline SpectrumReport validate_spectrum(const EquationSpec& spec, int radius, const std::vector<double>& grid) {
  spec.validate();
  SpectrumReport rep;
  auto shell = enumerate_shell(spec, radius);
  rep.c0 = spec.family == Family::NLS ? 1.0 : 2.0;
  // Fit gamma0 for the smallest tau0 on a grid giving gamma0 >= 1e-2.
  std::vector<double> taus;
  for (double t = 0; t <= 6.0 + 1e-9; t += 0.25) taus.push_back(t);
  std::vector<double> gam(taus.size(), std::numeric_limits<double>::infinity());
  double c1 = std::numeric_limits<double>::infinity(), c2 = 0, c3 = 0;
  std::vector<Mode> small;
  const double eps0 = grid.back();
  for (const auto& nu : shell) {
    if (nu.size() == 0) continue;
    if (is_mu_rational_resonant(spec, nu)) {
      rep.kernel_ok = false;
      if (!rep.witness) rep.witness = nu;
      continue;
    }
    if (!in_kernel(spec, nu)) {
      const double d0 = std::abs(eigenvalue(spec, nu, 0.0));
      for (std::size_t i = 0; i < taus.size(); ++i) gam[i] = std::min(gam[i], d0 * std::pow(nu.size(), taus[i]));
    }
    const double s = std::abs(eigenvalue_slope(spec, nu));
    const double sz = nu.size();
    c2 = std::max(c2, s / std::pow(sz, rep.c0));
    // d/dnu of the slope: 1 for NLS, 2|n| for the quadratic families.
    const double dd = spec.family == Family::NLS ? 1.0 : 2.0 * std::abs(nu.n);
    auto iv = small_interval(spec, nu, eps0);
    if (iv.first <= iv.second) {
      c1 = std::min(c1, s / std::pow(sz, rep.c0));
      c3 = std::max(c3, dd / std::pow(sz, rep.c0 - 1));
      if (!in_kernel(spec, nu)) small.push_back(nu);
    }
  }
  std::size_t pick = taus.size() - 1;
  for (std::size_t i = 0; i < taus.size(); ++i)
    if (gam[i] >= 1e-2) {
      pick = i;
      break;
    }
  rep.tau0 = taus[pick];
  rep.gamma0 = gam[pick];
  rep.c1 = std::isfinite(c1) ? c1 : 0.0;
  rep.c2 = c2;
  rep.c3 = c3;
  // Pairs small at a common grid point must be closer to each other than their sum.
  std::vector<std::pair<double, double>> ivs;
  for (const auto& nu : small) ivs.push_back(small_interval(spec, nu, eps0));
  for (std::size_t i = 0; i < small.size(); ++i)
    for (std::size_t j = i + 1; j < small.size(); ++j) {
      double lo = std::max(ivs[i].first, ivs[j].first), hi = std::min(ivs[i].second, ivs[j].second);
      if (!interval_has_grid_point(lo, hi, grid)) continue;
      ++rep.small_pairs;
      if ((small[i] - small[j]).size() > (small[i] + small[j]).size()) {
        rep.pairs_ok = false;
        if (!rep.witness_pair) rep.witness_pair = std::make_pair(small[i], small[j]);
      }
    }
  if (!rep.kernel_ok) rep.message = "hypothesis-violated: kernel mode " + rep.witness->str(spec.D) + " off the bifurcating frequency";
  else if (!rep.pairs_ok) rep.message = "hypothesis-violated: small pair closer than its sum";
  return rep;
}

}  // namespace lsrt
