#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <utility>
#include <vector>

#include "lsrt/lattice.hpp"

namespace lsrt {

using cplx = std::complex<double>;

// All points of Z^{1+D} with |nu| <= radius (no Dirichlet reduction).
inline std::vector<Mode> full_ball(int D, int radius) {
  std::vector<Mode> out;
  Mode cur;
  std::function<void(int, int)> rec = [&](int i, int left) {
    if (i == D) {
      out.push_back(cur);
      return;
    }
    for (int v = -left; v <= left; ++v) {
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

// Complex coefficients u_nu (the sigma = + component) on the l1 ball of radius R, stored over the enclosing cube.
class Field {
 public:
  Field() = default;
  Field(int D, int R) : D_(D), R_(R), side_(2 * R + 1) {
    if (D < 1 || D > kMaxDim || R < 0) fail("invalid-field", "bad dimension or radius");
    std::size_t n = 1;
    for (int i = 0; i <= D; ++i) n *= side_;
    if (n > (std::size_t{1} << 27)) fail("invalid-field", "cube too large");
    v_.assign(n, cplx{});
  }

  int D() const { return D_; }
  int radius() const { return R_; }
  bool contains(const Mode& nu) const { return nu.size() <= R_; }

  cplx get(const Mode& nu) const { return contains(nu) ? v_[index(nu)] : cplx{}; }
  cplx get_sigma(const Mode& nu, int sigma) const { return sigma > 0 ? get(nu) : std::conj(get(nu)); }
  void set(const Mode& nu, cplx z) {
    if (!contains(nu)) fail("outside-field", nu.str(D_));
    v_[index(nu)] = z;
  }
  void add(const Mode& nu, cplx z) {
    if (!contains(nu)) fail("outside-field", nu.str(D_));
    v_[index(nu)] += z;
  }

  std::vector<std::pair<Mode, cplx>> nonzeros() const {
    std::vector<std::pair<Mode, cplx>> out;
    for (std::size_t i = 0; i < v_.size(); ++i)
      if (v_[i] != cplx{}) {
        Mode nu = mode(i);
        if (nu.size() <= R_) out.emplace_back(nu, v_[i]);
      }
    return out;
  }
  bool is_zero() const {
    for (const auto& z : v_)
      if (z != cplx{}) return false;
    return true;
  }

  // Coefficients of the conjugate function: [conj u]_nu = conj(u_{-nu}).
  Field conj_reflect() const {
    Field out(D_, R_);
    for (const auto& [nu, z] : nonzeros()) out.set(-nu, std::conj(z));
    return out;
  }
  Field truncated(int R) const {
    Field out(D_, R);
    for (const auto& [nu, z] : nonzeros())
      if (nu.size() <= R) out.set(nu, z);
    return out;
  }
  Field& operator+=(const Field& o) {
    for (const auto& [nu, z] : o.nonzeros())
      if (contains(nu)) add(nu, z);
    return *this;
  }
  Field& operator-=(const Field& o) {
    for (const auto& [nu, z] : o.nonzeros())
      if (contains(nu)) add(nu, -z);
    return *this;
  }
  Field operator+(const Field& o) const {
    Field out = *this;
    out += o;
    return out;
  }
  Field& operator*=(cplx s) {
    for (auto& z : v_) z *= s;
    return *this;
  }
  Field operator*(cplx s) const {
    Field out = *this;
    out *= s;
    return out;
  }
  double sup() const {
    double m = 0;
    for (const auto& [nu, z] : nonzeros()) m = std::max(m, std::abs(z));
    return m;
  }
  double sup_diff(const Field& o) const {
    double m = 0;
    const int R = std::max(R_, o.R_);
    for (const auto& nu : full_ball(D_, R)) m = std::max(m, std::abs(get(nu) - o.get(nu)));
    return m;
  }

 private:
  std::size_t index(const Mode& nu) const {
    std::size_t k = static_cast<std::size_t>(nu.n + R_);
    for (int i = 0; i < D_; ++i) k = k * side_ + static_cast<std::size_t>(nu.m[i] + R_);
    return k;
  }
  Mode mode(std::size_t k) const {
    Mode nu;
    for (int i = D_ - 1; i >= 0; --i) {
      nu.m[i] = static_cast<int>(k % side_) - R_;
      k /= side_;
    }
    nu.n = static_cast<int>(k) - R_;
    return nu;
  }

  int D_ = 1, R_ = 0, side_ = 1;
  std::vector<cplx> v_;
};

// Discrete convolution [ab]_nu = sum a_{nu1} b_{nu - nu1}, kept on |nu| <= Rout.
inline Field convolve(const Field& a, const Field& b, int Rout) {
  if (a.D() != b.D()) fail("invalid-field", "dimension mismatch");
  Field out(a.D(), Rout);
  const auto na = a.nonzeros(), nb = b.nonzeros();
  for (const auto& [x, za] : na)
    for (const auto& [y, zb] : nb) {
      Mode s = x + y;
      if (s.size() <= Rout) out.add(s, za * zb);
    }
  return out;
}

inline void check_series_terms(const EquationSpec& spec) {
  for (const auto& t : spec.terms)
    for (int v : t.m)
      if (v != 0) fail("unsupported-term", "x-dependent coefficients are not supported by the series machinery");
}

// Power series in eta with Field coefficients; a missing or zero entry means a vanishing order.
using FieldSeries = std::vector<Field>;

inline bool order_zero(const FieldSeries& s, int k) { return k < 0 || k >= static_cast<int>(s.size()) || s[k].is_zero(); }

// Order-k coefficient of the product of the given series; factor radius Ru, intermediate radii sized for Rout.
inline Field series_product_order(const std::vector<const FieldSeries*>& factors, int k, int D, int Ru, int Rout) {
  const int p = static_cast<int>(factors.size());
  std::vector<Field> acc(k + 1);
  std::vector<bool> live(k + 1, false);
  for (int j = 0; j <= k; ++j)
    if (!order_zero(*factors[0], j)) {
      acc[j] = (*factors[0])[j];
      live[j] = true;
    }
  for (int t = 1; t < p; ++t) {
    const int R = std::min((t + 1) * Ru, Rout + (p - t - 1) * Ru);
    const int need = t == p - 1 ? k : -1;
    std::vector<Field> nxt(k + 1);
    std::vector<bool> nlive(k + 1, false);
    for (int j = 0; j <= k; ++j) {
      if (need >= 0 && j != need) continue;
      for (int i = 0; i <= j; ++i) {
        if (!live[i] || order_zero(*factors[t], j - i)) continue;
        Field c = convolve(acc[i], (*factors[t])[j - i], R);
        if (!nlive[j]) {
          nxt[j] = std::move(c);
          nlive[j] = true;
        } else {
          nxt[j] += c;
        }
      }
    }
    acc = std::move(nxt);
    live = nlive;
  }
  if (!live[k]) return Field(D, Rout);
  return acc[k].truncated(Rout);
}

// Order-k coefficient of f(x, u, conj u, eta) for u = sum_j eta^j u^(j).
inline Field nonlinearity_order(const EquationSpec& spec, const FieldSeries& u, int k, int Ru, int Rout) {
  check_series_terms(spec);
  FieldSeries ubar;
  for (const auto& f : u) ubar.push_back(f.conj_reflect());
  Field out(spec.D, Rout);
  for (const auto& t : spec.terms) {
    const int kk = k - (t.r + t.s - spec.N - 1);
    if (kk < 0 || t.a == cplx{}) continue;
    std::vector<const FieldSeries*> fac;
    for (int i = 0; i < t.r; ++i) fac.push_back(&u);
    for (int i = 0; i < t.s; ++i) fac.push_back(&ubar);
    if (fac.empty()) continue;
    out += series_product_order(fac, kk, spec.D, Ru, Rout) * t.a;
  }
  return out;
}

// f(u, eta) for a single field.
inline Field nonlinearity(const EquationSpec& spec, const Field& u, double eta, int Rout) {
  check_series_terms(spec);
  FieldSeries U{u}, Ubar{u.conj_reflect()};
  Field out(spec.D, Rout);
  for (const auto& t : spec.terms) {
    if (t.a == cplx{}) continue;
    std::vector<const FieldSeries*> fac;
    for (int i = 0; i < t.r; ++i) fac.push_back(&U);
    for (int i = 0; i < t.s; ++i) fac.push_back(&Ubar);
    const double w = std::pow(eta, t.r + t.s - spec.N - 1);
    out += series_product_order(fac, 0, spec.D, u.radius(), Rout) * (t.a * w);
  }
  return out;
}

// Kernels of the linearization: df[v] = K1 * v + K2 * conj(v), with K1 = sum r a u^{r-1} ubar^s, K2 = sum s a u^r ubar^{s-1}.
inline std::pair<Field, Field> linearization_kernels(const EquationSpec& spec, const Field& u, double eta, int Rout) {
  check_series_terms(spec);
  FieldSeries U{u}, Ubar{u.conj_reflect()};
  Field K1(spec.D, Rout), K2(spec.D, Rout);
  for (const auto& t : spec.terms) {
    if (t.a == cplx{}) continue;
    const double w = std::pow(eta, t.r + t.s - spec.N - 1);
    auto build = [&](int r, int s) {
      std::vector<const FieldSeries*> fac;
      for (int i = 0; i < r; ++i) fac.push_back(&U);
      for (int i = 0; i < s; ++i) fac.push_back(&Ubar);
      if (fac.empty()) {
        Field one(spec.D, Rout);
        one.set(Mode{}, 1.0);
        return one;
      }
      return series_product_order(fac, 0, spec.D, u.radius(), Rout);
    };
    if (t.r > 0) K1 += build(t.r - 1, t.s) * (t.a * w * static_cast<double>(t.r));
    if (t.s > 0) K2 += build(t.r, t.s - 1) * (t.a * w * static_cast<double>(t.s));
  }
  return {K1, K2};
}

}  // namespace lsrt
