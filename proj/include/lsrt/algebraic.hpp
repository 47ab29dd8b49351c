#pragma once

#include <gmpxx.h>

#include <algorithm>
#include <cmath>
#include <iterator>
#include <cstdint>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_dec_float.hpp>

#include "lsrt/common.hpp"

namespace lsrt {

constexpr std::size_t kMaxPrimes = 8;

inline bool is_prime(long p) {
  if (p < 2) return false;
  for (long d = 2; d * d <= p; ++d)
    if (p % d == 0) return false;
  return true;
}

// Element of Q[sqrt(p_1),...,sqrt(p_k)] stored densely over the 2^k subset basis.
// The coefficient at bitmask I multiplies prod_{i in I} sqrt(p_i).
template <class Real>
Real real_sqrt(const Real& x) {
  using std::sqrt;
  return sqrt(x);
}

class AlgebraicNumber {
 public:
  AlgebraicNumber() : c_(1) {}
  AlgebraicNumber(long v) : c_(1, mpq_class(v)) {}
  AlgebraicNumber(const mpq_class& q) : c_(1, q) {}

  AlgebraicNumber(std::vector<long> primes, std::vector<mpq_class> coeffs)
      : p_(std::move(primes)), c_(std::move(coeffs)) {
    if (p_.size() > kMaxPrimes) fail("prime-cap-exceeded", "too many primes");
    if (c_.size() != (std::size_t{1} << p_.size())) fail("bad-shape", "coefficient count must be 2^k");
    if (!std::is_sorted(p_.begin(), p_.end()) ||
        std::adjacent_find(p_.begin(), p_.end()) != p_.end())
      fail("bad-primes", "primes must be sorted and distinct");
    for (long p : p_)
      if (!is_prime(p)) fail("bad-primes", std::to_string(p) + " is not prime");
  }

  // sqrt(q) for rational q >= 0, written as s * sqrt(squarefree).
  static AlgebraicNumber sqrt(const mpq_class& q) {
    if (sgn(q) < 0) fail("negative-radicand", q.get_str());
    if (sgn(q) == 0) return AlgebraicNumber();
    mpz_class num = q.get_num() * q.get_den();
    mpz_class outside = 1;
    std::vector<long> primes;
    mpz_class rest = num;
    for (long d = 2; mpz_class(d) * d <= rest; ++d) {
      int e = 0;
      while (mpz_divisible_ui_p(rest.get_mpz_t(), d)) {
        rest /= d;
        ++e;
      }
      for (int i = 0; i < e / 2; ++i) outside *= d;
      if (e % 2) primes.push_back(d);
    }
    if (rest > 1) {
      if (!rest.fits_slong_p()) fail("factor-overflow", "radicand too large");
      primes.push_back(rest.get_si());
      std::sort(primes.begin(), primes.end());
    }
    if (primes.size() > kMaxPrimes) fail("prime-cap-exceeded", "radicand has too many primes");
    std::vector<mpq_class> c(std::size_t{1} << primes.size());
    c.back() = mpq_class(outside) / q.get_den();
    c.back().canonicalize();
    return AlgebraicNumber(primes, c);
  }

  static AlgebraicNumber sqrt_prime(long p) {
    return AlgebraicNumber({p}, {mpq_class(0), mpq_class(1)});
  }

  const std::vector<long>& primes() const { return p_; }
  const std::vector<mpq_class>& coeffs() const { return c_; }
  std::size_t k() const { return p_.size(); }

  const mpq_class& coeff(unsigned mask) const { return c_.at(mask); }

  bool is_zero() const {
    return std::all_of(c_.begin(), c_.end(), [](const mpq_class& x) { return sgn(x) == 0; });
  }
  bool is_rational() const {
    for (std::size_t i = 1; i < c_.size(); ++i)
      if (sgn(c_[i]) != 0) return false;
    return true;
  }
  bool is_integral_rational() const { return is_rational() && c_[0].get_den() == 1; }
  mpq_class rational_part() const { return c_[0]; }

  // Re-express over a superset prime list.
  AlgebraicNumber promoted(const std::vector<long>& primes) const {
    if (primes == p_) return *this;
    std::vector<int> where(p_.size(), -1);
    for (std::size_t i = 0; i < p_.size(); ++i) {
      auto it = std::find(primes.begin(), primes.end(), p_[i]);
      if (it == primes.end()) fail("promotion", "prime list is not a superset");
      where[i] = static_cast<int>(it - primes.begin());
    }
    std::vector<mpq_class> c(std::size_t{1} << primes.size());
    for (unsigned I = 0; I < c_.size(); ++I) {
      if (sgn(c_[I]) == 0) continue;
      unsigned J = 0;
      for (std::size_t i = 0; i < p_.size(); ++i)
        if (I >> i & 1u) J |= 1u << where[i];
      c[J] = c_[I];
    }
    return AlgebraicNumber(primes, std::move(c));
  }

  static std::vector<long> merge(const std::vector<long>& a, const std::vector<long>& b) {
    std::vector<long> out;
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
  }

  // Drop primes whose basis elements all carry zero coefficients.
  AlgebraicNumber trimmed() const {
    unsigned used = 0;
    for (unsigned I = 0; I < c_.size(); ++I)
      if (sgn(c_[I]) != 0) used |= I;
    if (used == (1u << p_.size()) - 1u) return *this;
    std::vector<long> primes;
    std::vector<int> bit(p_.size(), -1);
    for (std::size_t i = 0; i < p_.size(); ++i)
      if (used >> i & 1u) {
        bit[i] = static_cast<int>(primes.size());
        primes.push_back(p_[i]);
      }
    std::vector<mpq_class> c(std::size_t{1} << primes.size());
    for (unsigned I = 0; I < c_.size(); ++I) {
      if (sgn(c_[I]) == 0) continue;
      unsigned J = 0;
      for (std::size_t i = 0; i < p_.size(); ++i)
        if (I >> i & 1u) J |= 1u << bit[i];
      c[J] = c_[I];
    }
    AlgebraicNumber r;
    r.p_ = std::move(primes);
    r.c_ = std::move(c);
    return r;
  }

  AlgebraicNumber operator-() const {
    AlgebraicNumber r = *this;
    for (auto& x : r.c_) x = -x;
    return r;
  }

  friend AlgebraicNumber operator+(const AlgebraicNumber& x, const AlgebraicNumber& y) {
    if (x.p_ == y.p_) {
      AlgebraicNumber r = x;
      for (std::size_t i = 0; i < r.c_.size(); ++i) r.c_[i] += y.c_[i];
      return r;
    }
    auto P = merge(x.p_, y.p_);
    return x.promoted(P) + y.promoted(P);
  }
  friend AlgebraicNumber operator-(const AlgebraicNumber& x, const AlgebraicNumber& y) {
    return x + (-y);
  }

  friend AlgebraicNumber operator*(const AlgebraicNumber& x, const AlgebraicNumber& y) {
    if (x.p_ != y.p_) {
      auto P = merge(x.p_, y.p_);
      return x.promoted(P) * y.promoted(P);
    }
    const std::size_t n = x.c_.size();
    std::vector<mpz_class> prodp(n);
    for (unsigned I = 0; I < n; ++I) {
      prodp[I] = 1;
      for (std::size_t i = 0; i < x.p_.size(); ++i)
        if (I >> i & 1u) prodp[I] *= x.p_[i];
    }
    std::vector<mpq_class> c(n);
    for (unsigned I = 0; I < n; ++I) {
      if (sgn(x.c_[I]) == 0) continue;
      for (unsigned J = 0; J < n; ++J) {
        if (sgn(y.c_[J]) == 0) continue;
        c[I ^ J] += x.c_[I] * y.c_[J] * prodp[I & J];
      }
    }
    AlgebraicNumber r;
    r.p_ = x.p_;
    r.c_ = std::move(c);
    return r;
  }

  friend AlgebraicNumber operator*(const AlgebraicNumber& x, const mpq_class& q) {
    AlgebraicNumber r = x;
    for (auto& v : r.c_) v *= q;
    return r;
  }
  friend AlgebraicNumber operator*(const mpq_class& q, const AlgebraicNumber& x) { return x * q; }

  AlgebraicNumber& operator+=(const AlgebraicNumber& y) { return *this = *this + y; }
  AlgebraicNumber& operator-=(const AlgebraicNumber& y) { return *this = *this - y; }
  AlgebraicNumber& operator*=(const AlgebraicNumber& y) { return *this = *this * y; }

  friend bool operator==(const AlgebraicNumber& x, const AlgebraicNumber& y) {
    return (x - y).is_zero();
  }
  friend bool operator!=(const AlgebraicNumber& x, const AlgebraicNumber& y) { return !(x == y); }

  // Automorphism flipping the sign of sqrt(p_i) for every i in flip.
  AlgebraicNumber tau(unsigned flip) const {
    AlgebraicNumber r = *this;
    for (unsigned I = 0; I < r.c_.size(); ++I)
      if (__builtin_popcount(I & flip) & 1) r.c_[I] = -r.c_[I];
    return r;
  }

  std::vector<AlgebraicNumber> galois_orbit() const {
    std::vector<AlgebraicNumber> out;
    for (unsigned f = 0; f < c_.size(); ++f) out.push_back(tau(f));
    return out;
  }

  // Field norm, the product of all conjugates.
  mpq_class norm() const {
    AlgebraicNumber prod(1);
    prod = prod.promoted(p_);
    for (unsigned f = 0; f < c_.size(); ++f) prod *= tau(f);
    if (!prod.is_rational()) fail("internal", "norm is not rational");
    return prod.c_[0];
  }

  AlgebraicNumber inverse() const {
    if (is_zero()) fail("singular", "inverse of zero");
    AlgebraicNumber prod(1);
    prod = prod.promoted(p_);
    for (unsigned f = 1; f < c_.size(); ++f) prod *= tau(f);
    mpq_class n = (*this * prod).rational_part();
    return prod * mpq_class(1 / n);
  }

  friend AlgebraicNumber operator/(const AlgebraicNumber& x, const AlgebraicNumber& y) {
    return x * y.inverse();
  }

  template <class Real>
  Real evaluate() const {
    Real sum = 0;
    for (unsigned I = 0; I < c_.size(); ++I) {
      if (sgn(c_[I]) == 0) continue;
      Real term = Real(c_[I].get_num().get_str()) / Real(c_[I].get_den().get_str());
      for (std::size_t i = 0; i < p_.size(); ++i)
        if (I >> i & 1u) term *= real_sqrt(Real(p_[i]));
      sum += term;
    }
    return sum;
  }

  double to_double() const {
    double sum = 0;
    for (unsigned I = 0; I < c_.size(); ++I) {
      if (sgn(c_[I]) == 0) continue;
      double term = c_[I].get_d();
      for (std::size_t i = 0; i < p_.size(); ++i)
        if (I >> i & 1u) term *= std::sqrt(static_cast<double>(p_[i]));
      sum += term;
    }
    return sum;
  }

  // Sign of a real algebraic number via 50-digit evaluation; exact for zero.
  int sign() const {
    if (is_zero()) return 0;
    using boost::multiprecision::cpp_dec_float_50;
    auto v = evaluate<cpp_dec_float_50>();
    return v > 0 ? 1 : -1;
  }

  std::string to_string() const {
    std::ostringstream os;
    bool first = true;
    for (unsigned I = 0; I < c_.size(); ++I) {
      if (sgn(c_[I]) == 0) continue;
      if (!first) os << (sgn(c_[I]) > 0 ? "+" : "");
      os << c_[I].get_str();
      if (I) {
        os << "*sqrt(";
        long prod = 1;
        for (std::size_t i = 0; i < p_.size(); ++i)
          if (I >> i & 1u) prod *= p_[i];
        os << prod << ")";
      }
      first = false;
    }
    if (first) os << "0";
    return os.str();
  }

  friend std::ostream& operator<<(std::ostream& os, const AlgebraicNumber& x) {
    return os << x.to_string();
  }

 private:
  std::vector<long> p_;
  std::vector<mpq_class> c_;
};

using AlgMatrix = std::vector<std::vector<AlgebraicNumber>>;

inline AlgMatrix alg_identity(std::size_t n) {
  AlgMatrix I(n, std::vector<AlgebraicNumber>(n));
  for (std::size_t i = 0; i < n; ++i) I[i][i] = 1;
  return I;
}

inline AlgMatrix alg_transpose(const AlgMatrix& A) {
  const std::size_t n = A.size();
  AlgMatrix T(n, std::vector<AlgebraicNumber>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) T[j][i] = A[i][j];
  return T;
}

inline AlgMatrix alg_multiply(const AlgMatrix& A, const AlgMatrix& B) {
  const std::size_t n = A.size(), m = B.empty() ? 0 : B[0].size(), l = B.size();
  AlgMatrix C(n, std::vector<AlgebraicNumber>(m));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t t = 0; t < l; ++t)
        if (!A[i][t].is_zero() && !B[t][j].is_zero()) C[i][j] += A[i][t] * B[t][j];
  return C;
}

inline std::vector<long> common_primes(const AlgMatrix& A) {
  std::vector<long> P;
  for (const auto& row : A)
    for (const auto& x : row) P = AlgebraicNumber::merge(P, x.trimmed().primes());
  return P;
}

inline AlgMatrix promote_all(const AlgMatrix& A) {
  auto P = common_primes(A);
  AlgMatrix B = A;
  for (auto& row : B)
    for (auto& x : row) x = x.trimmed().promoted(P);
  return B;
}

inline void require_square(const AlgMatrix& A) {
  for (const auto& row : A)
    if (row.size() != A.size()) fail("not-square", "matrix must be square");
}

// Gaussian elimination over the field; exact.
inline AlgebraicNumber det_exact(const AlgMatrix& A0, std::size_t cap = 16) {
  require_square(A0);
  const std::size_t n = A0.size();
  if (n > cap) fail("dimension-cap-exceeded", std::to_string(n) + " > " + std::to_string(cap));
  if (n == 0) return 1;
  AlgMatrix A = promote_all(A0);
  AlgebraicNumber det = AlgebraicNumber(1).promoted(A[0][0].primes());
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    while (piv < n && A[piv][col].is_zero()) ++piv;
    if (piv == n) return AlgebraicNumber(0);
    if (piv != col) {
      std::swap(A[piv], A[col]);
      det = -det;
    }
    det *= A[col][col];
    AlgebraicNumber inv = A[col][col].inverse();
    for (std::size_t r = col + 1; r < n; ++r) {
      if (A[r][col].is_zero()) continue;
      AlgebraicNumber f = A[r][col] * inv;
      for (std::size_t c = col; c < n; ++c) A[r][c] -= f * A[col][c];
    }
  }
  return det.trimmed();
}

inline bool is_odd_integer(const mpq_class& q) {
  return q.get_den() == 1 && mpz_odd_p(q.get_num().get_mpz_t());
}
inline bool is_even_integer(const mpq_class& q) {
  return q.get_den() == 1 && mpz_even_p(q.get_num().get_mpz_t());
}

// Odd diagonal integers plus off-diagonal entries with even integer coefficients.
inline bool in_parity_normal_form(const AlgMatrix& A) {
  for (std::size_t i = 0; i < A.size(); ++i)
    for (std::size_t j = 0; j < A.size(); ++j) {
      const auto& x = A[i][j];
      if (i == j) {
        if (!x.is_rational() || !is_odd_integer(x.rational_part())) return false;
      } else {
        for (const auto& c : x.coeffs())
          if (!is_even_integer(c)) return false;
      }
    }
  return true;
}

// det = u + 2*alpha with u odd and alpha integral, hence nonzero.
inline bool parity_invertible(const AlgMatrix& A) {
  require_square(A);
  if (!in_parity_normal_form(A)) fail("precondition-violated", "matrix is not odd-diagonal plus 2a");
  AlgebraicNumber d = det_exact(A, 64);
  const auto& c = d.coeffs();
  if (!is_odd_integer(c[0])) return false;
  for (std::size_t i = 1; i < c.size(); ++i)
    if (!is_even_integer(c[i])) return false;
  return !d.is_zero();
}

inline AlgMatrix invert_block(const AlgMatrix& A0) {
  require_square(A0);
  const std::size_t n = A0.size();
  if (n == 0) return {};
  AlgMatrix A = promote_all(A0);
  const auto P = A[0][0].primes();
  AlgMatrix B(n, std::vector<AlgebraicNumber>(n, AlgebraicNumber(0).promoted(P)));
  for (std::size_t i = 0; i < n; ++i) B[i][i] = AlgebraicNumber(1).promoted(P);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    while (piv < n && A[piv][col].is_zero()) ++piv;
    if (piv == n) fail("singular", "determinant is zero");
    std::swap(A[piv], A[col]);
    std::swap(B[piv], B[col]);
    AlgebraicNumber inv = A[col][col].inverse();
    for (std::size_t c = 0; c < n; ++c) {
      A[col][c] *= inv;
      B[col][c] *= inv;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col || A[r][col].is_zero()) continue;
      AlgebraicNumber f = A[r][col];
      for (std::size_t c = 0; c < n; ++c) {
        A[r][c] -= f * A[col][c];
        B[r][c] -= f * B[col][c];
      }
    }
  }
  AlgMatrix check = alg_multiply(A0, B);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (check[i][j] != AlgebraicNumber(i == j ? 1 : 0)) fail("internal", "inverse check failed");
  for (auto& row : B)
    for (auto& x : row) x = x.trimmed();
  return B;
}

// Random elements and symmetric blocks in parity normal form, for property checks.
inline AlgebraicNumber random_element(std::mt19937_64& rng, const std::vector<long>& primes, bool all_nonzero = false) {
  std::uniform_int_distribution<int> num(-9, 9), den(1, 5);
  std::vector<mpq_class> c(std::size_t{1} << primes.size());
  for (auto& x : c) {
    int n = num(rng);
    if (all_nonzero && n == 0) n = 1;
    x = mpq_class(n, den(rng));
    x.canonicalize();
  }
  return AlgebraicNumber(primes, c);
}

inline AlgMatrix random_parity_block(std::mt19937_64& rng, std::size_t n, const std::vector<long>& primes) {
  std::uniform_int_distribution<int> coef(-3, 3), diag(-6, 6);
  AlgMatrix A(n, std::vector<AlgebraicNumber>(n));
  for (std::size_t i = 0; i < n; ++i) {
    A[i][i] = 2 * diag(rng) + 1;
    for (std::size_t j = i + 1; j < n; ++j) {
      std::vector<mpq_class> c(std::size_t{1} << primes.size());
      for (auto& x : c) x = 2 * coef(rng);
      A[i][j] = A[j][i] = AlgebraicNumber(primes, c);
    }
  }
  return A;
}

}  // namespace lsrt
