#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "lsrt/clusters.hpp"
#include "lsrt/lattice.hpp"

namespace lsrt {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;

// Sign index convention: 0 for sigma = +, 1 for sigma = -.
inline int sigma_index(int sigma) { return sigma > 0 ? 0 : 1; }
inline int sigma_value(int idx) { return idx == 0 ? 1 : -1; }

struct MatrixNorms {
  double max_entry = 0;   // |A|_inf
  double trace_norm = 0;  // sqrt(tr(A A*)/d)
  double op_norm = 0;     // spectral norm
};

inline double self_adjoint_defect(const CMat& A) {
  if (A.rows() != A.cols()) fail("not-square", "matrix must be square");
  return (A - A.adjoint()).cwiseAbs().maxCoeff();
}

inline MatrixNorms matrix_norms(const CMat& A) {
  if (A.rows() != A.cols() || A.rows() == 0) fail("not-square", "matrix must be square and nonempty");
  if (self_adjoint_defect(A) > 1e-12) fail("not-self-adjoint", "defect above 1e-12");
  MatrixNorms n;
  n.max_entry = A.cwiseAbs().maxCoeff();
  n.trace_norm = std::sqrt((A * A.adjoint()).trace().real() / static_cast<double>(A.rows()));
  Eigen::SelfAdjointEigenSolver<CMat> es(A, Eigen::EigenvaluesOnly);
  n.op_norm = es.eigenvalues().cwiseAbs().maxCoeff();
  return n;
}

inline Eigen::VectorXd sorted_eigenvalues(const CMat& A) {
  Eigen::SelfAdjointEigenSolver<CMat> es(A, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

// Weyl/Lidskii style bound: each sorted eigenvalue moves by at most the trace norm of the perturbation's spectrum.
inline bool lidskii_bound_holds(const CMat& A, const CMat& B, double tol = 1e-10) {
  auto la = sorted_eigenvalues(A), lab = sorted_eigenvalues(A + B), lb = sorted_eigenvalues(B);
  const double budget = lb.cwiseAbs().sum();
  for (Eigen::Index i = 0; i < la.size(); ++i)
    if (std::abs(lab[i] - la[i]) > budget + tol) return false;
  return true;
}

inline double max_row_sum(const CMat& A) { return A.cwiseAbs().rowwise().sum().maxCoeff(); }

inline CMat random_self_adjoint(std::mt19937_64& rng, int d, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  CMat A(d, d);
  for (int i = 0; i < d; ++i) {
    A(i, i) = g(rng);
    for (int j = i + 1; j < d; ++j) {
      A(i, j) = cplx(g(rng), g(rng));
      A(j, i) = std::conj(A(i, j));
    }
  }
  return A;
}

class ScaleFunctions {
 public:
  // Lipschitz constant of the glue bump: |chi'| <= 2/gamma.
  static constexpr double kBumpLipschitz = 2.0;

  ScaleFunctions(double gamma, double gamma_bar, double Gamma = kBumpLipschitz)
      : gamma_(gamma), gamma_bar_(gamma_bar), Gamma_(Gamma) {
    if (!(gamma > 0 && gamma < gamma_bar && gamma_bar < 0.25))
      fail("invalid-parameter", "need 0 < gamma < gamma_bar < 1/4");
    if (Gamma < kBumpLipschitz) fail("invalid-parameter", "Gamma below the bump's Lipschitz constant 2");
  }

  double gamma() const { return gamma_; }
  double gamma_bar() const { return gamma_bar_; }
  double Gamma() const { return Gamma_; }

  double chi(double x) const {
    x = std::abs(x);
    if (x <= gamma_) return 1.0;
    if (x >= 2 * gamma_) return 0.0;
    const double t = (x - gamma_) / gamma_;
    const double a = glue(t), b = glue(1 - t);
    return b / (a + b);
  }
  double chi_h(int h, double x) const {
    if (h < -1) fail("invalid-scale", "h must be >= -1");
    if (h == -1) return 1.0 - chi(x);
    return chi(std::ldexp(x, h)) - chi(std::ldexp(x, h + 1));
  }
  double chibar1(double delta) const { return std::abs(delta) < gamma_bar_ ? 1.0 : 0.0; }
  double chibar0(double delta) const { return 1.0 - chibar1(delta); }

  // Scales h with chi_h(x) != 0; at most two.
  std::vector<int> scales(double x) const {
    std::vector<int> out;
    x = std::abs(x);
    if (x == 0) return out;
    if (chi_h(-1, x) != 0) out.push_back(-1);
    const int h0 = static_cast<int>(std::floor(std::log2(gamma_ / x)));
    for (int h = std::max(0, h0 - 1); h <= h0 + 1; ++h)
      if (h < 1000 && chi_h(h, x) != 0) out.push_back(h);
    return out;
  }

 private:
  static double glue(double t) { return t <= 0 ? 0.0 : std::exp(-1.0 / t); }
  double gamma_, gamma_bar_, Gamma_;
};

struct ScaleIndex {
  int h = -1;
  int i = 0;
  void validate() const {
    if (h < -1) fail("labels-inconsistent", "scale below -1");
    if (i != 0 && i != 1) fail("labels-inconsistent", "type must be 0 or 1");
    if (i == 0 && h != -1) fail("labels-inconsistent", "type 0 forces h = -1");
  }
};

using SigmaBlock = Eigen::Matrix2cd;

// Sparse counterterm matrix over (nu, sigma); stored as 2x2 sigma blocks per ordered mode pair.
class BlockMatrix {
 public:
  double eps = 0;

  SigmaBlock get(const Mode& a, const Mode& b) const {
    auto it = entries_.find({a, b});
    return it == entries_.end() ? SigmaBlock::Zero() : it->second;
  }
  cplx at(const Mode& a, int sa, const Mode& b, int sb) const {
    auto it = entries_.find({a, b});
    return it == entries_.end() ? cplx{} : it->second(sigma_index(sa), sigma_index(sb));
  }
  void set(const Mode& a, const Mode& b, const SigmaBlock& m) { entries_[{a, b}] = m; }
  void add(const Mode& a, const Mode& b, const SigmaBlock& m) {
    auto [it, fresh] = entries_.try_emplace({a, b}, m);
    if (!fresh) it->second += m;
  }
  bool empty() const { return entries_.empty(); }
  const std::map<std::pair<Mode, Mode>, SigmaBlock>& entries() const { return entries_; }

  double max_abs() const {
    double m = 0;
    for (const auto& [k, v] : entries_) m = std::max(m, v.cwiseAbs().maxCoeff());
    return m;
  }
  // sup of exp(kappa |nu - nu'|^(1/2)) |M_{nu,nu'}|
  double kappa_norm(double kappa) const {
    double m = 0;
    for (const auto& [k, v] : entries_)
      m = std::max(m, std::exp(kappa * std::sqrt((k.first - k.second).size())) * v.cwiseAbs().maxCoeff());
    return m;
  }
  double distance(const BlockMatrix& o, double kappa) const {
    BlockMatrix d = *this;
    for (const auto& [k, v] : o.entries_) d.add(k.first, k.second, -v);
    return d.kappa_norm(kappa);
  }
  double self_adjoint_defect() const {
    double m = 0;
    for (const auto& [k, v] : entries_) m = std::max(m, (v - get(k.second, k.first).adjoint()).cwiseAbs().maxCoeff());
    return m;
  }
  // M^{s,s'}_{nu,nu'} against M^{-s',-s}_{nu',nu}
  double symmetry_defect() const {
    double m = 0;
    for (const auto& [k, v] : entries_) {
      SigmaBlock t = get(k.second, k.first);
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) m = std::max(m, std::abs(v(a, b) - t(1 - b, 1 - a)));
    }
    return m;
  }

 private:
  std::map<std::pair<Mode, Mode>, SigmaBlock> entries_;
};

struct MultiscaleParams {
  double gamma = 0.01;
  double gamma_bar = 0.2;
  double xi = 2.0;
  double tau = 3.0;
  double tau1 = 2.0;
  double beta = 0.25;
  double C2 = 1.0;

  void validate() const {
    if (!(gamma > 0 && gamma < gamma_bar && gamma_bar < 0.25))
      fail("invalid-parameter", "need 0 < gamma < gamma_bar < 1/4");
    if (!(xi > 0) || !(tau > 0) || !(tau1 > 0)) fail("invalid-parameter", "xi, tau, tau1 must be positive");
    check_cluster_params(beta, C2);
  }
};

struct Block {
  std::vector<Mode> modes;  // the small members of one class, sorted
  int p = 0;
  CMat A, Ainv;             // index 2*pos + sigma_index
  bool singular = false;
  double x = 0;
};

// Block structure of diag(delta) + Mhat at fixed eps over a finite mode universe.
class BlockSystem {
 public:
  BlockSystem() = default;
  BlockSystem(const EquationSpec& spec, const std::vector<Mode>& modes, double eps, const BlockMatrix& M,
              const MultiscaleParams& prm)
      : eps_(eps), gamma_bar_(prm.gamma_bar) {
    prm.validate();
    std::vector<Mode> pmodes;
    for (const auto& nu : modes) {
      delta_[nu.key()] = eigenvalue(spec, nu, eps);
      if (!in_kernel(spec, nu)) pmodes.push_back(nu);
    }
    // Only O modes carry blocks; kernel modes are handled by the bifurcation equation.
    auto part = group_modes(small_modes(spec, pmodes, eps), prm.beta, prm.C2);
    for (const auto& cls : part.classes) {
      Block b;
      for (const auto& nu : cls)
        if (std::abs(delta_.at(nu.key())) < prm.gamma_bar) b.modes.push_back(nu);
      if (b.modes.empty()) continue;
      const int d = static_cast<int>(b.modes.size());
      b.p = b.modes.front().size();
      for (const auto& nu : b.modes) b.p = std::min(b.p, nu.size());
      b.A = CMat::Zero(2 * d, 2 * d);
      for (int i = 0; i < d; ++i) {
        const double dl = delta_.at(b.modes[i].key());
        b.A(2 * i, 2 * i) = dl;
        b.A(2 * i + 1, 2 * i + 1) = dl;
        for (int j = 0; j < d; ++j) b.A.block<2, 2>(2 * i, 2 * j) += M.get(b.modes[i], b.modes[j]);
      }
      Eigen::SelfAdjointEigenSolver<CMat> es(b.A);
      const double lam = es.eigenvalues().cwiseAbs().minCoeff();
      b.singular = lam <= 1e-14 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
      if (!b.singular) {
        b.Ainv = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().adjoint();
        const double nrm = std::sqrt((b.Ainv * b.Ainv.adjoint()).trace().real() / (2.0 * d));
        b.x = 1.0 / (std::pow(b.p, prm.xi) * nrm);
      }
      const int idx = static_cast<int>(blocks_.size());
      for (int i = 0; i < d; ++i) {
        block_of_[b.modes[i].key()] = idx;
        pos_[b.modes[i].key()] = i;
      }
      blocks_.push_back(std::move(b));
    }
  }

  double eps() const { return eps_; }
  double gamma_bar() const { return gamma_bar_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  bool known(const Mode& nu) const { return delta_.count(nu.key()) > 0; }
  double delta(const Mode& nu) const {
    auto it = delta_.find(nu.key());
    if (it == delta_.end()) fail("mode-unknown", nu.str(kMaxDim));
    return it->second;
  }
  // Block index of a small mode or -1.
  int block_of(const Mode& nu) const {
    auto it = block_of_.find(nu.key());
    return it == block_of_.end() ? -1 : it->second;
  }
  int position(const Mode& nu) const { return pos_.at(nu.key()); }
  const Block& block(const Mode& nu) const {
    int b = block_of(nu);
    if (b < 0) fail("mode-not-small", nu.str(kMaxDim));
    return blocks_[b];
  }
  double x(const Mode& nu) const { return block(nu).x; }
  cplx inverse_entry(const Mode& a, int sa, const Mode& b, int sb) const {
    int ba = block_of(a);
    if (ba < 0 || ba != block_of(b)) return 0.0;
    const auto& B = blocks_[ba];
    if (B.singular) fail("block-singular", a.str(kMaxDim));
    return B.Ainv(2 * position(a) + sigma_index(sa), 2 * position(b) + sigma_index(sb));
  }

 private:
  double eps_ = 0, gamma_bar_ = 0;
  std::vector<Block> blocks_;
  std::unordered_map<std::uint64_t, double> delta_;
  std::unordered_map<std::uint64_t, int> block_of_, pos_;
};

inline double small_divisor(const EquationSpec& spec, const BlockMatrix& M, const Mode& nu, double eps,
                            const MultiscaleParams& prm, int radius) {
  if (!(std::abs(eigenvalue(spec, nu, eps)) < prm.gamma_bar)) fail("mode-not-small", nu.str(spec.D));
  BlockSystem bs(spec, active_shell(spec, radius), eps, M, prm);
  if (bs.block_of(nu) < 0) fail("mode-not-small", nu.str(spec.D) + " outside the shell");
  return bs.x(nu);
}

inline cplx propagator(const BlockSystem& bs, const ScaleFunctions& sf, const Mode& nu, const Mode& nup, int sigma,
                       int sigmap, ScaleIndex sc) {
  sc.validate();
  const double d = bs.delta(nu);
  if (sc.i == 0) {
    if (nu != nup || sigma != sigmap) fail("labels-inconsistent", "type 0 propagators are diagonal");
    return sf.chibar0(d) / d;
  }
  const double dp = bs.delta(nup);
  if (sf.chibar1(d) == 0 || sf.chibar1(dp) == 0) return 0.0;
  const int b = bs.block_of(nu);
  if (b < 0 || b != bs.block_of(nup)) return 0.0;
  const auto& B = bs.blocks()[b];
  if (B.singular) return 0.0;
  const double c = sf.chi_h(sc.h, B.x);
  return c == 0 ? cplx{} : c * bs.inverse_entry(nu, sigma, nup, sigmap);
}

// Full block of the multiscale sum over (i, h), for comparison with the dense inverse.
inline CMat propagator_sum(const BlockSystem& bs, const ScaleFunctions& sf, const Block& B) {
  const int d = static_cast<int>(B.modes.size());
  CMat G = CMat::Zero(2 * d, 2 * d);
  std::vector<int> hs = sf.scales(B.x);
  for (int i = 0; i < d; ++i)
    for (int a = 0; a < 2; ++a)
      for (int j = 0; j < d; ++j)
        for (int b = 0; b < 2; ++b) {
          cplx s = 0;
          for (int h : hs) s += propagator(bs, sf, B.modes[i], B.modes[j], sigma_value(a), sigma_value(b), {h, 1});
          if (i == j && a == b) s += propagator(bs, sf, B.modes[i], B.modes[i], sigma_value(a), sigma_value(a), {-1, 0});
          G(2 * i + a, 2 * j + b) = s;
        }
  return G;
}

struct AdmissibleReport {
  bool ok = true;
  std::optional<Mode> witness;
  std::string reason;
};

// O-membership over the window: delta affine in eps, so check endpoints and sign change.
inline bool in_O(const EquationSpec& spec, const Mode& nu) {
  if (in_kernel(spec, nu)) return false;
  const double a = eigenvalue(spec, nu, 0.0), b = eigenvalue(spec, nu, spec.eps0);
  const double mn = (a < 0) != (b < 0) ? 0.0 : std::min(std::abs(a), std::abs(b));
  return mn < 0.5;
}

inline AdmissibleReport admissible(const EquationSpec& spec, const BlockSystem& bs, const std::vector<Mode>& shell,
                                   const MultiscaleParams& prm) {
  AdmissibleReport rep;
  for (const auto& B : bs.blocks())
    if (B.x < prm.gamma / std::pow(B.p, prm.tau)) {
      rep.ok = false;
      rep.witness = B.modes.front();
      rep.reason = B.singular ? "singular block" : "small divisor below gamma/p^tau";
      return rep;
    }
  for (const auto& nu : shell) {
    if (nu.size() == 0 || in_kernel(spec, nu) || !in_O(spec, nu)) continue;
    const double d = std::abs(bs.delta(nu));
    if (std::abs(d - prm.gamma_bar) < prm.gamma / std::pow(nu.size(), prm.tau1)) {
      rep.ok = false;
      rep.witness = nu;
      rep.reason = "|delta| too close to gamma_bar";
      return rep;
    }
  }
  return rep;
}

inline AdmissibleReport admissible(const EquationSpec& spec, const BlockMatrix& M, double eps, const MultiscaleParams& prm,
                                   int radius) {
  prm.validate();
  auto shell = active_shell(spec, radius);
  BlockSystem bs(spec, shell, eps, M, prm);
  return admissible(spec, bs, shell, prm);
}

// Rejection sampling of gamma_bar on a grid: keep the first value with ||delta(0)| - gbar| >= gbar0 |nu|^-taubar0.
inline std::optional<double> select_gamma_bar(const EquationSpec& spec, int radius, double lo, double hi, int points,
                                              double gbar0, double taubar0) {
  auto shell = active_shell(spec, radius);
  std::vector<double> d0;
  std::vector<int> sz;
  for (const auto& nu : shell) {
    d0.push_back(std::abs(eigenvalue(spec, nu, 0.0)));
    sz.push_back(nu.size());
  }
  for (int k = 0; k < points; ++k) {
    const double g = points == 1 ? lo : lo + (hi - lo) * k / (points - 1);
    if (!(g > 0 && g < 0.25)) continue;
    bool good = true;
    for (std::size_t i = 0; i < d0.size() && good; ++i)
      good = std::abs(d0[i] - g) >= gbar0 * std::pow(sz[i], -taubar0);
    if (good) return g;
  }
  return std::nullopt;
}

// Finite-difference check of |d lambda / d eps| <= ||dA/deps||_2 on one block family.
inline bool derivative_bound_holds(const std::function<CMat(double)>& A, double e, double h, double tol = 1e-6) {
  auto l0 = sorted_eigenvalues(A(e - h)), l1 = sorted_eigenvalues(A(e + h));
  CMat dA = (A(e + h) - A(e - h)) / (2 * h);
  const double bound = sorted_eigenvalues(0.5 * (dA + dA.adjoint())).cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < l0.size(); ++i)
    if (std::abs(l1[i] - l0[i]) / (2 * h) > bound + tol) return false;
  return true;
}

}  // namespace lsrt
