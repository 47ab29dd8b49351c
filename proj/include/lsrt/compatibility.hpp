#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "lsrt/trees.hpp"

namespace lsrt {

struct FixpointOptions {
  int K_max = -1;  // highest counterterm order, default N + 2
  int K_tree = -1;
  double tol = 1e-10;
  int max_iter = 30;
  double kappa = 0.5;  // weight of the |.|_kappa norm
  double max_ratio = 0.5;
};

struct FixpointResult {
  bool excluded = false;
  std::optional<Mode> witness;
  std::string reason;
  BlockMatrix M;
  Counterterms L;
  std::vector<double> diffs;  // |M_{j+1} - M_j|_kappa
  double ratio = 0;           // largest successive ratio of diffs
  double C0 = 0;              // smallest C0 with |M_j|_kappa <= C0 eps0 along the iteration
  int iterations = 0;
};

// Sum_r eta^r L^{(r)} assembled over scales, restricted to chi-bar support by construction.
inline BlockMatrix compatibility_update(const SeriesContext& ctx, const Counterterms& L) {
  BlockMatrix out;
  double w = 1;
  int last = 0;
  for (const auto& [r, byh] : L.by_order) {
    for (; last < r; ++last) w *= ctx.eta();
    const BlockMatrix A = assembled_counterterm(ctx, L, r);
    for (const auto& [key, b] : A.entries()) out.add(key.first, key.second, b * w);
  }
  return out;
}

inline FixpointResult counterterm_fixpoint(const EquationSpec& spec, double eps, const SeriesOptions& sopt,
                                           const FixpointOptions& fopt = {}) {
  const int kmax = fopt.K_max < 0 ? spec.N + 2 : fopt.K_max;
  FixpointResult res;
  BlockMatrix M;
  double prev = -1;
  for (int it = 0; it < fopt.max_iter; ++it) {
    SeriesContext ctx(spec, eps, M, sopt);
    auto adm = admissible(spec, ctx.blocks(), ctx.modes(), sopt.ms);
    if (!adm.ok) {
      res.excluded = true;
      res.witness = adm.witness;
      res.reason = adm.reason;
      res.M = M;
      res.iterations = it;
      return res;
    }
    res.L = counterterms(ctx, kmax, fopt.K_tree);
    BlockMatrix next = compatibility_update(ctx, res.L);
    const double d = next.distance(M, fopt.kappa);
    res.diffs.push_back(d);
    res.C0 = std::max(res.C0, next.kappa_norm(fopt.kappa) / spec.eps0);
    if (prev > 0) {
      const double q = d / prev;
      res.ratio = std::max(res.ratio, q);
      if (q > fopt.max_ratio && d > fopt.tol)
        fail("no-contraction", "successive ratio " + std::to_string(q) + " exceeds " + std::to_string(fopt.max_ratio));
    }
    M = next;
    res.iterations = it + 1;
    if (d < fopt.tol) {
      res.M = M;
      return res;
    }
    prev = d;
  }
  fail("no-contraction", "no convergence within " + std::to_string(fopt.max_iter) + " iterations");
}

// Finite-difference estimate of |L(M + dM) - L(M)|_kappa / |dM|_kappa with dM = h on the block diagonals.
inline double update_lipschitz(const EquationSpec& spec, double eps, const SeriesOptions& sopt, const BlockMatrix& M,
                               const FixpointOptions& fopt = {}, double h = 1e-6) {
  const int kmax = fopt.K_max < 0 ? spec.N + 2 : fopt.K_max;
  SeriesContext c0(spec, eps, M, sopt);
  BlockMatrix Mp = M, dM;
  for (const auto& B : c0.blocks().blocks())
    for (const auto& nu : B.modes) dM.add(nu, nu, SigmaBlock::Identity() * h);
  if (dM.empty()) return 0.0;
  for (const auto& [key, b] : dM.entries()) Mp.add(key.first, key.second, b);
  SeriesContext c1(spec, eps, Mp, sopt);
  const BlockMatrix a = compatibility_update(c0, counterterms(c0, kmax, fopt.K_tree));
  const BlockMatrix b = compatibility_update(c1, counterterms(c1, kmax, fopt.K_tree));
  return b.distance(a, fopt.kappa) / dM.kappa_norm(fopt.kappa);
}

struct DecayFit {
  double K2 = 0, kappa = 0, rho = 1;
  std::size_t entries = 0;
};

// Envelope fit |M_{nu,nu'}| <= K2 eps exp(-kappa |nu - nu'|^rho); rho from a small grid, kappa >= 0.
inline DecayFit fit_counterterm_decay(const BlockMatrix& M, double eps) {
  std::map<int, double> env;
  for (const auto& [key, b] : M.entries()) {
    const double a = b.cwiseAbs().maxCoeff();
    if (a == 0) continue;
    auto& e = env[(key.first - key.second).size()];
    e = std::max(e, a / eps);
  }
  DecayFit best;
  best.entries = M.entries().size();
  if (env.empty()) return best;
  double best_sse = 1e300;
  for (double rho : {0.25, 0.5, 0.75, 1.0}) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(env.size());
    for (auto [d, a] : env) {
      const double xv = std::pow(d, rho), yv = std::log(a);
      sx += xv;
      sy += yv;
      sxx += xv * xv;
      sxy += xv * yv;
    }
    const double den = n * sxx - sx * sx;
    const double slope = den > 0 ? (n * sxy - sx * sy) / den : 0.0;
    const double kappa = std::max(0.0, -slope);
    double K2 = 0, sse = 0;
    for (auto [d, a] : env) K2 = std::max(K2, a * std::exp(kappa * std::pow(d, rho)));
    for (auto [d, a] : env) {
      const double r = std::log(K2) - kappa * std::pow(d, rho) - std::log(a);
      sse += r * r;
    }
    if (sse < best_sse - 1e-15) {
      best_sse = sse;
      best.K2 = K2;
      best.kappa = kappa;
      best.rho = rho;
    }
  }
  return best;
}

inline bool decay_bound_holds(const BlockMatrix& M, double eps, const DecayFit& f) {
  for (const auto& [key, b] : M.entries()) {
    const double d = (key.first - key.second).size();
    if (b.cwiseAbs().maxCoeff() > f.K2 * eps * std::exp(-f.kappa * std::pow(d, f.rho)) * (1 + 1e-12)) return false;
  }
  return true;
}

}  // namespace lsrt
