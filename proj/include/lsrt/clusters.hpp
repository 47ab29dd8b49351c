#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "lsrt/lattice.hpp"

namespace lsrt {

// Modes carrying independent degrees of freedom: nonzero and, for Dirichlet, no vanishing space component.
inline bool is_active(const EquationSpec& spec, const Mode& nu) {
  if (nu.size() == 0) return false;
  if (spec.boundary == Boundary::Dirichlet)
    for (int i = 0; i < spec.D; ++i)
      if (nu.m[i] <= 0) return false;
  return true;
}

inline std::vector<Mode> active_shell(const EquationSpec& spec, int radius) {
  std::vector<Mode> out;
  for (const auto& nu : enumerate_shell(spec, radius))
    if (is_active(spec, nu)) out.push_back(nu);
  return out;
}

struct ClusterPartition {
  double eps = 0;
  int radius = 0;
  double beta = 0.25, C2 = 1.0;
  std::vector<std::vector<Mode>> classes;  // members sorted lexicographically
  std::vector<int> p;                      // min |nu| per class

  int class_of(const Mode& nu) const {
    for (std::size_t j = 0; j < classes.size(); ++j)
      if (std::binary_search(classes[j].begin(), classes[j].end(), nu)) return static_cast<int>(j);
    return -1;
  }
  std::string fingerprint(int D) const {
    std::string s;
    for (const auto& c : classes) {
      s += "[";
      for (const auto& nu : c) s += nu.str(D);
      s += "]";
    }
    return s;
  }
};

inline bool chain_edge(const Mode& a, const Mode& b, double beta, double C2) {
  return (a - b).size() <= 0.5 * C2 * std::pow(a.size() + b.size(), beta) + 1e-12;
}

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

// Groups modes into chain-connected classes; classes ordered by (p_j, least member).
inline ClusterPartition group_modes(std::vector<Mode> modes, double beta, double C2) {
  std::sort(modes.begin(), modes.end());
  ClusterPartition part;
  part.beta = beta;
  part.C2 = C2;
  DisjointSets ds(modes.size());
  for (std::size_t i = 0; i < modes.size(); ++i)
    for (std::size_t j = i + 1; j < modes.size(); ++j)
      if (chain_edge(modes[i], modes[j], beta, C2)) ds.unite(i, j);
  std::map<std::size_t, std::vector<Mode>> comp;
  for (std::size_t i = 0; i < modes.size(); ++i) comp[ds.find(i)].push_back(modes[i]);
  for (auto& [root, members] : comp) part.classes.push_back(std::move(members));
  auto pmin = [](const std::vector<Mode>& c) {
    int p = c.front().size();
    for (const auto& nu : c) p = std::min(p, nu.size());
    return p;
  };
  std::sort(part.classes.begin(), part.classes.end(), [&](const auto& a, const auto& b) {
    int pa = pmin(a), pb = pmin(b);
    if (pa != pb) return pa < pb;
    return a.front() < b.front();
  });
  for (const auto& c : part.classes) part.p.push_back(pmin(c));
  return part;
}

inline std::vector<Mode> small_modes(const EquationSpec& spec, const std::vector<Mode>& shell, double eps) {
  std::vector<Mode> out;
  for (const auto& nu : shell)
    if (std::abs(eigenvalue(spec, nu, eps)) < 0.5) out.push_back(nu);
  return out;
}

inline void check_cluster_params(double beta, double C2) {
  if (!(beta > 0 && beta < 1)) fail("invalid-parameter", "beta must lie in (0,1)");
  if (!(C2 > 0)) fail("invalid-parameter", "C2 must be positive");
}

inline ClusterPartition partition(const EquationSpec& spec, double eps, int radius, double beta, double C2) {
  check_cluster_params(beta, C2);
  auto part = group_modes(small_modes(spec, active_shell(spec, radius), eps), beta, C2);
  part.eps = eps;
  part.radius = radius;
  return part;
}

struct ResonantSet {
  std::vector<Mode> modes;
  double eps = 0;
};

struct Closure {
  std::vector<Mode> C;     // all modes resonant with the set at some grid eps
  std::vector<Mode> Cbar;  // members of C with |delta(eps)| < gamma_bar
};

inline bool same_class(const ClusterPartition& part, const std::vector<Mode>& modes) {
  if (modes.empty()) return false;
  int j = part.class_of(modes.front());
  if (j < 0) return false;
  for (const auto& nu : modes)
    if (part.class_of(nu) != j) return false;
  return true;
}

inline Closure closure(const EquationSpec& spec, const ResonantSet& set, double eps, double gamma_bar, int radius,
                       const std::vector<double>& grid, double beta, double C2) {
  if (!(gamma_bar > 0 && gamma_bar < 0.25)) fail("invalid-parameter", "gamma_bar must lie in (0, 1/4)");
  if (!same_class(partition(spec, set.eps, radius, beta, C2), set.modes))
    fail("not-resonant", "set is not inside one class at its witness eps");
  std::set<Mode> C;
  for (double e : grid) {
    auto part = partition(spec, e, radius, beta, C2);
    if (!same_class(part, set.modes)) continue;
    for (const auto& nu : part.classes[part.class_of(set.modes.front())]) C.insert(nu);
  }
  Closure out;
  out.C.assign(C.begin(), C.end());
  for (const auto& nu : out.C)
    if (std::abs(eigenvalue(spec, nu, eps)) < gamma_bar) out.Cbar.push_back(nu);
  return out;
}

struct SeparationReport {
  bool ok = true;
  double C1 = 0;             // smallest C1 making the size and diameter checks pass
  int worst_distance_gap = 0;
  std::string witness;
  int classes = 0, nonsingleton = 0, max_class_size = 0;
};

inline SeparationReport separation_report(const ClusterPartition& part, double alpha, double C1_cap = 1e3) {
  if (!(part.beta < alpha)) fail("invalid-parameter", "beta must be smaller than alpha");
  SeparationReport rep;
  rep.classes = static_cast<int>(part.classes.size());
  const double C2 = part.C2, beta = part.beta;
  for (std::size_t j = 0; j < part.classes.size(); ++j) {
    const auto& c = part.classes[j];
    const double pj = part.p[j];
    rep.max_class_size = std::max<int>(rep.max_class_size, c.size());
    if (c.size() > 1) ++rep.nonsingleton;
    int diam = 0, maxsz = 0;
    for (const auto& a : c) {
      maxsz = std::max(maxsz, a.size());
      for (const auto& b : c) diam = std::max(diam, (a - b).size());
    }
    if (maxsz > 2 * pj) {
      rep.ok = false;
      if (rep.witness.empty()) rep.witness = "class " + std::to_string(j) + " exceeds 2 p_j";
    }
    rep.C1 = std::max(rep.C1, c.size() / std::pow(pj, alpha));
    if (diam > 0) rep.C1 = std::max(rep.C1, diam / (C2 * std::pow(pj, alpha + beta)));
    for (std::size_t k = j + 1; k < part.classes.size(); ++k) {
      int dist = 1 << 30;
      for (const auto& a : c)
        for (const auto& b : part.classes[k]) dist = std::min(dist, (a - b).size());
      const double need = 0.5 * C2 * std::pow(pj + part.p[k], beta);
      if (dist < need - 1e-12) {
        rep.ok = false;
        if (rep.witness.empty()) rep.witness = "classes " + std::to_string(j) + "," + std::to_string(k) + " too close";
      }
    }
  }
  if (rep.C1 > C1_cap) {
    rep.ok = false;
    if (rep.witness.empty()) rep.witness = "C1 above cap";
  }
  return rep;
}

struct StabilityInterval {
  double lo, hi;
  std::string fingerprint;
};

inline std::vector<StabilityInterval> stability_scan(const EquationSpec& spec, int radius, const std::vector<double>& grid,
                                                     double beta, double C2) {
  std::vector<StabilityInterval> out;
  auto shell = active_shell(spec, radius);
  for (double e : grid) {
    auto part = group_modes(small_modes(spec, shell, e), beta, C2);
    auto fp = part.fingerprint(spec.D);
    if (out.empty() || out.back().fingerprint != fp) out.push_back({e, e, fp});
    else out.back().hi = e;
  }
  return out;
}

struct PairKey {
  std::uint64_t a, b;
  bool operator==(const PairKey&) const = default;
};
struct PairKeyHash {
  std::size_t operator()(const PairKey& k) const { return std::hash<std::uint64_t>()(k.a * 0x9E3779B97F4A7C15ull ^ k.b); }
};

// Unordered pairs {nu, nu'} lying in one class at some grid eps; includes the diagonal pairs.
class ResonanceTable {
 public:
  ResonanceTable() = default;
  ResonanceTable(const EquationSpec& spec, int radius, const std::vector<double>& grid, double beta, double C2) {
    auto shell = active_shell(spec, radius);
    for (double e : grid) {
      auto part = group_modes(small_modes(spec, shell, e), beta, C2);
      for (const auto& c : part.classes)
        for (const auto& a : c)
          for (const auto& b : c) pairs_.insert(make(a, b));
    }
  }
  bool resonant(const Mode& a, const Mode& b) const { return pairs_.count(make(a, b)) > 0; }
  std::size_t size() const { return pairs_.size(); }
  std::vector<std::pair<Mode, Mode>> offdiagonal() const {
    std::vector<std::pair<Mode, Mode>> out;
    for (const auto& k : pairs_)
      if (k.a != k.b) out.emplace_back(Mode::from_key(k.a), Mode::from_key(k.b));
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  static PairKey make(const Mode& a, const Mode& b) {
    auto x = a.key(), y = b.key();
    return x < y ? PairKey{x, y} : PairKey{y, x};
  }
  std::unordered_set<PairKey, PairKeyHash> pairs_;
};

}  // namespace lsrt
