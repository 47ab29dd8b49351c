#include <gtest/gtest.h>

#include <deque>
#include <random>

#include "lsrt/clusters.hpp"

using namespace lsrt;

namespace {

Mode mode(int n, std::initializer_list<int> m) {
  Mode v;
  v.n = n;
  int i = 0;
  for (int x : m) v.m[i++] = x;
  return v;
}

// Independent oracle: explicit adjacency matrix and breadth-first search.
std::set<std::set<Mode>> bfs_classes(const std::vector<Mode>& modes, double beta, double C2) {
  const std::size_t n = modes.size();
  std::vector<std::vector<bool>> adj(n, std::vector<bool>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      int d = 0;
      d += std::abs(modes[i].n - modes[j].n);
      for (int k = 0; k < kMaxDim; ++k) d += std::abs(modes[i].m[k] - modes[j].m[k]);
      adj[i][j] = d <= 0.5 * C2 * std::pow(modes[i].size() + modes[j].size(), beta) + 1e-12;
    }
  std::vector<bool> seen(n);
  std::set<std::set<Mode>> out;
  for (std::size_t s = 0; s < n; ++s) {
    if (seen[s]) continue;
    std::set<Mode> comp;
    std::deque<std::size_t> q{s};
    seen[s] = true;
    while (!q.empty()) {
      auto v = q.front();
      q.pop_front();
      comp.insert(modes[v]);
      for (std::size_t w = 0; w < n; ++w)
        if (adj[v][w] && !seen[w]) {
          seen[w] = true;
          q.push_back(w);
        }
    }
    out.insert(comp);
  }
  return out;
}

std::set<std::set<Mode>> as_sets(const ClusterPartition& p) {
  std::set<std::set<Mode>> out;
  for (const auto& c : p.classes) out.insert(std::set<Mode>(c.begin(), c.end()));
  return out;
}

EquationSpec nls() {
  auto s = cubic_spec(Family::NLS, 2, 0.3);
  return s;
}

}  // namespace

TEST(Partition, FarModesAreSingletons) {
  auto p = group_modes({mode(1, {1, 1}), mode(20, {5, 5})}, 0.25, 1.0);
  ASSERT_EQ(p.classes.size(), 2u);
  EXPECT_EQ(p.classes[0].size(), 1u);
  EXPECT_EQ(p.p[0], 3);
}

TEST(Partition, MatchesBfsOracle) {
  auto s = nls();
  for (double C2 : {1.0, 2.0, 4.0}) {
    auto part = partition(s, 1e-3, 30, 0.25, C2);
    auto modes = small_modes(s, active_shell(s, 30), 1e-3);
    EXPECT_EQ(as_sets(part), bfs_classes(modes, 0.25, C2)) << "C2=" << C2;
    for (const auto& c : part.classes)
      for (const auto& nu : c) EXPECT_LT(std::abs(eigenvalue(s, nu, 1e-3)), 0.5);
  }
}

TEST(Partition, PermutationInvariant) {
  auto s = nls();
  auto modes = small_modes(s, active_shell(s, 30), 1e-3);
  auto ref = group_modes(modes, 0.25, 2.0);
  std::mt19937 rng(1);
  for (int t = 0; t < 5; ++t) {
    std::shuffle(modes.begin(), modes.end(), rng);
    auto p = group_modes(modes, 0.25, 2.0);
    EXPECT_EQ(p.fingerprint(2), ref.fingerprint(2));
    EXPECT_EQ(p.p, ref.p);
  }
  EXPECT_TRUE(std::is_sorted(ref.p.begin(), ref.p.end()));
}

TEST(Closure, SingletonAndContainment) {
  auto s = nls();
  auto grid = uniform_grid(s.eps0, 21);
  auto part = partition(s, 1e-3, 20, 0.25, 1.0);
  const Mode nu = part.classes.front().front();
  auto cl = closure(s, {{nu}, 1e-3}, 1e-3, 0.2, 20, grid, 0.25, 1.0);
  if (std::abs(eigenvalue(s, nu, 1e-3)) < 0.2) {
    ASSERT_EQ(cl.Cbar.size(), 1u);
    EXPECT_EQ(cl.Cbar[0], nu);
  }
  EXPECT_THROW(closure(s, {{nu}, 1e-3}, 1e-3, 0.6, 20, grid, 0.25, 1.0), Error);
}

TEST(Closure, StaysInsideTheContainingClass) {
  auto s = nls();
  auto grid = uniform_grid(s.eps0, 11);
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> gi(0, 10);
  for (int t = 0; t < 100; ++t) {
    double e = grid[gi(rng)];
    auto part = partition(s, e, 16, 0.25, 2.0);
    if (part.classes.empty()) continue;
    std::uniform_int_distribution<std::size_t> ci(0, part.classes.size() - 1);
    const auto& cls = part.classes[ci(rng)];
    std::uniform_int_distribution<std::size_t> mi(0, cls.size() - 1);
    ResonantSet set{{cls[mi(rng)]}, e};
    auto cl = closure(s, set, e, 0.2, 16, grid, 0.25, 2.0);
    for (const auto& nu : cl.Cbar) EXPECT_TRUE(std::binary_search(cls.begin(), cls.end(), nu));
  }
}

TEST(Closure, RejectsNonResonantSet) {
  auto s = nls();
  auto grid = uniform_grid(s.eps0, 11);
  ResonantSet set{{mode(0, {1, 1})}, 1e-3};  // delta = 2.3
  EXPECT_THROW(closure(s, set, 1e-3, 0.2, 10, grid, 0.25, 1.0), Error);
}

TEST(Separation, SingletonsPass) {
  auto p = group_modes({mode(1, {1, 1}), mode(20, {5, 5})}, 0.25, 1.0);
  auto rep = separation_report(p, 0.5);
  EXPECT_TRUE(rep.ok);
  EXPECT_LE(rep.C1, 1.0);
}

TEST(Separation, NlsShellRadius30) {
  auto s = nls();
  s.mu = golden_mu();
  for (double e : {0.0, 1e-3, 5e-3, 1e-2}) {
    auto rep = separation_report(partition(s, e, 30, 0.25, 1.0), 0.5);
    EXPECT_TRUE(rep.ok) << rep.witness;
  }
}

TEST(Separation, DenseSpectrumViolates) {
  auto s = cubic_spec(Family::NLS, 2, 0.0, Boundary::Periodic);
  auto rep = separation_report(partition(s, 0.0, 20, 0.25, 4.0), 0.5, 4.0);
  EXPECT_FALSE(rep.ok);
  EXPECT_FALSE(rep.witness.empty());
}

TEST(Stability, BreakpointsSitAtAnalyticCrossings) {
  auto s = nls();
  s.mu = golden_mu();
  auto grid = uniform_grid(s.eps0, 1000);
  auto scan = stability_scan(s, 20, grid, 0.25, 1.0);
  std::vector<double> crossings;
  for (const auto& nu : active_shell(s, 20)) {
    double a = eigenvalue(s, nu, 0.0), sl = eigenvalue_slope(s, nu);
    if (sl == 0) continue;
    for (double target : {-0.5, 0.5}) {
      double e = (target - a) / sl;
      if (e > 0 && e < s.eps0) crossings.push_back(e);
    }
  }
  ASSERT_FALSE(scan.empty());
  EXPECT_LE(scan.size() - 1, crossings.size());
  const double h = grid[1] - grid[0];
  for (std::size_t i = 1; i < scan.size(); ++i) {
    double lo = scan[i - 1].hi, hi = scan[i].lo;
    bool found = false;
    for (double c : crossings) found = found || (c >= lo - 1e-15 && c <= hi + 1e-15);
    EXPECT_TRUE(found);
    EXPECT_LE(hi - lo, h * (1 + 1e-9));
  }
}

TEST(Stability, EmptyOGivesOneInterval) {
  auto s = nls();
  auto scan = stability_scan(s, 2, uniform_grid(s.eps0, 50), 0.25, 1.0);
  ASSERT_EQ(scan.size(), 1u);
  EXPECT_DOUBLE_EQ(scan[0].lo, 0.0);
  EXPECT_DOUBLE_EQ(scan[0].hi, s.eps0);
}
