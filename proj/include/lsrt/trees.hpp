#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "lsrt/series.hpp"

namespace lsrt {

// Stands in for the unlabelled scale of the root line and of the special end line.
constexpr int kInfScale = 1 << 20;

enum class LineKind { End, P, Q, R };
enum class NodeKind { End, Branch, Special };

struct TreeNode;
using Sub = std::shared_ptr<const TreeNode>;

struct OneLine {
  Mode nu, nup;
  int h;
};

// A node together with the line exiting it; children are the subtrees entering it.
struct TreeNode {
  NodeKind kind = NodeKind::End;
  int order = 0;  // k of the subtree
  int k_v = 0;
  int sigma_v = 1;
  Mode nu_v;  // end nodes
  IVec m_v{};
  double comb = 1;  // r!/prod mult! s!/prod mult!
  LineKind line = LineKind::End;
  int i = 0, h = -1, sigma_l = 1;
  Mode nu, nup;
  bool root = false;  // root line of a resonance-family tree, propagator chibar1(delta_nup)
  std::vector<Sub> children;

  bool special = false;  // subtree contains the special end node
  int hmax = -2;         // max scale over lines of the subtree, special and root lines excluded
  std::vector<OneLine> ones;
  cplx value = 0;
  std::uint64_t hash = 0;
  int nodes = 1;
};

inline int line_scale(const TreeNode& v) {
  if (v.kind == NodeKind::Special || v.root) return kInfScale;
  return v.line == LineKind::P && v.i == 1 ? v.h : -1;
}

inline std::uint64_t mix64(std::uint64_t h, std::uint64_t v) {
  std::uint64_t z = h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Structural hash, independent of the order of children.
inline std::uint64_t node_hash(const TreeNode& v) {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(v.kind), static_cast<std::uint64_t>(v.sigma_v + 2));
  h = mix64(h, v.nu_v.key());
  for (int x : v.m_v) h = mix64(h, static_cast<std::uint64_t>(x + 4096));
  h = mix64(h, static_cast<std::uint64_t>(v.line));
  h = mix64(h, static_cast<std::uint64_t>(v.i));
  h = mix64(h, static_cast<std::uint64_t>(v.h + 8));
  h = mix64(h, static_cast<std::uint64_t>(v.sigma_l + 2));
  h = mix64(h, v.nu.key());
  h = mix64(h, v.nup.key());
  h = mix64(h, v.root ? 1 : 0);
  std::vector<std::uint64_t> ch;
  for (const auto& c : v.children) ch.push_back(c->hash);
  std::sort(ch.begin(), ch.end());
  for (auto c : ch) h = mix64(h, c);
  return h;
}

inline cplx conj_if(cplx a, int sigma) { return sigma > 0 ? a : std::conj(a); }

inline cplx line_propagator(const SeriesContext& ctx, const TreeNode& v) {
  switch (v.kind) {
    case NodeKind::End:
      return 1.0;
    case NodeKind::Special:
      return ctx.scales().chibar1(ctx.delta(v.nu));
    case NodeKind::Branch:
      break;
  }
  if (v.root) return ctx.scales().chibar1(ctx.delta(v.nup));
  switch (v.line) {
    case LineKind::R:
      return 1.0 / ctx.delta(v.nu);
    case LineKind::Q:
      return ctx.jplus(v.nu, v.sigma_l, v.nup, v.sigma_v);
    case LineKind::P:
      return propagator(ctx.blocks(), ctx.scales(), v.nu, v.nup, v.sigma_l, v.sigma_v, {v.h, v.i});
    case LineKind::End:
      break;
  }
  fail("labels-inadmissible", "branch node with an end line");
}

// sum of a^{sigma}_{r,s,m} over matching terms
inline cplx node_coefficient(const EquationSpec& spec, int r, int s, const IVec& m, int sigma) {
  cplx a = 0;
  for (const auto& t : spec.terms)
    if (t.r == r && t.s == s && t.m == m) a += conj_if(t.a, sigma);
  return a;
}

inline double factorial(int n) {
  double f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

// r!/prod mult! s!/prod mult!, multiplicities of structurally equal children in each sign group.
inline double multiset_factor(const std::vector<Sub>& children, int sigma_v) {
  std::map<std::uint64_t, int> same, opp;
  int r = 0, s = 0;
  for (const auto& c : children) {
    if (c->sigma_l == sigma_v) {
      ++same[c->hash];
      ++r;
    } else {
      ++opp[c->hash];
      ++s;
    }
  }
  double f = factorial(r) * factorial(s);
  for (auto [k, n] : same) f /= factorial(n);
  for (auto [k, n] : opp) f /= factorial(n);
  return f;
}

inline bool scale_difference_ok(const SeriesContext& ctx, const OneLine& a, const OneLine& b) {
  if (std::abs(a.h - b.h) <= 1) return true;
  return !ctx.resonance().set({a.nu, a.nup, b.nu, b.nup});
}

inline void collect_ones(const TreeNode& v, std::vector<OneLine>& out) {
  if (v.kind == NodeKind::Branch && !v.root && v.line == LineKind::P && v.i == 1) out.push_back({v.nu, v.nup, v.h});
  for (const auto& c : v.children) collect_ones(*c, out);
}

namespace detail {

inline cplx value_rec(const SeriesContext& ctx, const TreeNode& v) {
  const auto& spec = ctx.spec();
  switch (v.kind) {
    case NodeKind::End:
      if (v.line != LineKind::End || v.nu != v.nu_v || v.sigma_l != v.sigma_v || ctx.label(v.nu_v) != SetLabel::Q)
        fail("labels-inadmissible", "end node labels");
      return v.sigma_v > 0 ? ctx.q0().get(v.nu_v) : std::conj(ctx.q0().get(v.nu_v));
    case NodeKind::Special:
      return line_propagator(ctx, v);
    case NodeKind::Branch:
      break;
  }
  const int p = static_cast<int>(v.children.size());
  if (p < spec.N + 1) fail("labels-inadmissible", "branching number");
  Mode mom;
  mom.m = v.m_v;
  int r = 0;
  for (const auto& c : v.children) {
    mom = mom + c->nu.scaled(v.sigma_v * c->sigma_l);
    r += c->sigma_l == v.sigma_v;
  }
  if (mom != v.nup) fail("labels-inadmissible", "momentum conservation");
  if (v.i == 0 && v.h != -1 && !v.root) fail("labels-inadmissible", "type 0 line with a scale");
  if (!v.root) {
    if ((v.line == LineKind::R || (v.line == LineKind::P && v.i == 0)) && (v.nu != v.nup || v.sigma_l != v.sigma_v))
      fail("labels-inadmissible", "diagonal line");
    if (v.line == LineKind::Q && (ctx.label(v.nu) != SetLabel::Q || ctx.label(v.nup) != SetLabel::Q))
      fail("labels-inadmissible", "q-line momenta");
  }
  cplx val = line_propagator(ctx, v) * node_coefficient(spec, r, p - r, v.m_v, v.sigma_v) *
             multiset_factor(v.children, v.sigma_v);
  for (const auto& c : v.children) {
    if (val == cplx{}) break;
    val *= value_rec(ctx, *c);
  }
  return val;
}

}  // namespace detail

// Product of line propagators and node factors, evaluated from the labels alone.
// Label assignments breaking the scale-difference rule contribute 0.
inline cplx tree_value(const SeriesContext& ctx, const TreeNode& root) {
  std::vector<OneLine> ones;
  collect_ones(root, ones);
  for (std::size_t a = 0; a < ones.size(); ++a)
    for (std::size_t b = a + 1; b < ones.size(); ++b)
      if (!scale_difference_ok(ctx, ones[a], ones[b])) return 0.0;
  return detail::value_rec(ctx, root);
}

// Resonance whose exiting line is the line exiting v (all conditions of the resonance definition).
inline std::optional<int> resonance_below(const SeriesContext& ctx, const TreeNode& v, double tau) {
  const int H = line_scale(v);
  if (v.kind != NodeKind::Branch || H == kInfScale || H < 1) return std::nullopt;
  const auto& res = ctx.resonance();
  for (int hT = -1; hT <= H - 2; ++hT) {
    std::vector<const TreeNode*> inside{&v}, entering;
    int top = -2;
    for (std::size_t q = 0; q < inside.size(); ++q)
      for (const auto& c : inside[q]->children) {
        const int sc = line_scale(*c);
        if (sc <= hT) {
          top = std::max(top, sc);
          inside.push_back(c.get());
        } else {
          entering.push_back(c.get());
        }
      }
    if (top != hT || entering.size() != 1) continue;
    const TreeNode& l1 = *entering.front();
    if (line_scale(l1) < hT + 2) continue;
    if (!res.pair(v.nup, l1.nu)) continue;
    if (std::min(l1.nu.size(), v.nup.size()) < std::pow(2.0, (hT - 2) / tau)) continue;
    bool ok = true;
    for (std::size_t q = 1; q < inside.size() && ok; ++q) {
      const TreeNode& w = *inside[q];
      if (w.kind != NodeKind::Branch) continue;
      // path lines are those whose subtrees contain l1; both path and off-path need non-resonance (i=1 on path)
      bool on_path = false;
      std::function<bool(const TreeNode&)> contains = [&](const TreeNode& x) {
        if (&x == &l1) return true;
        for (const auto& c : x.children)
          if (contains(*c)) return true;
        return false;
      };
      on_path = contains(w);
      if (on_path && !(w.line == LineKind::P && w.i == 1)) continue;
      if (res.pair(w.nup, l1.nu)) ok = false;
    }
    if (ok) return hT;
  }
  return std::nullopt;
}

enum class TreeFamily { Theta, Resonance };

struct TreeQuery {
  TreeFamily family = TreeFamily::Theta;
  bool allow_resonances = false;  // Theta trees with resonances (still without p_v = 1 nodes)
  Mode nup;                       // resonance family: momentum of the special line
  int sigmap = 1;                 // resonance family: its sign
};

struct TreeRecord {
  Sub tree;
  int h = -1;  // resonance family: max scale over lines other than the root and special lines
  Mode nu;     // root momentum (nu_l0 for Theta, nu'_l0 for resonance trees)
  int sigma = 1;
};

// Bottom-up enumeration of renormalized trees in multiset-canonical form.
class TreeEnumerator {
 public:
  TreeEnumerator(const SeriesContext& ctx, int K_tree = -1, double J_cut = 1e-13)
      : ctx_(ctx), K_tree_(K_tree < 0 ? ctx.spec().N + 4 : K_tree), J_cut_(J_cut) {
    require_case_one(ctx.spec());
  }

  int K_tree() const { return K_tree_; }

  void visit(int k, const TreeQuery& q, const std::function<void(const TreeRecord&)>& f) {
    if (k > K_tree_) fail("order-cap", "k = " + std::to_string(k) + " exceeds " + std::to_string(K_tree_));
    if (k < 1) return;
    q_ = q;
    pool_.assign(2, std::vector<std::vector<std::vector<Sub>>>(2, std::vector<std::vector<Sub>>(k + 1)));
    build_leaves();
    // kernel nodes of order zero exist only above the special end
    if (resonance_family())
      build_order(0, true, [&](Sub s) {
        if (s->special) store(s);
      });
    for (int o = 1; o < k; ++o) {
      build_order(o, false, [&](Sub s) { store(s); });
      build_order(o, true, [&](Sub s) { store(s); });
    }
    if (q.family == TreeFamily::Theta) {
      std::vector<Sub> top;
      build_order(k, false, [&](Sub s) {
        store(s);
        top.push_back(s);
      });
      for (const auto& s : top) f({s, -1, s->nu, s->sigma_l});
      build_order(k, true, [&](Sub s) { f({s, -1, s->nu, s->sigma_l}); });
    } else {
      build_roots(k, f);
    }
  }

  std::vector<TreeRecord> enumerate(int k, const TreeQuery& q) {
    std::vector<TreeRecord> out;
    visit(k, q, [&](const TreeRecord& r) { out.push_back(r); });
    return out;
  }

 private:
  const SeriesContext& ctx_;
  int K_tree_;
  double J_cut_;
  TreeQuery q_;
  // [special][sign index][order]
  std::vector<std::vector<std::vector<std::vector<Sub>>>> pool_;

  bool resonance_family() const { return q_.family == TreeFamily::Resonance; }

  void store(const Sub& s) { pool_[s->special][sigma_index(s->sigma_l)][s->order].push_back(s); }

  void finish(TreeNode& v) {
    v.special = v.kind == NodeKind::Special;
    v.hmax = v.kind == NodeKind::Special || v.root ? -2 : line_scale(v);
    v.nodes = 1;
    for (const auto& c : v.children) {
      v.special = v.special || c->special;
      v.hmax = std::max(v.hmax, c->hmax);
      v.nodes += c->nodes;
      v.ones.insert(v.ones.end(), c->ones.begin(), c->ones.end());
    }
    if (v.kind == NodeKind::Branch && !v.root && v.line == LineKind::P && v.i == 1) v.ones.push_back({v.nu, v.nup, v.h});
    v.hash = node_hash(v);
  }

  void build_leaves() {
    for (const auto& [nu, z] : ctx_.q0().nonzeros())
      for (int s : {1, -1}) {
        auto v = std::make_shared<TreeNode>();
        v->kind = NodeKind::End;
        v->nu_v = v->nu = nu;
        v->sigma_v = v->sigma_l = s;
        v->value = s > 0 ? z : std::conj(z);
        finish(*v);
        store(v);
      }
    if (resonance_family()) {
      auto v = std::make_shared<TreeNode>();
      v->kind = NodeKind::Special;
      v->line = LineKind::P;
      v->i = 1;
      v->h = kInfScale;
      v->nu = q_.nup;
      v->sigma_l = q_.sigmap;
      v->value = ctx_.scales().chibar1(ctx_.delta(q_.nup));
      finish(*v);
      if (v->value != cplx{}) store(v);
    }
  }

  struct Core {
    std::vector<Sub> children;
    int sigma_v;
    IVec m;
    cplx coef;
    double comb;
    int order, k_v;
    Mode mom;
  };

  // All branch nodes of subtree order o whose exit is a q-line (exitQ) or not.
  template <class F>
  void for_each_core(int o, bool exitQ, bool need_special, F&& emit) {
    const auto& spec = ctx_.spec();
    const int N = spec.N;
    for (const auto& t : spec.terms) {
      const int p = t.r + t.s;
      const int kv = exitQ ? p - 1 - N : p - 1;
      if (p < N + 1 || kv < 0 || kv > o || t.a == cplx{}) continue;
      const int budget = o - kv;
      for (int sv : {1, -1}) {
        std::vector<Sub> chosen;
        const int groups[2] = {t.r, t.s};
        const int gsign[2] = {sv, -sv};
        std::function<void(int, int, int, int, int, int)> rec = [&](int g, int left, int remaining, int lastb,
                                                                    int lasti, int specials) {
          if (g == 2) {
            if (remaining != 0) return;
            if (need_special && specials != 1) return;
            Mode mom;
            mom.m = t.m;
            for (const auto& c : chosen) mom = mom + c->nu.scaled(sv * c->sigma_l);
            if (mom.size() > ctx_.Lambda()) return;
            if ((ctx_.label(mom) == SetLabel::Q) != exitQ) return;
            double comb = 1;
            int i = 0;
            for (int gg = 0; gg < 2; ++gg) {
              comb *= factorial(groups[gg]);
              int run = 1;
              for (int j = 1; j <= groups[gg]; ++j) {
                if (j < groups[gg] && chosen[i + j] == chosen[i + j - 1]) {
                  ++run;
                } else {
                  comb /= factorial(run);
                  run = 1;
                }
              }
              i += groups[gg];
            }
            emit(Core{chosen, sv, t.m, conj_if(t.a, sv), comb, o, kv, mom});
            return;
          }
          if (left == 0) {
            rec(g + 1, g + 1 < 2 ? groups[g + 1] : 0, remaining, 0, 0, specials);
            return;
          }
          const int si = sigma_index(gsign[g]);
          const int nb = 2 * (remaining + 1);
          for (int b = lastb; b < nb; ++b) {
            const int ord = b / 2, sp = b % 2;
            if (ord * left > remaining) break;
            if (sp && (!resonance_family() || specials)) continue;
            if (ord >= static_cast<int>(pool_[sp][si].size())) continue;
            const auto& pool = pool_[sp][si][ord];
            for (std::size_t j = b == lastb ? lasti : 0; j < pool.size(); ++j) {
              const auto& c = pool[j];
              if (exitQ && ord == o && c->line == LineKind::Q) continue;
              chosen.push_back(c);
              rec(g, left - 1, remaining - ord, b, static_cast<int>(j), specials + sp);
              chosen.pop_back();
            }
          }
        };
        rec(0, groups[0], budget, 0, 0, 0);
      }
    }
  }

  bool admissible_line(TreeNode& v) {
    std::size_t n = v.ones.size();
    if (v.kind == NodeKind::Branch && !v.root && v.line == LineKind::P && v.i == 1) {
      for (std::size_t a = 0; a + 1 < n; ++a)
        if (!scale_difference_ok(ctx_, v.ones[a], v.ones.back())) return false;
    }
    if (!q_.allow_resonances && resonance_below(ctx_, v, ctx_.options().ms.tau)) return false;
    if (resonance_family() && !v.special && v.line != LineKind::End && ctx_.resonance().pair(v.nup, q_.nup))
      return false;
    return true;
  }

  // Cross-children scale-difference check (pairs inside one child were checked already).
  bool children_compatible(const std::vector<Sub>& ch) {
    for (std::size_t a = 0; a < ch.size(); ++a)
      for (std::size_t b = a + 1; b < ch.size(); ++b)
        for (const auto& x : ch[a]->ones)
          for (const auto& y : ch[b]->ones)
            if (!scale_difference_ok(ctx_, x, y)) return false;
    return true;
  }

  template <class F>
  void attach(const Core& c, F&& out) {
    auto base = [&]() {
      auto v = std::make_shared<TreeNode>();
      v->kind = NodeKind::Branch;
      v->order = c.order;
      v->k_v = c.k_v;
      v->sigma_v = c.sigma_v;
      v->m_v = c.m;
      v->comb = c.comb;
      v->children = c.children;
      v->nup = c.mom;
      return v;
    };
    cplx inner = c.coef * c.comb;
    for (const auto& ch : c.children) inner *= ch->value;
    auto emit = [&](std::shared_ptr<TreeNode> v, cplx g) {
      if (g == cplx{}) return;
      v->value = g * inner;
      finish(*v);
      if (!admissible_line(*v)) return;
      out(Sub(v));
    };
    const Mode& mom = c.mom;
    const SetLabel lab = ctx_.label(mom);
    if (lab == SetLabel::Q) {
      for (const auto& qm : ctx_.Q())
        for (int sl : {1, -1}) {
          const cplx g = ctx_.jplus(qm, sl, mom, c.sigma_v);
          if (std::abs(g) <= J_cut_) continue;
          auto v = base();
          v->line = LineKind::Q;
          v->nu = qm;
          v->sigma_l = sl;
          emit(v, g);
        }
      return;
    }
    const bool on_path_resonant = resonance_family() && std::any_of(c.children.begin(), c.children.end(),
                                                                      [](const Sub& s) { return s->special; }) &&
                                  ctx_.resonance().pair(mom, q_.nup);
    if (!ctx_.small(mom) || on_path_resonant) {
      auto v = base();
      v->line = lab == SetLabel::R ? LineKind::R : LineKind::P;
      v->nu = mom;
      v->sigma_l = c.sigma_v;
      emit(v, lab == SetLabel::R ? 1.0 / ctx_.delta(mom)
                                 : propagator(ctx_.blocks(), ctx_.scales(), mom, mom, c.sigma_v, c.sigma_v, {-1, 0}));
      return;
    }
    const auto& B = ctx_.blocks().block(mom);
    for (int h : ctx_.scales().scales(B.x)) {
      for (const auto& nu : B.modes)
        for (int sl : {1, -1}) {
          const cplx g = propagator(ctx_.blocks(), ctx_.scales(), nu, mom, sl, c.sigma_v, {h, 1});
          if (g == cplx{}) continue;
          if (!ctx_.resonance().pair(nu, mom)) continue;
          auto v = base();
          v->line = LineKind::P;
          v->i = 1;
          v->h = h;
          v->nu = nu;
          v->sigma_l = sl;
          emit(v, g);
        }
    }
  }

  template <class F>
  void build_order(int o, bool exitQ, F&& out) {
    for_each_core(o, exitQ, false, [&](const Core& c) {
      if (!children_compatible(c.children)) return;
      attach(c, out);
    });
  }

  void build_roots(int k, const std::function<void(const TreeRecord&)>& f) {
    const double tau = ctx_.options().ms.tau;
    for_each_core(k, false, true, [&](const Core& c) {
      const Mode& nu = c.mom;
      if (!ctx_.small(nu) || !ctx_.resonance().pair(nu, q_.nup)) return;
      if (!children_compatible(c.children)) return;
      auto v = std::make_shared<TreeNode>();
      v->kind = NodeKind::Branch;
      v->order = c.order;
      v->k_v = c.k_v;
      v->sigma_v = c.sigma_v;
      v->m_v = c.m;
      v->comb = c.comb;
      v->children = c.children;
      v->nup = nu;
      v->line = LineKind::P;
      v->i = 1;
      v->h = kInfScale;
      v->root = true;
      cplx val = c.coef * c.comb * ctx_.scales().chibar1(ctx_.delta(nu));
      for (const auto& ch : c.children) val *= ch->value;
      v->value = val;
      finish(*v);
      const int h = v->hmax;
      if (std::min(nu.size(), q_.nup.size()) < std::pow(2.0, (h - 2) / tau)) return;
      f({Sub(v), h, nu, c.sigma_v});
    });
  }
};

// Sums of resonance-family values: order r -> scale h' -> (nu, nu') -> sigma block.
using ResonanceSums = std::map<int, std::map<int, BlockMatrix>>;

inline ResonanceSums resonance_sums(const SeriesContext& ctx, int kmin, int kmax, int K_tree = -1) {
  TreeEnumerator en(ctx, K_tree);
  ResonanceSums out;
  for (const auto& B : ctx.blocks().blocks())
    for (const auto& nup : B.modes)
      for (int sp : {1, -1}) {
        TreeQuery q;
        q.family = TreeFamily::Resonance;
        q.nup = nup;
        q.sigmap = sp;
        for (int k = kmin; k <= kmax; ++k)
          en.visit(k, q, [&](const TreeRecord& r) {
            SigmaBlock b = SigmaBlock::Zero();
            b(sigma_index(r.sigma), sigma_index(sp)) = r.tree->value;
            out[k][r.h].add(r.nu, nup, b);
          });
      }
  return out;
}

// L^{(r)}_{h,h1} = -sum_{h' <= min(h,h1)-2} sum over resonance-family trees.
inline Counterterms counterterms_from_sums(const SeriesContext& ctx, const ResonanceSums& sums) {
  Counterterms L;
  for (const auto& [r, byh] : sums) {
    std::map<std::pair<Mode, Mode>, std::vector<std::pair<int, SigmaBlock>>> entries;
    for (const auto& [hp, M] : byh)
      for (const auto& [key, blk] : M.entries()) entries[key].emplace_back(hp, blk);
    for (const auto& [key, list] : entries) {
      const auto hs = ctx.scales().scales(ctx.x(key.first));
      const auto hs1 = ctx.scales().scales(ctx.x(key.second));
      for (int h : hs)
        for (int h1 : hs1) {
          SigmaBlock s = SigmaBlock::Zero();
          for (const auto& [hp, blk] : list)
            if (hp <= std::min(h, h1) - 2) s -= blk;
          if (s.cwiseAbs().maxCoeff() > 0) L.by_order[r][{h, h1}].add(key.first, key.second, s);
        }
    }
  }
  return L;
}

inline Counterterms counterterms(const SeriesContext& ctx, int kmax, int K_tree = -1) {
  return counterterms_from_sums(ctx, resonance_sums(ctx, ctx.spec().N, kmax, K_tree));
}

// Assembled L^{(r)} = sum_{h,h1} chi_h(x_nu) chi_{h1}(x_nu') L^{(r)}_{h,h1}.
inline BlockMatrix assembled_counterterm(const SeriesContext& ctx, const Counterterms& L, int r) {
  return L.assembled(r, [&](int h, const Mode& nu) { return ctx.chi(h, nu); });
}

// Per-order tree sums over Theta_R keyed by root (nu, sigma).
inline std::map<std::pair<Mode, int>, cplx> theta_sums(const SeriesContext& ctx, int k, std::size_t* count = nullptr,
                                                       int K_tree = -1) {
  TreeEnumerator en(ctx, K_tree);
  std::map<std::pair<Mode, int>, cplx> out;
  std::size_t n = 0;
  en.visit(k, TreeQuery{}, [&](const TreeRecord& r) {
    out[{r.nu, r.sigma}] += r.tree->value;
    ++n;
  });
  if (count) *count = n;
  return out;
}

// Path reversal: root and special end swap roles, signs shift down the path.
inline Sub reverse_path(const SeriesContext& ctx, const Sub& theta) {
  if (!theta || !theta->root || !theta->special) fail("not-in-R", "tree is not a resonance-family tree");
  std::vector<const TreeNode*> path{theta.get()};
  while (path.back()->kind != NodeKind::Special) {
    const TreeNode* nxt = nullptr;
    for (const auto& c : path.back()->children)
      if (c->special) nxt = c.get();
    if (!nxt) fail("not-in-R", "no special end node");
    path.push_back(nxt);
  }
  // path[0] = v0, ..., path[n-1] = v_N, path[n] = e
  const int n = static_cast<int>(path.size()) - 1;
  std::shared_ptr<TreeNode> below;  // new subtree rooted at reversed v_{j-1}
  auto rebuild = [&](std::shared_ptr<TreeNode>& v) {
    const int p = static_cast<int>(v->children.size());
    int r = 0;
    v->k_v = p - 1 - (v->line == LineKind::Q && !v->root ? ctx.spec().N : 0);
    v->order = v->k_v;
    v->special = false;
    v->hmax = v->root ? -2 : line_scale(*v);
    v->nodes = 1;
    v->ones.clear();
    for (const auto& c : v->children) {
      r += c->sigma_l == v->sigma_v;
      v->order += c->order;
      v->special = v->special || c->special;
      v->hmax = std::max(v->hmax, c->hmax);
      v->nodes += c->nodes;
      v->ones.insert(v->ones.end(), c->ones.begin(), c->ones.end());
    }
    if (!v->root && v->line == LineKind::P && v->i == 1) v->ones.push_back({v->nu, v->nup, v->h});
    v->comb = multiset_factor(v->children, v->sigma_v);
    cplx val = line_propagator(ctx, *v) * node_coefficient(ctx.spec(), r, p - r, v->m_v, v->sigma_v) * v->comb;
    for (const auto& c : v->children) val *= c->value;
    v->value = val;
    v->hash = node_hash(*v);
  };
  for (int j = 0; j < n; ++j) {
    const TreeNode& old = *path[j];
    const TreeNode& next = *path[j + 1];  // l_{j+1} exits next
    auto v = std::make_shared<TreeNode>(old);
    v->children.clear();
    for (const auto& c : old.children)
      if (c.get() != &next) v->children.push_back(c);
    v->sigma_v = -next.sigma_l;
    for (int d = 0; d < kMaxDim; ++d) v->m_v[d] = -old.sigma_v * next.sigma_l * old.m_v[d];
    if (j == 0) {
      auto e = std::make_shared<TreeNode>();
      e->kind = NodeKind::Special;
      e->line = LineKind::P;
      e->i = 1;
      e->h = kInfScale;
      e->nu = old.nup;
      e->sigma_l = -old.sigma_v;
      e->special = true;
      e->value = ctx.scales().chibar1(ctx.delta(e->nu));
      e->hash = node_hash(*e);
      v->children.push_back(e);
    } else {
      v->children.push_back(below);
    }
    v->root = false;
    if (j + 1 < n) {
      // v now exits through the reversed l_{j+1}
      v->line = next.line;
      v->i = next.i;
      v->h = next.h;
      v->sigma_l = -next.sigma_v;
      v->nu = next.nup;
      v->nup = next.nu;
    } else {
      v->root = true;
      v->line = LineKind::P;
      v->i = 1;
      v->h = kInfScale;
      v->sigma_l = 1;
      v->nu = Mode{};
      v->nup = next.nu;
    }
    rebuild(v);
    below = v;
  }
  return below;
}

struct Census {
  std::map<int, int> N;  // h -> number of i=1 lines with scale >= h
  int K = 0;
};

inline Census scale_census(const TreeNode& root) {
  Census c;
  std::vector<int> scales;
  int msum = 0, qsum = 0, esum = 0;
  std::function<void(const TreeNode&)> walk = [&](const TreeNode& v) {
    if (v.kind == NodeKind::End) esum += v.nu_v.size();
    if (v.kind == NodeKind::Branch) {
      msum += l1(v.m_v);
      if (!v.root && v.line == LineKind::P && v.i == 1) scales.push_back(v.h);
      if (!v.root && v.line == LineKind::Q) qsum += (v.nu - v.nup).size();
    }
    for (const auto& ch : v.children) walk(*ch);
  };
  walk(root);
  c.K = root.order + msum + qsum + esum;
  int hmax = -1;
  for (int h : scales) hmax = std::max(hmax, h);
  for (int h = -1; h <= hmax; ++h) {
    int n = 0;
    for (int s : scales) n += s >= h;
    c.N[h] = n;
  }
  return c;
}

struct BoundFit {
  double c = 0;   // smallest c with N_h <= max{0, c K 2^{(2-h) beta / 2 tau} - 1}
  bool finite = true;
  std::size_t trees = 0, lines = 0;
};

inline void bound_fit_add(BoundFit& fit, const Census& c, double beta, double tau) {
  ++fit.trees;
  for (auto [h, n] : c.N) {
    if (h < 0 || n == 0) continue;
    fit.lines += n;
    const double need = (n + 1.0) / (c.K * std::pow(2.0, (2.0 - h) * beta / (2 * tau)));
    fit.c = std::max(fit.c, need);
  }
  fit.finite = std::isfinite(fit.c);
}

inline bool bound_check(const Census& c, double cc, double beta, double tau) {
  for (auto [h, n] : c.N) {
    if (h < 0) continue;
    if (n > std::max(0.0, cc * c.K * std::pow(2.0, (2.0 - h) * beta / (2 * tau)) - 1) + 1e-12) return false;
  }
  return true;
}

// Resonance-family trees with the extra scale label of the root line (value unchanged).
struct STree {
  TreeRecord rec;
  int h0 = -1;
};

inline std::vector<STree> enumerate_S(const SeriesContext& ctx, int k, int h, const Mode& nu, const Mode& nup, int sigma,
                                      int sigmap, int K_tree = -1) {
  TreeEnumerator en(ctx, K_tree);
  TreeQuery q;
  q.family = TreeFamily::Resonance;
  q.nup = nup;
  q.sigmap = sigmap;
  const double tau = ctx.options().ms.tau;
  std::vector<STree> out;
  en.visit(k, q, [&](const TreeRecord& r) {
    if (r.nu != nu || r.sigma != sigma) return;
    for (int h0 = -1; h0 <= h; ++h0) {
      if (std::max(r.h, h0) != h) continue;
      if (nu.size() < std::pow(2.0, (h0 - 2) / tau)) continue;
      out.push_back({r, h0});
    }
  });
  return out;
}

// Cut a resonance out of a Theta tree: the entering line becomes the special end line.
inline Sub extract_resonance(const SeriesContext& ctx, const TreeNode& v, int hT) {
  std::function<Sub(const TreeNode&, bool)> copy = [&](const TreeNode& w, bool top) -> Sub {
    auto n = std::make_shared<TreeNode>(w);
    n->children.clear();
    for (const auto& c : w.children) {
      if (line_scale(*c) <= hT) {
        n->children.push_back(copy(*c, false));
      } else {
        auto e = std::make_shared<TreeNode>();
        e->kind = NodeKind::Special;
        e->line = LineKind::P;
        e->i = 1;
        e->h = kInfScale;
        e->nu = c->nu;
        e->sigma_l = c->sigma_l;
        e->special = true;
        e->value = ctx.scales().chibar1(ctx.delta(e->nu));
        e->hash = node_hash(*e);
        n->children.push_back(e);
      }
    }
    if (top) {
      n->root = true;
      n->line = LineKind::P;
      n->i = 1;
      n->h = kInfScale;
      n->sigma_l = 1;
      n->nu = Mode{};
    }
    n->ones.clear();
    n->special = false;
    n->hmax = n->root ? -2 : line_scale(*n);
    for (const auto& c : n->children) {
      n->special = n->special || c->special;
      n->hmax = std::max(n->hmax, c->hmax);
    }
    n->hash = node_hash(*n);
    return n;
  };
  return copy(v, true);
}

}  // namespace lsrt
