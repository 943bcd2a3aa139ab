#include "gci/discovery.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <functional>
#include <set>
#include <sstream>
#include <unordered_map>

#include <boost/math/special_functions/gamma.hpp>

#include "gci/common.hpp"

namespace gci {

std::string_view to_string(Mark mark) {
  switch (mark) {
    case Mark::tail:
      return "tail";
    case Mark::arrow:
      return "arrow";
    case Mark::circle:
      return "circle";
  }
  return "?";
}

Mark parse_mark(std::string_view text) {
  if (text == "tail") return Mark::tail;
  if (text == "arrow") return Mark::arrow;
  if (text == "circle") return Mark::circle;
  throw Error("unknown endpoint mark '" + std::string(text) + "'");
}

Pag::Pag(std::vector<std::string> nodes) : nodes_(std::move(nodes)), marks_(nodes_.size() * nodes_.size(), kNone) {}

std::optional<std::size_t> Pag::index_of(std::string_view name) const {
  auto it = std::find(nodes_.begin(), nodes_.end(), name);
  if (it == nodes_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - nodes_.begin());
}

std::size_t Pag::require(std::string_view name) const {
  if (auto i = index_of(name)) return *i;
  throw Error("unknown PAG node '" + std::string(name) + "'");
}

Mark Pag::mark_at(std::size_t at, std::size_t other) const {
  const signed char m = marks_[other * size() + at];
  if (m == kNone) throw Error("no edge between " + nodes_[at] + " and " + nodes_[other]);
  return static_cast<Mark>(m);
}

void Pag::set_mark_at(std::size_t at, std::size_t other, Mark mark) {
  if (!adjacent(at, other)) throw Error("no edge between " + nodes_[at] + " and " + nodes_[other]);
  marks_[other * size() + at] = static_cast<signed char>(mark);
}

void Pag::add_edge(std::size_t a, std::size_t b, Mark mark_a, Mark mark_b) {
  if (a == b) throw Error("self-loops are not allowed");
  marks_.at(b * size() + a) = static_cast<signed char>(mark_a);
  marks_.at(a * size() + b) = static_cast<signed char>(mark_b);
}

void Pag::remove_edge(std::size_t a, std::size_t b) {
  marks_.at(b * size() + a) = kNone;
  marks_.at(a * size() + b) = kNone;
}

std::vector<std::size_t> Pag::neighbors(std::size_t a) const {
  std::vector<std::size_t> out;
  for (std::size_t b = 0; b < size(); ++b)
    if (b != a && adjacent(a, b)) out.push_back(b);
  return out;
}

std::vector<Pag::Edge> Pag::edges() const {
  std::vector<Edge> out;
  for (std::size_t a = 0; a < size(); ++a)
    for (std::size_t b = a + 1; b < size(); ++b)
      if (adjacent(a, b)) out.push_back({a, b, mark_at(a, b), mark_at(b, a)});
  return out;
}

void SepsetMap::record(std::size_t a, std::size_t b, std::vector<std::size_t> set) {
  std::sort(set.begin(), set.end());
  map_[{std::min(a, b), std::max(a, b)}] = std::move(set);
}

const std::vector<std::size_t>* SepsetMap::find(std::size_t a, std::size_t b) const {
  auto it = map_.find({std::min(a, b), std::max(a, b)});
  return it == map_.end() ? nullptr : &it->second;
}

void DiscoveryConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("alpha must lie in (0, 1)");
}

double chi_square_upper_tail(double statistic, double df) {
  if (statistic <= 0.0) return 1.0;
  return boost::math::gamma_q(df / 2.0, statistic / 2.0);
}

CiResult ci_test(const FactorTable& table, std::size_t x, std::size_t y, std::span<const std::size_t> s,
                 const DiscoveryConfig& cfg) {
  if (table.rows() == 0) throw Error("CI test on an empty table");
  if (x == y) throw Error("CI test needs two distinct variables");
  if (std::find(s.begin(), s.end(), x) != s.end() || std::find(s.begin(), s.end(), y) != s.end())
    throw Error("CI test conditioning set contains a tested variable");
  if (s.size() > 24) throw Error("conditioning set too large");

  const std::size_t strata = std::size_t{1} << s.size();
  // counts[stratum * 4 + 2x + y]
  std::vector<std::size_t> counts(strata * 4, 0);
  const auto cx = table.column(x);
  const auto cy = table.column(y);
  for (std::size_t r = 0; r < table.rows(); ++r) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < s.size(); ++i) k |= static_cast<std::size_t>(table.at(r, s[i])) << i;
    ++counts[k * 4 + 2 * cx[r] + cy[r]];
  }

  CiResult res;
  res.df = strata;
  const std::size_t min_stratum = cfg.min_count_per_cell_multiplier * 4;
  double g2 = 0.0;
  for (std::size_t k = 0; k < strata; ++k) {
    const std::size_t* o = &counts[k * 4];
    const std::size_t n = o[0] + o[1] + o[2] + o[3];
    const std::size_t x1 = o[2] + o[3], y1 = o[1] + o[3];
    // Thin strata, or x / y constant within a stratum, carry no evidence either way.
    if (n < min_stratum || x1 == 0 || x1 == n || y1 == 0 || y1 == n) res.informative = false;
    if (n == 0) continue;
    const double rows[2] = {static_cast<double>(n - x1), static_cast<double>(x1)};
    const double cols[2] = {static_cast<double>(n - y1), static_cast<double>(y1)};
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        const double obs = static_cast<double>(o[2 * a + b]);
        if (obs == 0.0) continue;
        const double expected = rows[a] * cols[b] / static_cast<double>(n);
        g2 += obs * std::log(obs / expected);
      }
    }
  }
  res.statistic = std::max(0.0, 2.0 * g2);
  res.p_value = chi_square_upper_tail(res.statistic, static_cast<double>(res.df));
  res.independent = res.informative && res.p_value >= cfg.alpha;
  return res;
}

double local_bic(const FactorTable& table, std::size_t node, std::span<const std::size_t> parents) {
  if (std::find(parents.begin(), parents.end(), node) != parents.end())
    throw Error("a node cannot be its own parent");
  if (parents.size() > 62) throw Error("too many parents");
  const std::size_t n = table.rows();
  const auto col = table.column(node);
  double ll = 0.0;
  auto accumulate = [&ll](std::size_t n0, std::size_t n1) {
    const double total = static_cast<double>(n0 + n1);
    if (n0) ll += static_cast<double>(n0) * std::log(static_cast<double>(n0) / total);
    if (n1) ll += static_cast<double>(n1) * std::log(static_cast<double>(n1) / total);
  };
  auto config = [&](std::size_t r) {
    std::uint64_t k = 0;
    for (std::size_t i = 0; i < parents.size(); ++i) k |= static_cast<std::uint64_t>(table.at(r, parents[i])) << i;
    return k;
  };
  if (parents.size() <= 16) {
    std::vector<std::size_t> counts((std::size_t{1} << parents.size()) * 2, 0);
    for (std::size_t r = 0; r < n; ++r) ++counts[config(r) * 2 + col[r]];
    for (std::size_t k = 0; k < counts.size(); k += 2) accumulate(counts[k], counts[k + 1]);
  } else {
    std::map<std::uint64_t, std::pair<std::size_t, std::size_t>> counts;
    for (std::size_t r = 0; r < n; ++r) {
      auto& c = counts[config(r)];
      (col[r] ? c.second : c.first)++;
    }
    for (const auto& [k, c] : counts) accumulate(c.first, c.second);
  }
  const double k_params = std::ldexp(1.0, static_cast<int>(parents.size()));
  return ll - 0.5 * k_params * std::log(static_cast<double>(std::max<std::size_t>(n, 1)));
}

namespace {

class ScoreCache {
 public:
  explicit ScoreCache(const FactorTable& table) : table_(table), cache_(table.cols()) {}

  double score(std::size_t node, std::vector<std::size_t> parents) {
    std::sort(parents.begin(), parents.end());
    auto& m = cache_[node];
    auto it = m.find(parents);
    if (it != m.end()) return it->second;
    const double s = local_bic(table_, node, parents);
    m.emplace(std::move(parents), s);
    return s;
  }

 private:
  const FactorTable& table_;
  std::vector<std::map<std::vector<std::size_t>, double>> cache_;
};

enum class Move { add = 0, remove = 1, reverse = 2 };

std::vector<std::size_t> without(std::vector<std::size_t> v, std::size_t x) {
  v.erase(std::remove(v.begin(), v.end(), x), v.end());
  return v;
}

std::vector<std::size_t> with(std::vector<std::size_t> v, std::size_t x) {
  v.push_back(x);
  return v;
}

std::vector<std::vector<char>> forbidden_matrix(const std::vector<std::string>& names, const BackgroundKnowledge& bk) {
  std::vector<std::vector<char>> f(names.size(), std::vector<char>(names.size(), 0));
  for (std::size_t a = 0; a < names.size(); ++a)
    for (std::size_t b = 0; b < names.size(); ++b)
      if (a != b && bk.forbids(names[a], names[b])) f[a][b] = 1;
  return f;
}

}  // namespace

Digraph greedy_init(const FactorTable& table, const BackgroundKnowledge& bk) {
  const auto& names = table.variables();
  const std::size_t n = names.size();
  Digraph g(names);
  const auto forbid = forbidden_matrix(names, bk);
  ScoreCache cache(table);
  std::vector<double> node_score(n);
  for (std::size_t v = 0; v < n; ++v) node_score[v] = cache.score(v, {});

  struct Candidate {
    double gain;
    std::size_t from, to;
    Move move;
  };
  auto earlier = [&](const Candidate& a, const Candidate& b) {
    if (names[a.from] != names[b.from]) return names[a.from] < names[b.from];
    if (names[a.to] != names[b.to]) return names[a.to] < names[b.to];
    return a.move < b.move;
  };

  for (;;) {
    std::optional<Candidate> best;
    auto consider = [&](Candidate c) {
      if (!(c.gain > 1e-9)) return;
      if (!best) {
        best = c;
        return;
      }
      const double tol = 1e-9 * std::max(1.0, std::abs(best->gain));
      if (c.gain > best->gain + tol || (std::abs(c.gain - best->gain) <= tol && earlier(c, *best))) best = c;
    };
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const auto pa_j = g.parents(j);
        if (g.has_edge(i, j)) {
          const double drop = cache.score(j, without(pa_j, i)) - node_score[j];
          consider({drop, i, j, Move::remove});
          if (!forbid[j][i]) {
            g.remove_edge(i, j);
            const bool cyclic = g.reachable(i, j);
            g.add_edge(i, j);
            if (!cyclic) consider({drop + cache.score(i, with(g.parents(i), j)) - node_score[i], i, j, Move::reverse});
          }
        } else if (!g.has_edge(j, i) && !forbid[i][j] && !g.reachable(j, i)) {
          consider({cache.score(j, with(pa_j, i)) - node_score[j], i, j, Move::add});
        }
      }
    }
    if (!best) break;
    const auto [gain, i, j, move] = *best;
    switch (move) {
      case Move::add:
        g.add_edge(i, j);
        break;
      case Move::remove:
        g.remove_edge(i, j);
        break;
      case Move::reverse:
        g.remove_edge(i, j);
        g.add_edge(j, i);
        break;
    }
    node_score[i] = cache.score(i, g.parents(i));
    node_score[j] = cache.score(j, g.parents(j));
  }
  return g;
}

namespace {

/// Calls fn on every size-k subset of `pool` (lexicographic by position) until fn returns true.
bool for_each_subset(const std::vector<std::size_t>& pool, std::size_t k,
                     const std::function<bool(const std::vector<std::size_t>&)>& fn) {
  if (k > pool.size()) return false;
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  std::vector<std::size_t> subset(k);
  for (;;) {
    for (std::size_t i = 0; i < k; ++i) subset[i] = pool[idx[i]];
    if (fn(subset)) return true;
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == pool.size() - k + i - 1) --i;
    if (i == 0) return false;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

class PagBuilder {
 public:
  PagBuilder(const Digraph& init, const FactorTable& table, const BackgroundKnowledge& bk, const DiscoveryConfig& cfg)
      : init_(init), table_(table), cfg_(cfg), names_(table.variables()), n_(names_.size()),
        forbid_(forbidden_matrix(names_, bk)), adj_(n_, std::vector<char>(n_, 0)) {
    if (init.nodes() != names_) throw Error("initial graph nodes do not match table variables");
    for (std::size_t a = 0; a < n_; ++a)
      for (std::size_t b = 0; b < n_; ++b)
        if (init.has_edge(a, b)) adj_[a][b] = adj_[b][a] = 1;
    order_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) order_[i] = i;
    std::sort(order_.begin(), order_.end(), [this](std::size_t a, std::size_t b) { return names_[a] < names_[b]; });
  }

  DiscoveryResult run() {
    prune_adjacencies();
    Pag pag(names_);
    for (std::size_t a = 0; a < n_; ++a)
      for (std::size_t b = a + 1; b < n_; ++b)
        if (adj_[a][b]) pag.add_edge(a, b, Mark::circle, Mark::circle);
    apply_background(pag, false);
    orient_colliders(pag);
    while (rule1(pag) | rule2(pag) | rule3(pag) | rule4(pag)) {
    }
    apply_background(pag, true);
    return {std::move(pag), std::move(sepsets_)};
  }

 private:
  std::vector<std::size_t> sorted_neighbors(std::size_t v) const {
    std::vector<std::size_t> out;
    for (std::size_t w : order_)
      if (w != v && adj_[v][w]) out.push_back(w);
    return out;
  }

  bool independent(std::size_t x, std::size_t y, const std::vector<std::size_t>& s) {
    return ci_test(table_, x, y, s, cfg_).independent;
  }

  /// Searches conditioning sets drawn from the neighbors of x, then of y.
  std::optional<std::vector<std::size_t>> search_sepset(std::size_t x, std::size_t y, std::size_t depth,
                                                        const std::vector<std::size_t>& nx,
                                                        const std::vector<std::size_t>& ny) {
    std::set<std::vector<std::size_t>> tried;
    std::optional<std::vector<std::size_t>> found;
    for (const auto* pool : {&nx, &ny}) {
      const auto candidates = without(without(*pool, x), y);
      for_each_subset(candidates, depth, [&](const std::vector<std::size_t>& s) {
        auto key = s;
        std::sort(key.begin(), key.end());
        if (!tried.insert(key).second) return false;
        if (independent(x, y, s)) {
          found = s;
          return true;
        }
        return false;
      });
      if (found) break;
    }
    return found;
  }

  void prune_adjacencies() {
    for (std::size_t depth = 0; depth <= cfg_.max_cond; ++depth) {
      std::vector<std::vector<std::size_t>> nb(n_);
      for (std::size_t v = 0; v < n_; ++v) nb[v] = sorted_neighbors(v);
      bool any = false;
      for (std::size_t ia = 0; ia < n_; ++ia) {
        for (std::size_t ib = ia + 1; ib < n_; ++ib) {
          const std::size_t x = order_[ia], y = order_[ib];
          if (!adj_[x][y]) continue;
          if (nb[x].size() - 1 < depth && nb[y].size() - 1 < depth) continue;
          any = true;
          if (auto s = search_sepset(x, y, depth, nb[x], nb[y])) {
            adj_[x][y] = adj_[y][x] = 0;
            sepsets_.record(x, y, *s);
          }
        }
      }
      if (!any) break;
    }
  }

  /// Sepset of a non-adjacent pair; pairs never tested during pruning are
  /// searched on demand against the final skeleton.
  const std::vector<std::size_t>* sepset(std::size_t x, std::size_t y) {
    if (const auto* s = sepsets_.find(x, y)) return s;
    const auto key = std::make_pair(std::min(x, y), std::max(x, y));
    if (searched_.contains(key)) return nullptr;
    searched_.insert(key);
    const auto nx = sorted_neighbors(x), ny = sorted_neighbors(y);
    for (std::size_t depth = 0; depth <= cfg_.max_cond; ++depth) {
      if (auto s = search_sepset(x, y, depth, nx, ny)) {
        sepsets_.record(x, y, *s);
        return sepsets_.find(x, y);
      }
    }
    return nullptr;
  }

  void apply_background(Pag& pag, bool warn_on_change) {
    for (const auto& e : pag.edges()) {
      for (auto [from, to] : {std::pair{e.a, e.b}, std::pair{e.b, e.a}}) {
        if (!forbid_[from][to] || pag.mark_at(from, to) == Mark::arrow) continue;
        if (warn_on_change)
          warn("orientation " + names_[from] + " -> " + names_[to] + " conflicts with background knowledge; keeping the prohibition");
        pag.set_mark_at(from, to, Mark::arrow);
      }
    }
  }

  /// Sets a circle endpoint; other marks are final.
  static bool orient(Pag& pag, std::size_t at, std::size_t other, Mark mark) {
    if (pag.mark_at(at, other) != Mark::circle) return false;
    pag.set_mark_at(at, other, mark);
    return true;
  }

  void orient_colliders(Pag& pag) {
    std::vector<std::pair<std::size_t, std::array<std::size_t, 2>>> colliders;
    for (std::size_t z = 0; z < n_; ++z) {
      const auto nb = pag.neighbors(z);
      for (std::size_t i = 0; i < nb.size(); ++i) {
        for (std::size_t j = i + 1; j < nb.size(); ++j) {
          const std::size_t x = nb[i], y = nb[j];
          if (pag.adjacent(x, y)) continue;
          bool collider;
          if (const auto* s = sepset(x, y)) {
            collider = std::find(s->begin(), s->end(), z) == s->end();
          } else {
            collider = init_.has_edge(x, z) && init_.has_edge(y, z);
          }
          if (collider) colliders.push_back({z, {x, y}});
        }
      }
    }
    for (const auto& [z, ends] : colliders)
      for (std::size_t e : ends) orient(pag, z, e, Mark::arrow);
  }

  // R1: a *-> b o-* c, a and c non-adjacent  =>  b -> c
  bool rule1(Pag& pag) {
    bool changed = false;
    for (std::size_t b = 0; b < n_; ++b) {
      const auto nb = pag.neighbors(b);
      for (std::size_t a : nb) {
        if (pag.mark_at(b, a) != Mark::arrow) continue;
        for (std::size_t c : nb) {
          if (c == a || pag.adjacent(a, c) || pag.mark_at(b, c) != Mark::circle) continue;
          pag.set_mark_at(b, c, Mark::tail);
          pag.set_mark_at(c, b, Mark::arrow);
          changed = true;
        }
      }
    }
    return changed;
  }

  // R2: a -> b *-> c or a *-> b -> c, and a *-o c  =>  a *-> c
  bool rule2(Pag& pag) {
    bool changed = false;
    for (std::size_t a = 0; a < n_; ++a) {
      for (std::size_t c : pag.neighbors(a)) {
        if (pag.mark_at(c, a) != Mark::circle) continue;
        for (std::size_t b : pag.neighbors(a)) {
          if (b == c || !pag.adjacent(b, c)) continue;
          const bool first = pag.is_directed(a, b) && pag.mark_at(c, b) == Mark::arrow;
          const bool second = pag.mark_at(b, a) == Mark::arrow && pag.is_directed(b, c);
          if (first || second) {
            changed |= orient(pag, c, a, Mark::arrow);
            break;
          }
        }
      }
    }
    return changed;
  }

  // R3: a *-> b <-* c, a *-o d o-* c, a and c non-adjacent, d *-o b  =>  d *-> b
  bool rule3(Pag& pag) {
    bool changed = false;
    for (std::size_t b = 0; b < n_; ++b) {
      const auto nb = pag.neighbors(b);
      for (std::size_t d : nb) {
        if (pag.mark_at(b, d) != Mark::circle) continue;
        bool fire = false;
        for (std::size_t i = 0; i < nb.size() && !fire; ++i) {
          const std::size_t a = nb[i];
          if (a == d || pag.mark_at(b, a) != Mark::arrow || !pag.adjacent(a, d)) continue;
          if (pag.mark_at(d, a) != Mark::circle) continue;
          for (std::size_t j = i + 1; j < nb.size() && !fire; ++j) {
            const std::size_t c = nb[j];
            if (c == d || pag.mark_at(b, c) != Mark::arrow || pag.adjacent(a, c)) continue;
            if (pag.adjacent(c, d) && pag.mark_at(d, c) == Mark::circle) fire = true;
          }
        }
        if (fire) changed |= orient(pag, b, d, Mark::arrow);
      }
    }
    return changed;
  }

  // R4: discriminating path <t, ..., a, b, c> for b with b o-* c.
  bool rule4(Pag& pag) {
    bool changed = false;
    for (std::size_t c = 0; c < n_; ++c) {
      for (std::size_t b : pag.neighbors(c)) {
        if (!pag.adjacent(b, c) || pag.mark_at(b, c) != Mark::circle) continue;
        for (std::size_t a : pag.neighbors(b)) {
          if (a == c || !pag.adjacent(a, c) || !pag.is_directed(a, c)) continue;
          if (pag.mark_at(a, b) != Mark::arrow) continue;
          const auto theta = discriminating_start(pag, a, b, c);
          if (!theta) continue;
          const auto* s = sepset(*theta, c);
          if (!s) continue;
          if (std::find(s->begin(), s->end(), b) != s->end()) {
            pag.set_mark_at(b, c, Mark::tail);
            pag.set_mark_at(c, b, Mark::arrow);
          } else {
            orient(pag, b, a, Mark::arrow);
            orient(pag, b, c, Mark::arrow);
            orient(pag, c, b, Mark::arrow);
          }
          changed = true;
          break;
        }
      }
    }
    return changed;
  }

  /// Breadth-first search backwards from a along colliders that are parents
  /// of c; returns the first node not adjacent to c.
  std::optional<std::size_t> discriminating_start(const Pag& pag, std::size_t a, std::size_t b, std::size_t c) const {
    std::vector<char> seen(n_, 0);
    seen[a] = seen[b] = seen[c] = 1;
    std::deque<std::size_t> queue{a};
    while (!queue.empty()) {
      const std::size_t v = queue.front();
      queue.pop_front();
      for (std::size_t w : pag.neighbors(v)) {
        if (seen[w] || pag.mark_at(v, w) != Mark::arrow) continue;
        if (!pag.adjacent(w, c)) return w;
        if (pag.is_directed(w, c) && pag.mark_at(w, v) == Mark::arrow) {
          seen[w] = 1;
          queue.push_back(w);
        }
      }
    }
    return std::nullopt;
  }

  const Digraph& init_;
  const FactorTable& table_;
  DiscoveryConfig cfg_;
  const std::vector<std::string>& names_;
  std::size_t n_;
  std::vector<std::vector<char>> forbid_;
  std::vector<std::vector<char>> adj_;
  std::vector<std::size_t> order_;
  SepsetMap sepsets_;
  std::set<std::pair<std::size_t, std::size_t>> searched_;
};

}  // namespace

DiscoveryResult build_pag(const Digraph& init, const FactorTable& table, const BackgroundKnowledge& bk,
                          const DiscoveryConfig& cfg) {
  cfg.validate();
  return PagBuilder(init, table, bk, cfg).run();
}

DiscoveryResult discover(const FactorTable& table, const BackgroundKnowledge& bk, const DiscoveryConfig& cfg) {
  cfg.validate();
  if (table.cols() < 2) throw Error("discovery needs at least two variables");
  Digraph init(table.variables());
  if (cfg.use_score_init) {
    init = greedy_init(table, bk);
  } else {
    for (std::size_t a = 0; a < table.cols(); ++a)
      for (std::size_t b = a + 1; b < table.cols(); ++b) init.add_edge(a, b);
  }
  return build_pag(init, table, bk, cfg);
}

}  // namespace gci
