#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gci/factors.hpp"
#include "gci/graph.hpp"
#include "gci/table.hpp"

namespace gci {

enum class Mark { tail, arrow, circle };

std::string_view to_string(Mark mark);
Mark parse_mark(std::string_view text);

/// Partial ancestral graph. Each adjacent pair carries one endpoint mark per
/// end; mark_at(a, b) is the mark at a's end of the a-b edge.
class Pag {
 public:
  struct Edge {
    std::size_t a;
    std::size_t b;
    Mark mark_a;
    Mark mark_b;
  };

  Pag() = default;
  explicit Pag(std::vector<std::string> nodes);

  const std::vector<std::string>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  std::optional<std::size_t> index_of(std::string_view name) const;
  std::size_t require(std::string_view name) const;

  bool adjacent(std::size_t a, std::size_t b) const { return marks_[a * size() + b] != kNone; }
  Mark mark_at(std::size_t at, std::size_t other) const;
  void set_mark_at(std::size_t at, std::size_t other, Mark mark);
  void add_edge(std::size_t a, std::size_t b, Mark mark_a, Mark mark_b);
  void remove_edge(std::size_t a, std::size_t b);
  std::vector<std::size_t> neighbors(std::size_t a) const;
  /// Edges with a < b.
  std::vector<Edge> edges() const;

  /// a -> b: tail at a, arrow at b.
  bool is_directed(std::size_t a, std::size_t b) const {
    return adjacent(a, b) && mark_at(a, b) == Mark::tail && mark_at(b, a) == Mark::arrow;
  }

  bool operator==(const Pag&) const = default;

 private:
  static constexpr signed char kNone = -1;
  std::vector<std::string> nodes_;
  // marks_[a * n + b] = mark at b's end of the a-b edge, or kNone.
  std::vector<signed char> marks_;
};

/// Conditioning sets that separated non-adjacent pairs, keyed by (min, max) index.
class SepsetMap {
 public:
  void record(std::size_t a, std::size_t b, std::vector<std::size_t> set);
  const std::vector<std::size_t>* find(std::size_t a, std::size_t b) const;
  const std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>>& entries() const { return map_; }
  bool operator==(const SepsetMap&) const = default;

 private:
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> map_;
};

struct DiscoveryConfig {
  double alpha = 0.05;
  std::size_t max_cond = 3;
  std::size_t min_count_per_cell_multiplier = 10;
  bool use_score_init = true;

  void validate() const;
};

struct CiResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t df = 0;
  bool independent = false;
  /// False when the sample was too thin (or degenerate) to judge; such tests
  /// report dependence.
  bool informative = true;
};

/// Upper tail of the chi-square distribution.
double chi_square_upper_tail(double statistic, double df);

/// G-squared conditional independence test of x and y given s.
CiResult ci_test(const FactorTable& table, std::size_t x, std::size_t y, std::span<const std::size_t> s,
                 const DiscoveryConfig& cfg = {});

/// Multinomial log-likelihood of `node` given its parents minus (k/2) ln N,
/// with k = 2^|parents|. Higher is better.
double local_bic(const FactorTable& table, std::size_t node, std::span<const std::size_t> parents);

/// Greedy hill-climbing over DAGs (add / delete / reverse) on total BIC.
Digraph greedy_init(const FactorTable& table, const BackgroundKnowledge& bk);

struct DiscoveryResult {
  Pag pag;
  SepsetMap sepsets;
};

/// Adjacency pruning by CI tests starting from `init`'s skeleton, then
/// collider orientation and the FCI rules R1-R4 under background knowledge.
DiscoveryResult build_pag(const Digraph& init, const FactorTable& table, const BackgroundKnowledge& bk,
                          const DiscoveryConfig& cfg = {});

DiscoveryResult discover(const FactorTable& table, const BackgroundKnowledge& bk, const DiscoveryConfig& cfg = {});

}  // namespace gci
