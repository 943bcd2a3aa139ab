#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gci {

/// Directed graph over named nodes (adjacency-matrix backed; node counts here
/// stay well below a hundred).
class Digraph {
 public:
  Digraph() = default;
  explicit Digraph(std::vector<std::string> nodes);

  const std::vector<std::string>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  std::optional<std::size_t> index_of(std::string_view name) const;
  std::size_t require(std::string_view name) const;

  bool has_edge(std::size_t from, std::size_t to) const { return adj_[from * size() + to]; }
  bool adjacent(std::size_t a, std::size_t b) const { return has_edge(a, b) || has_edge(b, a); }
  void add_edge(std::size_t from, std::size_t to);
  void remove_edge(std::size_t from, std::size_t to);
  std::size_t edge_count() const;

  std::vector<std::size_t> parents(std::size_t node) const;
  std::vector<std::size_t> children(std::size_t node) const;
  /// All edges, ordered by (from name, to name).
  std::vector<std::pair<std::size_t, std::size_t>> edges() const;

  /// True when `to` is reachable from `from` along directed edges.
  bool reachable(std::size_t from, std::size_t to) const;
  bool is_acyclic() const;
  /// Node sequence of some directed cycle, if any.
  std::optional<std::vector<std::size_t>> find_cycle() const;

  bool operator==(const Digraph&) const = default;

 private:
  std::vector<std::string> nodes_;
  std::vector<char> adj_;
};

/// Acyclic by contract; sampling and hill-climbing maintain it.
using Dag = Digraph;

}  // namespace gci
