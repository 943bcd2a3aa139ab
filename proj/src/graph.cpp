#include "gci/graph.hpp"

#include <algorithm>
#include <numeric>

#include "gci/common.hpp"

namespace gci {

Digraph::Digraph(std::vector<std::string> nodes) : nodes_(std::move(nodes)), adj_(nodes_.size() * nodes_.size(), 0) {}

std::optional<std::size_t> Digraph::index_of(std::string_view name) const {
  auto it = std::find(nodes_.begin(), nodes_.end(), name);
  if (it == nodes_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - nodes_.begin());
}

std::size_t Digraph::require(std::string_view name) const {
  if (auto i = index_of(name)) return *i;
  throw Error("unknown graph node '" + std::string(name) + "'");
}

void Digraph::add_edge(std::size_t from, std::size_t to) {
  if (from == to) throw Error("self-loops are not allowed");
  adj_.at(from * size() + to) = 1;
}

void Digraph::remove_edge(std::size_t from, std::size_t to) { adj_.at(from * size() + to) = 0; }

std::size_t Digraph::edge_count() const {
  return static_cast<std::size_t>(std::count(adj_.begin(), adj_.end(), 1));
}

std::vector<std::size_t> Digraph::parents(std::size_t node) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size(); ++i)
    if (has_edge(i, node)) out.push_back(i);
  return out;
}

std::vector<std::size_t> Digraph::children(std::size_t node) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size(); ++i)
    if (has_edge(node, i)) out.push_back(i);
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> Digraph::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t a = 0; a < size(); ++a)
    for (std::size_t b = 0; b < size(); ++b)
      if (has_edge(a, b)) out.emplace_back(a, b);
  std::sort(out.begin(), out.end(), [this](const auto& x, const auto& y) {
    if (nodes_[x.first] != nodes_[y.first]) return nodes_[x.first] < nodes_[y.first];
    return nodes_[x.second] < nodes_[y.second];
  });
  return out;
}

bool Digraph::reachable(std::size_t from, std::size_t to) const {
  std::vector<char> seen(size(), 0);
  std::vector<std::size_t> stack{from};
  seen[from] = 1;
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    if (v == to) return true;
    for (std::size_t w = 0; w < size(); ++w) {
      if (has_edge(v, w) && !seen[w]) {
        seen[w] = 1;
        stack.push_back(w);
      }
    }
  }
  return false;
}

bool Digraph::is_acyclic() const { return !find_cycle().has_value(); }

std::optional<std::vector<std::size_t>> Digraph::find_cycle() const {
  // 0 = unvisited, 1 = on stack, 2 = done
  std::vector<int> state(size(), 0);
  std::vector<std::size_t> parent(size(), size());
  for (std::size_t root = 0; root < size(); ++root) {
    if (state[root]) continue;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
    state[root] = 1;
    while (!stack.empty()) {
      auto& [v, next] = stack.back();
      if (next == size()) {
        state[v] = 2;
        stack.pop_back();
        continue;
      }
      const std::size_t w = next++;
      if (!has_edge(v, w)) continue;
      if (state[w] == 1) {
        std::vector<std::size_t> cycle{w};
        for (std::size_t u = v; u != w; u = parent[u]) cycle.push_back(u);
        std::reverse(cycle.begin() + 1, cycle.end());
        return cycle;
      }
      if (state[w] == 0) {
        state[w] = 1;
        parent[w] = v;
        stack.emplace_back(w, 0);
      }
    }
  }
  return std::nullopt;
}

}  // namespace gci
