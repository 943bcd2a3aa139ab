#include "gci/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "gci/common.hpp"

namespace gci {

namespace {

enum class Origin { directed = 0, partial = 1, undetermined = 2 };

struct EdgeDraw {
  std::size_t a, b;  // a's name < b's name
  Origin origin;
  // Admissible outcomes: +1 = a->b, -1 = b->a, 0 = absent.
  std::vector<int> options;
  std::vector<double> probs;
};

EdgeDraw classify(const Pag& pag, const Pag::Edge& e, const BackgroundKnowledge& bk) {
  const auto& names = pag.nodes();
  EdgeDraw d{e.a, e.b, Origin::directed, {}, {}};
  Mark ma = e.mark_a, mb = e.mark_b;
  if (names[d.a] > names[d.b]) {
    std::swap(d.a, d.b);
    std::swap(ma, mb);
  }
  const bool ok_ab = !bk.forbids(names[d.a], names[d.b]);
  const bool ok_ba = !bk.forbids(names[d.b], names[d.a]);
  const bool arrow_a = ma == Mark::arrow, arrow_b = mb == Mark::arrow;
  if (arrow_a && arrow_b) {
    d.options = {0};
    d.probs = {1.0};
  } else if (arrow_a || arrow_b) {
    const int dir = arrow_b ? +1 : -1;
    const bool ok = arrow_b ? ok_ab : ok_ba;
    const Mark other = arrow_b ? ma : mb;
    if (other == Mark::tail) {
      d.origin = Origin::directed;
      d.options = {ok ? dir : 0};
      d.probs = {1.0};
    } else {
      d.origin = Origin::partial;
      d.options = {dir, 0};
      d.probs = {ok ? 0.5 : 0.0, ok ? 0.5 : 1.0};
    }
  } else {
    d.origin = Origin::undetermined;
    d.options = {+1, -1, 0};
    const double admissible = 1.0 + (ok_ab ? 1.0 : 0.0) + (ok_ba ? 1.0 : 0.0);
    d.probs = {ok_ab ? 1.0 / admissible : 0.0, ok_ba ? 1.0 / admissible : 0.0, 1.0 / admissible};
  }
  return d;
}

int draw(const EdgeDraw& d, Rng& rng) {
  if (d.options.size() == 1) return d.options[0];
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < d.options.size(); ++i) {
    acc += d.probs[i];
    if (u < acc) return d.options[i];
  }
  return d.options.back();
}

}  // namespace

std::vector<Dag> sample_dags(const Pag& pag, std::size_t count, const BackgroundKnowledge& bk, std::uint64_t seed) {
  if (count < 1) throw Error("need at least one sampled graph");
  const auto& names = pag.nodes();
  std::vector<EdgeDraw> draws;
  for (const auto& e : pag.edges()) draws.push_back(classify(pag, e, bk));
  std::sort(draws.begin(), draws.end(), [&](const EdgeDraw& x, const EdgeDraw& y) {
    if (names[x.a] != names[y.a]) return names[x.a] < names[y.a];
    return names[x.b] < names[y.b];
  });

  std::vector<Dag> out;
  out.reserve(count);
  for (std::size_t q = 0; q < count; ++q) {
    Rng rng(seed, {q});
    Dag dag(names);
    std::map<std::pair<std::size_t, std::size_t>, Origin> origin;
    for (int attempt = 0; attempt <= 100; ++attempt) {
      dag = Dag(names);
      origin.clear();
      for (const auto& d : draws) {
        const int o = draw(d, rng);
        if (o == 0) continue;
        const auto [from, to] = o > 0 ? std::pair{d.a, d.b} : std::pair{d.b, d.a};
        dag.add_edge(from, to);
        origin[{from, to}] = d.origin;
      }
      if (dag.is_acyclic()) break;
    }
    while (auto cycle = dag.find_cycle()) {
      // Remove the least certain edge on the cycle, lexicographically last among equals.
      std::pair<std::size_t, std::size_t> victim{0, 0};
      bool have = false;
      for (std::size_t i = 0; i < cycle->size(); ++i) {
        const std::pair<std::size_t, std::size_t> e{(*cycle)[i], (*cycle)[(i + 1) % cycle->size()]};
        if (!have) {
          victim = e;
          have = true;
          continue;
        }
        const int rank_e = static_cast<int>(origin[e]), rank_v = static_cast<int>(origin[victim]);
        const auto key_e = std::pair{names[e.first], names[e.second]};
        const auto key_v = std::pair{names[victim.first], names[victim.second]};
        if (rank_e > rank_v || (rank_e == rank_v && key_e > key_v)) victim = e;
      }
      warn("sampled graph " + std::to_string(q) + " stayed cyclic; dropping " + names[victim.first] + " -> " +
           names[victim.second]);
      dag.remove_edge(victim.first, victim.second);
    }
    out.push_back(std::move(dag));
  }
  return out;
}

double graph_bic(const Dag& dag, const FactorTable& table) {
  double total = 0.0;
  for (std::size_t v = 0; v < dag.size(); ++v) {
    std::vector<std::size_t> parents;
    for (std::size_t p : dag.parents(v)) parents.push_back(table.require(dag.nodes()[p]));
    std::sort(parents.begin(), parents.end());
    total += local_bic(table, table.require(dag.nodes()[v]), parents);
  }
  return total;
}

std::string_view to_string(WeightMode mode) { return mode == WeightMode::softmax ? "softmax" : "raw"; }

WeightMode parse_weight_mode(std::string_view text) {
  if (text == "softmax") return WeightMode::softmax;
  if (text == "raw") return WeightMode::raw;
  throw Error("unknown weight mode '" + std::string(text) + "' (expected softmax or raw)");
}

std::vector<double> bic_weights(std::span<const double> bic, WeightMode mode) {
  if (bic.empty()) throw Error("no graphs to weight");
  if (mode == WeightMode::raw) return {bic.begin(), bic.end()};
  const double top = *std::max_element(bic.begin(), bic.end());
  std::vector<double> w(bic.size());
  double total = 0.0;
  for (std::size_t i = 0; i < bic.size(); ++i) total += (w[i] = std::exp(bic[i] - top));
  for (double& x : w) x /= total;
  return w;
}

WeightedDagSet weight_graphs(std::vector<Dag> dags, const FactorTable& table, WeightMode mode, std::uint64_t seed) {
  if (dags.empty()) throw Error("weight_graphs needs at least one graph");
  WeightedDagSet set;
  set.seed = seed;
  set.mode = mode;
  set.nodes = dags.front().nodes();
  for (const auto& d : dags) {
    if (d.nodes() != set.nodes) throw Error("sampled graphs disagree on their node set");
    set.raw_bic.push_back(graph_bic(d, table));
  }
  set.weights = bic_weights(set.raw_bic, mode);
  set.dags = std::move(dags);
  return set;
}

namespace {

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

std::string_view arrow_style(Mark m) {
  switch (m) {
    case Mark::tail:
      return "none";
    case Mark::arrow:
      return "normal";
    case Mark::circle:
      return "odot";
  }
  return "none";
}

}  // namespace

std::string export_dot(const Pag& pag) {
  std::ostringstream out;
  out << "digraph g {\n";
  for (const auto& n : pag.nodes()) out << "  " << quoted(n) << ";\n";
  for (const auto& e : pag.edges()) {
    out << "  " << quoted(pag.nodes()[e.a]) << " -> " << quoted(pag.nodes()[e.b]) << " [dir=both, arrowtail="
        << arrow_style(e.mark_a) << ", arrowhead=" << arrow_style(e.mark_b) << "];\n";
  }
  out << "}\n";
  return out.str();
}

std::string export_dot(const Dag& dag, const EdgeLabels& labels) {
  std::ostringstream out;
  out << "digraph g {\n";
  for (const auto& n : dag.nodes()) out << "  " << quoted(n) << ";\n";
  for (const auto& [a, b] : dag.edges()) {
    out << "  " << quoted(dag.nodes()[a]) << " -> " << quoted(dag.nodes()[b]) << " [arrowhead=normal";
    if (auto it = labels.find({dag.nodes()[a], dag.nodes()[b]}); it != labels.end())
      out << ", label=" << quoted(it->second);
    out << "];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace gci
