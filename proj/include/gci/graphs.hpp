#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gci/discovery.hpp"
#include "gci/factors.hpp"
#include "gci/graph.hpp"
#include "gci/table.hpp"

namespace gci {

/// Draws Q DAGs from a PAG: -> kept, <-> dropped, o-> kept with probability
/// 1/2, o-o oriented either way or dropped with probability 1/3 each (options
/// that violate background knowledge are removed and the rest renormalized).
/// Graph q uses its own random substream keyed by (seed, q).
std::vector<Dag> sample_dags(const Pag& pag, std::size_t count, const BackgroundKnowledge& bk, std::uint64_t seed);

/// Sum of local BIC scores of every node given its parents in the DAG.
double graph_bic(const Dag& dag, const FactorTable& table);

enum class WeightMode { softmax, raw };

std::string_view to_string(WeightMode mode);
WeightMode parse_weight_mode(std::string_view text);

struct WeightedDagSet {
  std::uint64_t seed = 0;
  WeightMode mode = WeightMode::softmax;
  std::vector<std::string> nodes;
  std::vector<Dag> dags;
  std::vector<double> raw_bic;
  std::vector<double> weights;
};

/// softmax: w_q proportional to exp(BIC_q - max BIC). raw: w_q = BIC_q.
std::vector<double> bic_weights(std::span<const double> bic, WeightMode mode);

WeightedDagSet weight_graphs(std::vector<Dag> dags, const FactorTable& table, WeightMode mode = WeightMode::softmax,
                             std::uint64_t seed = 0);

/// Optional per-edge labels for DOT output, keyed by (from, to) node names.
using EdgeLabels = std::map<std::pair<std::string, std::string>, std::string>;

std::string export_dot(const Pag& pag);
std::string export_dot(const Dag& dag, const EdgeLabels& labels = {});

}  // namespace gci
