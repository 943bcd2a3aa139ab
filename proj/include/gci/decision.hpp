#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gci/corpus.hpp"
#include "gci/effects.hpp"
#include "gci/factors.hpp"
#include "gci/graphs.hpp"
#include "gci/table.hpp"

namespace gci {

/// Treatments of each outcome: factors with nonzero aggregated strength toward it.
using TreatmentSets = std::vector<std::vector<std::size_t>>;

TreatmentSets treatment_sets(const StrengthMatrix& strengths);

struct ChargeScores {
  std::string id;
  /// One score per outcome column of the strength matrix.
  std::vector<double> scores;
};

/// S(Y_i) = sum over T in Tr(Y_i) of psi_tilde(T, Y_i) * presence(T).
/// `row` is aligned to strengths.factors.
ChargeScores charge_scores(std::span<const std::uint8_t> row, const StrengthMatrix& strengths,
                           const TreatmentSets& treatments, std::string id = {});
ChargeScores charge_scores(std::span<const std::uint8_t> row, const StrengthMatrix& strengths, std::string id = {});

/// Presence vector of table row r aligned to strengths.factors (absent columns read as 0).
std::vector<std::uint8_t> presence_row(const FactorTable& table, std::size_t r, const StrengthMatrix& strengths);

/// Scores of every table row, ids taken from the table.
std::vector<ChargeScores> score_table(const FactorTable& table, const StrengthMatrix& strengths);

struct TreeNode {
  /// Split feature, or -1 for a leaf.
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::size_t label = 0;

  bool operator==(const TreeNode&) const = default;
};

/// Binary tree stored as a node array; node 0 is the root. x[feature] <= threshold goes left.
struct DecisionTree {
  std::vector<TreeNode> nodes;

  std::size_t predict(std::span<const double> x) const;
  std::size_t depth() const;
  bool operator==(const DecisionTree&) const = default;
};

struct ForestModel {
  std::vector<std::string> charges;
  std::size_t n_features = 0;
  std::size_t n_trees = 0;
  std::size_t max_depth = 0;
  std::uint64_t seed = 0;
  std::vector<DecisionTree> trees;

  bool operator==(const ForestModel&) const = default;
};

/// Random forest over score vectors: seeded bootstrap per tree, ceil(sqrt(F))
/// candidate features per split, Gini impurity, midpoint thresholds.
/// labels[i] indexes into `charges`.
ForestModel train_forest(std::span<const std::vector<double>> features, std::span<const std::size_t> labels,
                         std::vector<std::string> charges, std::size_t n_trees, std::size_t max_depth,
                         std::uint64_t seed);

/// Majority vote; ties go to the earlier charge.
std::size_t predict_index(const ForestModel& model, std::span<const double> x);
std::string predict(const ForestModel& model, std::span<const double> x);

struct CausalChain {
  std::vector<std::string> path;
  std::string terminal_charge;
  double weight = 0.0;

  bool operator==(const CausalChain&) const = default;
};

/// Simple directed paths of at most `max_len` present factors ending in a
/// parent of the charge node, merged across graphs with summed weights,
/// heaviest first (ties by path).
std::vector<CausalChain> extract_chains(const WeightedDagSet& dags, const std::set<std::string, std::less<>>& present,
                                        std::string_view charge, std::size_t max_len);

/// Per-token supervision targets g_i for the gold charge.
std::vector<double> attention_targets(const Document& doc, const FactorVocabulary& vocab,
                                      const StrengthMatrix& strengths, std::string_view gold);

struct GroupRates {
  std::string group;
  std::size_t count = 0;
  double fpr = 0.0;
  double fnr = 0.0;
};

struct FairnessReport {
  std::string positive_charge;
  double fpr = 0.0;
  double fnr = 0.0;
  /// Sorted by group name.
  std::vector<GroupRates> groups;
  double fped = 0.0;
  double fned = 0.0;
};

FairnessReport fairness_metrics(std::span<const std::string> predictions, std::span<const std::string> labels,
                                std::span<const std::string> groups, std::string_view positive_charge);

}  // namespace gci
